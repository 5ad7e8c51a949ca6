//! Dyadic tensor-product grid hierarchy on the rectangle `Ω = Ω₁ × Ω₂`.
//!
//! Level `l` has `n0_x·2^l × n0_xi·2^l` cells; every refinement bisects a
//! cell in both directions at once. The adaptive grid is described by a
//! [`DetailTree`]: the set of refined cells, closed under taking ancestors.
//! Its leaves tile the domain.

use std::io::Write;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};

/// Address of a cell in the hierarchy. Ordering is `(level, ix, ixi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub level: u8,
    pub ix: u32,
    pub ixi: u32,
}

impl CellIndex {
    pub const fn new(level: u8, ix: u32, ixi: u32) -> Self {
        CellIndex { level, ix, ixi }
    }

    pub fn parent(self) -> Option<CellIndex> {
        (self.level > 0).then(|| CellIndex::new(self.level - 1, self.ix / 2, self.ixi / 2))
    }

    /// The four cells one level down, ordered `(0,0), (1,0), (0,1), (1,1)` in
    /// `(x, ξ)` offsets. Child `k` has offsets `(k & 1, k >> 1)`.
    pub fn children(self) -> [CellIndex; 4] {
        let (l, x, y) = (self.level + 1, 2 * self.ix, 2 * self.ixi);
        [
            CellIndex::new(l, x, y),
            CellIndex::new(l, x + 1, y),
            CellIndex::new(l, x, y + 1),
            CellIndex::new(l, x + 1, y + 1),
        ]
    }

    /// Ancestor at `level` (which must not exceed `self.level`).
    pub fn ancestor(self, level: u8) -> CellIndex {
        let shift = self.level - level;
        CellIndex::new(level, self.ix >> shift, self.ixi >> shift)
    }
}

/// Axis-aligned cell rectangle `[x0,x1] × [xi0,xi1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub xi0: f64,
    pub xi1: f64,
}

impl Rect {
    pub fn hx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn hxi(&self) -> f64 {
        self.xi1 - self.xi0
    }

    pub fn area(&self) -> f64 {
        self.hx() * self.hxi()
    }

    pub fn contains(&self, x: f64, xi: f64) -> bool {
        x >= self.x0 && x <= self.x1 && xi >= self.xi0 && xi <= self.xi1
    }

    /// Reference coordinates of a physical point.
    pub fn to_reference(&self, x: f64, xi: f64) -> (f64, f64) {
        ((x - self.x0) / self.hx(), (xi - self.xi0) / self.hxi())
    }
}

/// Treatment of the spatial boundary. The stochastic direction never needs
/// one because its flux vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Constant extrapolation ghost cells.
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub x_interval: (f64, f64),
    pub xi_interval: (f64, f64),
    pub n0_x: u32,
    pub n0_xi: u32,
    pub max_level: u8,
}

impl GridConfig {
    pub fn new(x_interval: (f64, f64), xi_interval: (f64, f64), n0_x: u32, n0_xi: u32, max_level: u8) -> Result<Self> {
        if !(x_interval.1 > x_interval.0) || !(xi_interval.1 > xi_interval.0) {
            return Err(Error::Config(format!("empty domain {x_interval:?} x {xi_interval:?}")));
        }
        if n0_x == 0 || n0_xi == 0 {
            return Err(Error::Config("coarse grid needs at least one cell per direction".into()));
        }
        if max_level > 20 {
            return Err(Error::Config(format!("max level {max_level} too large")));
        }
        Ok(GridConfig { x_interval, xi_interval, n0_x, n0_xi, max_level })
    }

    /// `[0,1]²` with the given coarse grid.
    pub fn unit(n0_x: u32, n0_xi: u32, max_level: u8) -> Result<Self> {
        Self::new((0.0, 1.0), (0.0, 1.0), n0_x, n0_xi, max_level)
    }

    pub fn with_max_level(&self, max_level: u8) -> Self {
        GridConfig { max_level, ..self.clone() }
    }

    pub fn nx(&self, level: u8) -> u32 {
        self.n0_x << level
    }

    pub fn nxi(&self, level: u8) -> u32 {
        self.n0_xi << level
    }

    pub fn h_x(&self, level: u8) -> f64 {
        (self.x_interval.1 - self.x_interval.0) / self.nx(level) as f64
    }

    pub fn h_xi(&self, level: u8) -> f64 {
        (self.xi_interval.1 - self.xi_interval.0) / self.nxi(level) as f64
    }

    pub fn domain_area(&self) -> f64 {
        (self.x_interval.1 - self.x_interval.0) * (self.xi_interval.1 - self.xi_interval.0)
    }

    pub fn is_valid(&self, c: CellIndex) -> bool {
        c.level <= self.max_level && c.ix < self.nx(c.level) && c.ixi < self.nxi(c.level)
    }

    pub fn cell(&self, level: u8, ix: u32, ixi: u32) -> Result<CellIndex> {
        let c = CellIndex::new(level, ix, ixi);
        if self.is_valid(c) {
            Ok(c)
        } else {
            Err(Error::Config(format!("cell {c:?} outside the hierarchy")))
        }
    }

    pub fn children(&self, c: CellIndex) -> Result<[CellIndex; 4]> {
        if c.level >= self.max_level {
            return Err(Error::AtFinestLevel(c));
        }
        Ok(c.children())
    }

    pub fn coarse_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.n0_x).flat_map(move |ix| (0..self.n0_xi).map(move |ixi| CellIndex::new(0, ix, ixi)))
    }

    pub fn coarse_position(&self, c: CellIndex) -> usize {
        debug_assert_eq!(c.level, 0);
        c.ix as usize * self.n0_xi as usize + c.ixi as usize
    }

    pub fn cell_geometry(&self, c: CellIndex) -> Rect {
        let hx = self.h_x(c.level);
        let hxi = self.h_xi(c.level);
        let x0 = self.x_interval.0 + c.ix as f64 * hx;
        let xi0 = self.xi_interval.0 + c.ixi as f64 * hxi;
        // Snap the last cell onto the domain end so leaves tile exactly.
        let x1 =
            if c.ix + 1 == self.nx(c.level) { self.x_interval.1 } else { self.x_interval.0 + (c.ix + 1) as f64 * hx };
        let xi1 = if c.ixi + 1 == self.nxi(c.level) {
            self.xi_interval.1
        } else {
            self.xi_interval.0 + (c.ixi + 1) as f64 * hxi
        };
        Rect { x0, x1, xi0, xi1 }
    }

    /// Same-level neighbour in `x`, or `None` at a non-periodic boundary.
    pub fn x_neighbor(&self, c: CellIndex, side: Side, boundary: Boundary) -> Option<CellIndex> {
        let n = self.nx(c.level);
        let ix = match (side, boundary) {
            (Side::Left, _) if c.ix > 0 => c.ix - 1,
            (Side::Left, Boundary::Periodic) => n - 1,
            (Side::Left, Boundary::Extrapolate) => return None,
            (Side::Right, _) if c.ix + 1 < n => c.ix + 1,
            (Side::Right, Boundary::Periodic) => 0,
            (Side::Right, Boundary::Extrapolate) => return None,
        };
        Some(CellIndex::new(c.level, ix, c.ixi))
    }

    /// Same-level neighbours offset by ±1 in `x`. Never offsets in `ξ`.
    pub fn spatial_neighbors(&self, c: CellIndex, boundary: Boundary) -> Vec<CellIndex> {
        let mut out = Vec::with_capacity(2);
        for side in [Side::Left, Side::Right] {
            if let Some(n) = self.x_neighbor(c, side, boundary) {
                if n != c && !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out
    }

    /// Centres of the finest-level `x` columns.
    pub fn finest_x_centers(&self) -> Vec<f64> {
        let h = self.h_x(self.max_level);
        (0..self.nx(self.max_level)).map(|i| self.x_interval.0 + (i as f64 + 0.5) * h).collect()
    }
}

/// Set of refined cells (cells carrying a detail). Leaves are the cells whose
/// parent is refined (or that sit on level 0) and which are not refined
/// themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetailTree {
    refined: FxHashSet<CellIndex>,
}

impl DetailTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every cell below `max_level` refined: the leaves are the uniform finest grid.
    pub fn full(cfg: &GridConfig) -> Self {
        let mut t = DetailTree::new();
        for l in 0..cfg.max_level {
            for ix in 0..cfg.nx(l) {
                for ixi in 0..cfg.nxi(l) {
                    t.mark(CellIndex::new(l, ix, ixi));
                }
            }
        }
        t
    }

    pub fn from_cells(cells: impl IntoIterator<Item = CellIndex>) -> Self {
        DetailTree { refined: cells.into_iter().collect() }
    }

    pub fn mark(&mut self, c: CellIndex) -> bool {
        self.refined.insert(c)
    }

    pub fn contains(&self, c: &CellIndex) -> bool {
        self.refined.contains(c)
    }

    pub fn len(&self) -> usize {
        self.refined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refined.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CellIndex> {
        self.refined.iter()
    }

    pub fn sorted(&self) -> Vec<CellIndex> {
        let mut v: Vec<_> = self.refined.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn is_subset(&self, other: &DetailTree) -> bool {
        self.refined.is_subset(&other.refined)
    }

    pub fn max_level(&self) -> Option<u8> {
        self.refined.iter().map(|c| c.level).max()
    }

    pub fn is_graded(&self) -> bool {
        self.refined.iter().all(|c| c.parent().map_or(true, |p| self.refined.contains(&p)))
    }

    /// Smallest tree-graded superset: all ancestors of marked cells are marked.
    pub fn grade(&self) -> DetailTree {
        let mut out = self.clone();
        out.grade_in_place();
        out
    }

    pub fn grade_in_place(&mut self) {
        let marked: Vec<CellIndex> = self.refined.iter().copied().collect();
        for mut c in marked {
            while let Some(p) = c.parent() {
                if !self.refined.insert(p) {
                    break;
                }
                c = p;
            }
        }
    }

    pub fn is_leaf(&self, c: CellIndex) -> bool {
        !self.refined.contains(&c) && c.parent().map_or(true, |p| self.refined.contains(&p))
    }

    /// Leaves of a graded tree, sorted by `(level, ix, ixi)`.
    pub fn leaves(&self, cfg: &GridConfig) -> Vec<CellIndex> {
        let mut out = Vec::new();
        let mut stack: Vec<CellIndex> = cfg.coarse_cells().collect();
        while let Some(c) = stack.pop() {
            if self.refined.contains(&c) {
                stack.extend(c.children());
            } else {
                out.push(c);
            }
        }
        out.sort_unstable();
        out
    }

    /// Leaf covering `c`: `c` itself or its closest ancestor that is a leaf.
    /// Returns `None` when `c` is refined.
    pub fn covering_leaf(&self, c: CellIndex) -> Option<CellIndex> {
        if self.refined.contains(&c) {
            return None;
        }
        let mut cur = c;
        while let Some(p) = cur.parent() {
            if self.refined.contains(&p) {
                break;
            }
            cur = p;
        }
        Some(cur)
    }
}

/// Writes the leaf grid as CSV with header `level,ix,ixi,x0,x1,xi0,xi1`.
pub fn write_leaf_csv<W: Write>(cfg: &GridConfig, leaves: &[CellIndex], mut w: W) -> std::io::Result<()> {
    writeln!(w, "level,ix,ixi,x0,x1,xi0,xi1")?;
    let mut sorted = leaves.to_vec();
    sorted.sort_unstable();
    for c in sorted {
        let r = cfg.cell_geometry(c);
        writeln!(w, "{},{},{},{},{},{},{}", c.level, c.ix, c.ixi, r.x0, r.x1, r.xi0, r.xi1)?;
    }
    Ok(())
}
