//! DG coefficients on the leaves of an adaptive grid.

use rustc_hash::FxHashMap;

use crate::basis::{legendre_values, DgBasis, MAX_ORDER};
use crate::error::{Error, Result};
use crate::grid::{CellIndex, DetailTree, GridConfig, Rect};

/// Leaf coefficient blocks of a graded tree, stored contiguously in leaf order
/// `(level, ix, ixi)`.
#[derive(Debug, Clone)]
pub struct LeafField {
    ncomp: usize,
    p: usize,
    tree: DetailTree,
    leaves: Vec<CellIndex>,
    coeffs: Vec<f64>,
    index: FxHashMap<CellIndex, usize>,
}

impl LeafField {
    /// Takes coefficients already ordered like `tree.leaves(cfg)`.
    pub fn new(cfg: &GridConfig, tree: DetailTree, ncomp: usize, p: usize, coeffs: Vec<f64>) -> Result<Self> {
        let leaves = tree.leaves(cfg);
        Self::from_parts(tree, leaves, ncomp, p, coeffs)
    }

    pub(crate) fn from_parts(
        tree: DetailTree,
        leaves: Vec<CellIndex>,
        ncomp: usize,
        p: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let bl = ncomp * p * p;
        if coeffs.len() != leaves.len() * bl {
            return Err(Error::LeafMismatch(format!(
                "{} coefficients for {} leaves of block size {bl}",
                coeffs.len(),
                leaves.len()
            )));
        }
        let index = leaves.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(LeafField { ncomp, p, tree, leaves, coeffs, index })
    }

    /// Builds a field from explicit `(leaf, block)` pairs, which must be exactly
    /// the leaves of `tree`.
    pub fn from_blocks(
        cfg: &GridConfig,
        tree: DetailTree,
        ncomp: usize,
        p: usize,
        blocks: &FxHashMap<CellIndex, Vec<f64>>,
    ) -> Result<Self> {
        let leaves = tree.leaves(cfg);
        if leaves.len() != blocks.len() {
            return Err(Error::LeafMismatch(format!("{} blocks given for {} leaves", blocks.len(), leaves.len())));
        }
        let mut coeffs = Vec::with_capacity(leaves.len() * ncomp * p * p);
        for c in &leaves {
            let b = blocks.get(c).ok_or_else(|| Error::LeafMismatch(format!("no block for leaf {c:?}")))?;
            if b.len() != ncomp * p * p {
                return Err(Error::LeafMismatch(format!("block of {c:?} has length {}", b.len())));
            }
            coeffs.extend_from_slice(b);
        }
        Self::from_parts(tree, leaves, ncomp, p, coeffs)
    }

    pub fn zeros(cfg: &GridConfig, tree: DetailTree, ncomp: usize, p: usize) -> Self {
        let n = tree.leaves(cfg).len();
        Self::new(cfg, tree, ncomp, p, vec![0.0; n * ncomp * p * p]).expect("sizes match")
    }

    /// `L²` projection of `f` on every leaf of `tree`.
    pub fn project(
        cfg: &GridConfig,
        basis: &DgBasis,
        tree: DetailTree,
        ncomp: usize,
        f: impl Fn(f64, f64, &mut [f64]) + Sync,
    ) -> Self {
        use rayon::prelude::*;
        let leaves = tree.leaves(cfg);
        let bl = basis.block_len(ncomp);
        let mut coeffs = vec![0.0; leaves.len() * bl];
        coeffs.par_chunks_mut(bl).zip(leaves.par_iter()).for_each(|(b, &c)| {
            b.copy_from_slice(&basis.project(ncomp, &cfg.cell_geometry(c), &f));
        });
        Self::from_parts(tree, leaves, ncomp, basis.order(), coeffs).expect("sizes match")
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn block_len(&self) -> usize {
        self.ncomp * self.p * self.p
    }

    pub fn tree(&self) -> &DetailTree {
        &self.tree
    }

    pub fn leaves(&self) -> &[CellIndex] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_parts(self) -> (DetailTree, Vec<CellIndex>, Vec<f64>) {
        (self.tree, self.leaves, self.coeffs)
    }

    pub fn index_of(&self, c: CellIndex) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let bl = self.block_len();
        &self.coeffs[i * bl..(i + 1) * bl]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let bl = self.block_len();
        &mut self.coeffs[i * bl..(i + 1) * bl]
    }

    pub fn get(&self, c: CellIndex) -> Option<&[f64]> {
        self.index_of(c).map(|i| self.block(i))
    }

    /// Cell mean of component `comp` on leaf `i`.
    pub fn mean(&self, cfg: &GridConfig, i: usize, comp: usize) -> f64 {
        let c = self.leaves[i];
        self.block(i)[comp * self.p * self.p] / nominal_area(cfg, c.level).sqrt()
    }

    /// `∫_Ω u dΩ` per component.
    pub fn total_integral(&self, cfg: &GridConfig) -> Vec<f64> {
        let mut out = vec![0.0; self.ncomp];
        for (i, c) in self.leaves.iter().enumerate() {
            let s = nominal_area(cfg, c.level).sqrt();
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.block(i)[k * self.p * self.p] * s;
            }
        }
        out
    }

    /// Leaf containing `(x, ξ)`; points on interior edges go to the upper cell.
    pub fn locate(&self, cfg: &GridConfig, x: f64, xi: f64) -> CellIndex {
        locate(cfg, &self.tree, x, xi)
    }

    pub fn evaluate(&self, cfg: &GridConfig, basis: &DgBasis, x: f64, xi: f64) -> Result<Vec<f64>> {
        let c = self.locate(cfg, x, xi);
        let i = self.index_of(c).expect("located cell is a leaf");
        basis.evaluate(self.block(i), self.ncomp, x, xi, &cfg.cell_geometry(c))
    }

    /// Values at the centres of a uniform `nx × nxi` raster, row-major in `x`
    /// then `ξ`, component innermost.
    pub fn sample_raster(&self, cfg: &GridConfig, nx: usize, nxi: usize) -> Vec<f64> {
        use rayon::prelude::*;
        let (a, b) = cfg.x_interval;
        let (c, d) = cfg.xi_interval;
        let hx = (b - a) / nx as f64;
        let hy = (d - c) / nxi as f64;
        let ncomp = self.ncomp;
        let mut out = vec![0.0; nx * nxi * ncomp];
        out.par_chunks_mut(nxi * ncomp).enumerate().for_each(|(i, row)| {
            let x = a + (i as f64 + 0.5) * hx;
            for j in 0..nxi {
                let xi = c + (j as f64 + 0.5) * hy;
                self.evaluate_into(cfg, x, xi, &mut row[j * ncomp..(j + 1) * ncomp]);
            }
        });
        out
    }

    /// Evaluation without the outside-cell check.
    pub fn evaluate_into(&self, cfg: &GridConfig, x: f64, xi: f64, out: &mut [f64]) {
        let c = self.locate(cfg, x, xi);
        let i = self.index[&c];
        let r = cfg.cell_geometry(c);
        let (xr, yr) = r.to_reference(x, xi);
        evaluate_block(self.block(i), self.p, xr, yr, nominal_area(cfg, c.level), out);
    }
}

/// Nominal cell area on `level`.
pub fn nominal_area(cfg: &GridConfig, level: u8) -> f64 {
    cfg.h_x(level) * cfg.h_xi(level)
}

pub(crate) fn evaluate_block(block: &[f64], p: usize, xr: f64, yr: f64, area: f64, out: &mut [f64]) {
    let mut fx = [0.0; MAX_ORDER];
    let mut fy = [0.0; MAX_ORDER];
    legendre_values(xr, &mut fx[..p]);
    legendre_values(yr, &mut fy[..p]);
    let s = 1.0 / area.sqrt();
    for (c, o) in out.iter_mut().enumerate() {
        let b = &block[c * p * p..(c + 1) * p * p];
        let mut v = 0.0;
        for i1 in 0..p {
            let mut row = 0.0;
            for i2 in 0..p {
                row += b[i1 * p + i2] * fy[i2];
            }
            v += fx[i1] * row;
        }
        *o = v * s;
    }
}

fn clamp_index(v: f64, n: u32) -> u32 {
    if v <= 0.0 {
        0
    } else {
        (v.floor() as u64).min(n as u64 - 1) as u32
    }
}

/// Leaf of `tree` containing `(x, ξ)`.
pub fn locate(cfg: &GridConfig, tree: &DetailTree, x: f64, xi: f64) -> CellIndex {
    let fx = (x - cfg.x_interval.0) / (cfg.x_interval.1 - cfg.x_interval.0);
    let fy = (xi - cfg.xi_interval.0) / (cfg.xi_interval.1 - cfg.xi_interval.0);
    let mut c =
        CellIndex::new(0, clamp_index(fx * cfg.n0_x as f64, cfg.n0_x), clamp_index(fy * cfg.n0_xi as f64, cfg.n0_xi));
    while tree.contains(&c) {
        let l = c.level + 1;
        let ix = clamp_index(fx * cfg.nx(l) as f64, cfg.nx(l)).clamp(2 * c.ix, 2 * c.ix + 1);
        let ixi = clamp_index(fy * cfg.nxi(l) as f64, cfg.nxi(l)).clamp(2 * c.ixi, 2 * c.ixi + 1);
        c = CellIndex::new(l, ix, ixi);
    }
    c
}

/// Reference-coordinate sub-rectangle of `inner` inside its ancestor `outer`.
pub fn relative_rect(outer: CellIndex, inner: CellIndex) -> Rect {
    let shift = inner.level - outer.level;
    let n = (1u64 << shift) as f64;
    let ox = (inner.ix as u64 - ((outer.ix as u64) << shift)) as f64;
    let oy = (inner.ixi as u64 - ((outer.ixi as u64) << shift)) as f64;
    Rect { x0: ox / n, x1: (ox + 1.0) / n, xi0: oy / n, xi1: (oy + 1.0) / n }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_and_evaluate_on_adaptive_tree() {
        let cfg = GridConfig::unit(2, 2, 3).unwrap();
        let basis = DgBasis::new(3).unwrap();
        let tree = DetailTree::from_cells([CellIndex::new(2, 1, 3)]).grade();
        let f = |x: f64, xi: f64, o: &mut [f64]| o[0] = 1.0 + x * xi - 0.5 * x * x;
        let field = LeafField::project(&cfg, &basis, tree, 1, f);
        for &(x, xi) in &[(0.1, 0.2), (0.33, 0.9), (0.99, 0.01), (0.3, 0.85)] {
            let v = field.evaluate(&cfg, &basis, x, xi).unwrap();
            let mut e = [0.0];
            f(x, xi, &mut e);
            assert!((v[0] - e[0]).abs() < 1e-13);
        }
        let total = field.total_integral(&cfg)[0];
        let exact = 1.0 + 0.25 - 0.5 / 3.0;
        assert!((total - exact).abs() < 1e-13);
    }

    #[test]
    fn mismatched_coefficients_rejected() {
        let cfg = GridConfig::unit(1, 1, 2).unwrap();
        let err = LeafField::new(&cfg, DetailTree::new(), 1, 2, vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::LeafMismatch(_)));
    }

    #[test]
    fn locate_descends_to_leaf() {
        let cfg = GridConfig::unit(1, 1, 3).unwrap();
        let tree = DetailTree::from_cells([CellIndex::new(1, 1, 0)]).grade();
        assert_eq!(locate(&cfg, &tree, 0.9, 0.1), CellIndex::new(2, 3, 0));
        assert_eq!(locate(&cfg, &tree, 0.1, 0.9), CellIndex::new(1, 0, 1));
        assert_eq!(locate(&cfg, &tree, 1.0, 1.0), CellIndex::new(1, 1, 1));
    }
}
