//! Multiscale transform between leaf coefficients and the hierarchical
//! representation (coarse blocks plus details), hard thresholding and
//! prediction of the refinement set.

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::basis::DgBasis;
use crate::error::{Error, Result};
use crate::field::{nominal_area, LeafField};
use crate::grid::{Boundary, CellIndex, DetailTree, GridConfig};
use crate::stochastic::Distribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    Uniform,
    Weighted,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(ThresholdMode::Uniform),
            "weighted" => Ok(ThresholdMode::Weighted),
            _ => Err(Error::Config(format!("unknown threshold mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThresholdMode::Uniform => "uniform",
            ThresholdMode::Weighted => "weighted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolicy {
    pub mode: ThresholdMode,
    pub eps_max: f64,
    /// Density used by weighted thresholding.
    pub distribution: Option<Distribution>,
    /// A detail refines its children in the prediction when it exceeds this
    /// multiple of their threshold. `None` means `2^p`.
    pub steepening: Option<f64>,
}

impl ThresholdPolicy {
    /// `ε_max = C·h_L^β`, divided by `sup p` in weighted mode.
    pub fn heuristic(
        cfg: &GridConfig,
        mode: ThresholdMode,
        c_heuristic: f64,
        beta: f64,
        distribution: Option<Distribution>,
    ) -> Result<Self> {
        if !(c_heuristic > 0.0) {
            return Err(Error::Config(format!("threshold constant must be positive, got {c_heuristic}")));
        }
        let h = cfg.h_x(cfg.max_level).powf(beta);
        let eps_max = match mode {
            ThresholdMode::Uniform => c_heuristic * h,
            ThresholdMode::Weighted => {
                let d =
                    distribution.ok_or_else(|| Error::Config("weighted thresholding needs a distribution".into()))?;
                c_heuristic / d.sup() * h
            }
        };
        Ok(ThresholdPolicy { mode, eps_max, distribution, steepening: None })
    }

    pub fn fixed(mode: ThresholdMode, eps_max: f64, distribution: Option<Distribution>) -> Self {
        ThresholdPolicy { mode, eps_max, distribution, steepening: None }
    }

    /// Disables the children rule of the prediction.
    pub fn with_no_steepening(mut self) -> Self {
        self.steepening = Some(f64::INFINITY);
        self
    }

    pub fn steepening_factor(&self, p: usize) -> f64 {
        self.steepening.unwrap_or((1u64 << p) as f64)
    }

    /// `ε_{λ,L} = (h_L/h_l)·ε_max`, further divided by `sup_{V²_λ} p` in
    /// weighted mode (infinite where the density vanishes).
    pub fn local_threshold(&self, cfg: &GridConfig, c: CellIndex) -> f64 {
        let ratio = 0.5f64.powi(cfg.max_level as i32 - c.level as i32);
        let base = ratio * self.eps_max;
        match (self.mode, &self.distribution) {
            (ThresholdMode::Weighted, Some(d)) => {
                let r = cfg.cell_geometry(c);
                let s = d.cell_sup_norm(r.xi0, r.xi1);
                if s > 0.0 {
                    base / s
                } else {
                    f64::INFINITY
                }
            }
            _ => base,
        }
    }
}

/// `max |d| · ‖ψ‖_{L²(V)} / √|V|` with `‖ψ‖_{L²(V)} = 1`.
pub fn detail_norm(detail: &[f64], area: f64) -> f64 {
    let psi_norm = 1.0;
    detail.iter().fold(0.0f64, |m, d| m.max(d.abs())) * psi_norm / area.sqrt()
}

/// Level-0 scaling blocks plus one detail block per refined cell.
#[derive(Debug, Clone)]
pub struct MultiscaleState {
    ncomp: usize,
    p: usize,
    coarse: Vec<f64>,
    tree: DetailTree,
    detail_index: FxHashMap<CellIndex, usize>,
    details: Vec<f64>,
}

impl MultiscaleState {
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn tree(&self) -> &DetailTree {
        &self.tree
    }

    /// Level-0 blocks ordered by [`GridConfig::coarse_position`].
    pub fn coarse(&self) -> &[f64] {
        &self.coarse
    }

    fn detail_len(&self) -> usize {
        3 * self.ncomp * self.p * self.p
    }

    /// Detail block of a refined cell; `None` for cells without stored
    /// details (treated as zero).
    pub fn detail(&self, c: CellIndex) -> Option<&[f64]> {
        let dl = self.detail_len();
        self.detail_index.get(&c).map(|&i| &self.details[i * dl..(i + 1) * dl])
    }

    pub fn detail_mut(&mut self, c: CellIndex) -> Option<&mut [f64]> {
        let dl = self.detail_len();
        self.detail_index.get(&c).map(|&i| &mut self.details[i * dl..(i + 1) * dl])
    }

    pub fn detail_norm_of(&self, cfg: &GridConfig, c: CellIndex) -> f64 {
        self.detail(c).map_or(0.0, |d| detail_norm(d, nominal_area(cfg, c.level)))
    }

    /// Sum of squares of all coefficients.
    pub fn norm_squared(&self) -> f64 {
        let mut s: f64 = self.coarse.iter().map(|v| v * v).sum();
        for &i in self.detail_index.values() {
            let dl = self.detail_len();
            s += self.details[i * dl..(i + 1) * dl].iter().map(|v| v * v).sum::<f64>();
        }
        s
    }

    /// Copy of `self` carried by `tree`, keeping details on cells of both trees.
    fn with_tree(&self, tree: DetailTree) -> MultiscaleState {
        let dl = self.detail_len();
        let mut cells: Vec<CellIndex> = tree.iter().filter(|c| self.detail_index.contains_key(c)).copied().collect();
        cells.sort_unstable();
        let mut details = Vec::with_capacity(cells.len() * dl);
        let mut detail_index = FxHashMap::default();
        detail_index.reserve(cells.len());
        for (k, c) in cells.iter().enumerate() {
            details.extend_from_slice(self.detail(*c).expect("present"));
            detail_index.insert(*c, k);
        }
        MultiscaleState { ncomp: self.ncomp, p: self.p, coarse: self.coarse.clone(), tree, detail_index, details }
    }
}

fn cells_by_level(tree: &DetailTree) -> Vec<Vec<CellIndex>> {
    let max = tree.max_level().map_or(0, |l| l as usize + 1);
    let mut out = vec![Vec::new(); max];
    for c in tree.iter() {
        out[c.level as usize].push(*c);
    }
    for v in &mut out {
        v.sort_unstable();
    }
    out
}

/// Bottom-up two-scale decomposition of a leaf field.
pub fn forward_transform(cfg: &GridConfig, basis: &DgBasis, field: &LeafField) -> Result<MultiscaleState> {
    let ncomp = field.ncomp();
    let p = field.order();
    if p != basis.order() {
        return Err(Error::LeafMismatch(format!("field order {p} but basis order {}", basis.order())));
    }
    let bl = basis.block_len(ncomp);
    let dl = basis.detail_len(ncomp);
    let tree = field.tree().clone();

    let mut store: Vec<f64> = field.coefficients().to_vec();
    let mut index: FxHashMap<CellIndex, usize> = FxHashMap::default();
    index.reserve(field.len() + tree.len());
    for (i, &c) in field.leaves().iter().enumerate() {
        index.insert(c, i);
    }

    let levels = cells_by_level(&tree);
    let mut detail_cells = Vec::with_capacity(tree.len());
    let mut details = Vec::with_capacity(tree.len() * dl);
    for cells in levels.iter().rev() {
        let mut parents = vec![0.0; cells.len() * bl];
        let mut dets = vec![0.0; cells.len() * dl];
        let lookup = |c: CellIndex| -> Result<&[f64]> {
            let i = *index.get(&c).ok_or_else(|| Error::LeafMismatch(format!("no coefficients for {c:?}")))?;
            Ok(&store[i * bl..(i + 1) * bl])
        };
        parents.par_chunks_mut(bl).zip(dets.par_chunks_mut(dl)).zip(cells.par_iter()).try_for_each(
            |((pb, db), &c)| -> Result<()> {
                let k = c.children();
                let ch = [lookup(k[0])?, lookup(k[1])?, lookup(k[2])?, lookup(k[3])?];
                basis.restrict(ncomp, ch, pb, db);
                Ok(())
            },
        )?;
        let base = store.len() / bl;
        store.extend_from_slice(&parents);
        for (k, &c) in cells.iter().enumerate() {
            index.insert(c, base + k);
        }
        detail_cells.extend_from_slice(cells);
        details.extend_from_slice(&dets);
    }

    let mut coarse = Vec::with_capacity(cfg.n0_x as usize * cfg.n0_xi as usize * bl);
    for c in cfg.coarse_cells() {
        let i = *index.get(&c).ok_or_else(|| Error::LeafMismatch(format!("coarse cell {c:?} missing")))?;
        coarse.extend_from_slice(&store[i * bl..(i + 1) * bl]);
    }
    let detail_index = detail_cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    Ok(MultiscaleState { ncomp, p, coarse, tree, detail_index, details })
}

/// Top-down reconstruction on the leaves of the state's tree. Refined cells
/// without stored details are reconstructed with zero details.
pub fn inverse_transform(cfg: &GridConfig, basis: &DgBasis, ms: &MultiscaleState) -> LeafField {
    let ncomp = ms.ncomp;
    let bl = basis.block_len(ncomp);
    let mut store: Vec<f64> = ms.coarse.clone();
    let mut index: FxHashMap<CellIndex, usize> = FxHashMap::default();
    index.reserve(ms.tree.len() * 5);
    for (k, c) in cfg.coarse_cells().enumerate() {
        index.insert(c, k);
    }
    for cells in cells_by_level(&ms.tree) {
        let mut kids = vec![0.0; cells.len() * 4 * bl];
        kids.par_chunks_mut(4 * bl).zip(cells.par_iter()).for_each(|(out, &c)| {
            let i = index[&c];
            let (a, rest) = out.split_at_mut(bl);
            let (b, rest) = rest.split_at_mut(bl);
            let (cc, d) = rest.split_at_mut(bl);
            basis.prolong(ncomp, &store[i * bl..(i + 1) * bl], ms.detail(c), [a, b, cc, d]);
        });
        let base = store.len() / bl;
        store.extend_from_slice(&kids);
        for (k, c) in cells.iter().enumerate() {
            for (j, child) in c.children().into_iter().enumerate() {
                index.insert(child, base + 4 * k + j);
            }
        }
    }
    let leaves = ms.tree.leaves(cfg);
    let mut coeffs = Vec::with_capacity(leaves.len() * bl);
    for c in &leaves {
        let i = index[c];
        coeffs.extend_from_slice(&store[i * bl..(i + 1) * bl]);
    }
    LeafField::from_parts(ms.tree.clone(), leaves, ncomp, ms.p, coeffs).expect("sizes match")
}

/// Cells of the state's tree whose detail exceeds the local threshold.
pub fn significant_cells(cfg: &GridConfig, ms: &MultiscaleState, policy: &ThresholdPolicy) -> Vec<CellIndex> {
    let mut cells: Vec<CellIndex> = ms.tree.iter().copied().collect();
    cells.sort_unstable();
    cells.into_par_iter().filter(|&c| ms.detail_norm_of(cfg, c) > policy.local_threshold(cfg, c)).collect()
}

/// Hard thresholding: the tree becomes the graded closure of the significant
/// cells and details outside it are dropped. Coarse blocks are kept.
pub fn threshold(cfg: &GridConfig, ms: &MultiscaleState, policy: &ThresholdPolicy) -> MultiscaleState {
    let tree = DetailTree::from_cells(significant_cells(cfg, ms, policy)).grade();
    ms.with_tree(tree)
}

/// Prediction of the refinement set for the next time step: significant cells
/// mark their same-level `x`-neighbours, and strongly significant cells mark
/// their children. Nothing propagates in `ξ`.
pub fn predict(
    cfg: &GridConfig,
    ms: &MultiscaleState,
    policy: &ThresholdPolicy,
    boundary: Boundary,
) -> MultiscaleState {
    let sig: Vec<(CellIndex, f64)> =
        significant_cells(cfg, ms, policy).into_iter().map(|c| (c, ms.detail_norm_of(cfg, c))).collect();
    ms.with_tree(predict_tree(cfg, &ms.tree, &sig, policy, ms.p, boundary))
}

/// [`predict`] from a tree and its significant cells with their detail norms.
pub fn predict_tree(
    cfg: &GridConfig,
    tree: &DetailTree,
    significant: &[(CellIndex, f64)],
    policy: &ThresholdPolicy,
    p: usize,
    boundary: Boundary,
) -> DetailTree {
    let steep = policy.steepening_factor(p);
    let mut tree = tree.clone();
    for &(c, norm) in significant {
        for n in cfg.spatial_neighbors(c, boundary) {
            tree.mark(n);
        }
        if c.level + 1 < cfg.max_level {
            for k in c.children() {
                if norm >= steep * policy.local_threshold(cfg, k) {
                    tree.mark(k);
                }
            }
        }
    }
    tree.grade_in_place();
    tree
}

/// Same leaf values as `inverse_transform(threshold(forward_transform(field)))`
/// without the inverse pass: every new leaf takes the scaling block computed on
/// the way up. Also returns the significant cells with their detail norms.
pub fn coarsen(
    cfg: &GridConfig,
    basis: &DgBasis,
    field: &LeafField,
    policy: &ThresholdPolicy,
) -> Result<(LeafField, Vec<(CellIndex, f64)>)> {
    let ncomp = field.ncomp();
    let p = field.order();
    if p != basis.order() {
        return Err(Error::LeafMismatch(format!("field order {p} but basis order {}", basis.order())));
    }
    let bl = basis.block_len(ncomp);
    let dl = basis.detail_len(ncomp);
    let mut store: Vec<f64> = field.coefficients().to_vec();
    let mut index: FxHashMap<CellIndex, usize> = FxHashMap::default();
    index.reserve(field.len() + field.tree().len());
    for (i, &c) in field.leaves().iter().enumerate() {
        index.insert(c, i);
    }
    let mut significant = Vec::new();
    for cells in cells_by_level(field.tree()).iter().rev() {
        let mut parents = vec![0.0; cells.len() * bl];
        let lookup = |c: CellIndex| -> Result<&[f64]> {
            let i = *index.get(&c).ok_or_else(|| Error::LeafMismatch(format!("no coefficients for {c:?}")))?;
            Ok(&store[i * bl..(i + 1) * bl])
        };
        let norms: Vec<Option<(CellIndex, f64)>> = parents
            .par_chunks_mut(bl)
            .zip(cells.par_iter())
            .map_init(
                || vec![0.0; dl],
                |d, (pb, &c)| -> Result<Option<(CellIndex, f64)>> {
                    let k = c.children();
                    let ch = [lookup(k[0])?, lookup(k[1])?, lookup(k[2])?, lookup(k[3])?];
                    basis.restrict(ncomp, ch, pb, d);
                    let norm = detail_norm(d, nominal_area(cfg, c.level));
                    Ok((norm > policy.local_threshold(cfg, c)).then_some((c, norm)))
                },
            )
            .collect::<Result<_>>()?;
        significant.extend(norms.into_iter().flatten());
        let base = store.len() / bl;
        store.extend_from_slice(&parents);
        for (k, &c) in cells.iter().enumerate() {
            index.insert(c, base + k);
        }
    }
    significant.sort_unstable_by_key(|e| e.0);
    let tree = DetailTree::from_cells(significant.iter().map(|e| e.0)).grade();
    let leaves = tree.leaves(cfg);
    let mut coeffs = Vec::with_capacity(leaves.len() * bl);
    for c in &leaves {
        let i = index[c];
        coeffs.extend_from_slice(&store[i * bl..(i + 1) * bl]);
    }
    let out = LeafField::from_parts(tree, leaves, ncomp, p, coeffs)?;
    Ok((out, significant))
}

/// The field on a finer tree `tree ⊇ field.tree()`. Leaves that were already
/// present keep their coefficients; new ones are prolonged with zero details.
pub fn refine_field(cfg: &GridConfig, basis: &DgBasis, field: &LeafField, tree: DetailTree) -> Result<LeafField> {
    if !field.tree().is_subset(&tree) {
        return Err(Error::LeafMismatch("refined tree does not contain the field's tree".into()));
    }
    let ncomp = field.ncomp();
    let bl = basis.block_len(ncomp);
    let split: Vec<(CellIndex, Vec<f64>)> = field
        .leaves()
        .par_iter()
        .enumerate()
        .filter(|(_, c)| tree.contains(c))
        .flat_map_iter(|(i, &c)| {
            let mut out = Vec::new();
            let mut stack = vec![(c, field.block(i).to_vec())];
            while let Some((d, b)) = stack.pop() {
                if tree.contains(&d) {
                    let mut kids = vec![0.0; 4 * bl];
                    {
                        let (k0, rest) = kids.split_at_mut(bl);
                        let (k1, rest) = rest.split_at_mut(bl);
                        let (k2, k3) = rest.split_at_mut(bl);
                        basis.prolong(ncomp, &b, None, [k0, k1, k2, k3]);
                    }
                    for (j, k) in d.children().into_iter().enumerate() {
                        stack.push((k, kids[j * bl..(j + 1) * bl].to_vec()));
                    }
                } else {
                    out.push((d, b));
                }
            }
            out
        })
        .collect();
    let new: FxHashMap<CellIndex, Vec<f64>> = split.into_iter().collect();
    let leaves = tree.leaves(cfg);
    let mut coeffs = Vec::with_capacity(leaves.len() * bl);
    for c in &leaves {
        match field.index_of(*c) {
            Some(i) => coeffs.extend_from_slice(field.block(i)),
            None => coeffs.extend_from_slice(
                new.get(c).ok_or_else(|| Error::LeafMismatch(format!("no coefficients for {c:?}")))?,
            ),
        }
    }
    LeafField::from_parts(tree, leaves, ncomp, field.order(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(p: usize) -> (GridConfig, DgBasis) {
        (GridConfig::unit(2, 2, 4).unwrap(), DgBasis::new(p).unwrap())
    }

    #[test]
    fn constant_field_has_zero_details() {
        let (cfg, basis) = setup(3);
        let f = LeafField::project(&cfg, &basis, DetailTree::full(&cfg.with_max_level(2)), 1, |_, _, o| o[0] = 2.5);
        let ms = forward_transform(&cfg, &basis, &f).unwrap();
        for c in ms.tree().iter() {
            assert!(ms.detail(*c).unwrap().iter().all(|d| d.abs() < 1e-13));
        }
        let area = nominal_area(&cfg, 0);
        for k in 0..4 {
            assert!((ms.coarse()[k * 9] - 2.5 * area.sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn one_level_matches_direct_projection() {
        let cfg = GridConfig::unit(1, 1, 1).unwrap();
        let basis = DgBasis::new(2).unwrap();
        let g = |x: f64, xi: f64, o: &mut [f64]| o[0] = (3.0 * x).sin() + x * xi * xi;
        let fine = LeafField::project(&cfg, &basis, DetailTree::full(&cfg), 1, g);
        let ms = forward_transform(&cfg, &basis, &fine).unwrap();
        // Parent scaling coefficients are the projection of the piecewise
        // polynomial fine field onto the parent cell.
        let rule = crate::quadrature::GaussRule::unit(4);
        let root = cfg.cell_geometry(CellIndex::new(0, 0, 0));
        for i1 in 0..2 {
            for i2 in 0..2 {
                let mut acc = 0.0;
                for cx in 0..2 {
                    for cy in 0..2 {
                        let (x0, y0) = (cx as f64 * 0.5, cy as f64 * 0.5);
                        for (x, wx) in rule.mapped(x0, x0 + 0.5) {
                            for (y, wy) in rule.mapped(y0, y0 + 0.5) {
                                let v = fine.evaluate(&cfg, &basis, x, y).unwrap()[0];
                                acc += wx * wy * v * basis.scaling().eval(i1, x) * basis.scaling().eval(i2, y)
                                    / root.area().sqrt();
                            }
                        }
                    }
                }
                assert!((ms.coarse()[i1 * 2 + i2] - acc).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn round_trip_and_isometry() {
        let (cfg, basis) = setup(3);
        let tree =
            DetailTree::from_cells([CellIndex::new(3, 5, 9), CellIndex::new(2, 0, 0), CellIndex::new(1, 3, 1)]).grade();
        let f = LeafField::project(&cfg, &basis, tree, 2, |x, xi, o| {
            o[0] = (5.0 * x).cos() * xi;
            o[1] = (x - 0.3).abs() + xi * xi * xi;
        });
        let ms = forward_transform(&cfg, &basis, &f).unwrap();
        let back = inverse_transform(&cfg, &basis, &ms);
        assert_eq!(back.leaves(), f.leaves());
        for (a, b) in back.coefficients().iter().zip(f.coefficients()) {
            assert!((a - b).abs() < 1e-12);
        }
        let n0: f64 = f.coefficients().iter().map(|v| v * v).sum();
        assert!((ms.norm_squared() - n0).abs() < 1e-12 * n0);
    }

    #[test]
    fn empty_tree_is_identity() {
        let (cfg, basis) = setup(2);
        let f = LeafField::project(&cfg, &basis, DetailTree::new(), 1, |x, xi, o| o[0] = x * xi);
        let back = inverse_transform(&cfg, &basis, &forward_transform(&cfg, &basis, &f).unwrap());
        assert_eq!(back.coefficients(), f.coefficients());
    }

    #[test]
    fn refining_without_details_reproduces_parent() {
        let (cfg, basis) = setup(3);
        let f = LeafField::project(&cfg, &basis, DetailTree::new(), 1, |x, xi, o| o[0] = 1.0 + x * xi - xi * xi);
        let ms = forward_transform(&cfg, &basis, &f).unwrap();
        let refined = ms.with_tree(DetailTree::from_cells([CellIndex::new(0, 1, 1)]));
        let fine = inverse_transform(&cfg, &basis, &refined);
        assert_eq!(fine.len(), 7);
        for &(x, xi) in &[(0.6, 0.6), (0.9, 0.55), (0.7, 0.99)] {
            let v = fine.evaluate(&cfg, &basis, x, xi).unwrap()[0];
            assert!((v - (1.0 + x * xi - xi * xi)).abs() < 1e-13);
        }
    }

    #[test]
    fn detail_norm_formula() {
        assert_eq!(detail_norm(&[0.0; 27], 0.5), 0.0);
        let mut d = [0.0; 27];
        d[4] = -0.3;
        assert!((detail_norm(&d, 0.25) - 0.6).abs() < 1e-15);
        let scaled: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
        assert!((detail_norm(&scaled, 0.25) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn local_thresholds() {
        let cfg = GridConfig::unit(8, 8, 4).unwrap();
        let u = ThresholdPolicy::fixed(ThresholdMode::Uniform, 1e-2, None);
        assert!((u.local_threshold(&cfg, CellIndex::new(3, 0, 0)) - 5e-3).abs() < 1e-18);
        let w1 = ThresholdPolicy::fixed(ThresholdMode::Weighted, 1e-2, Some(Distribution::uniform()));
        for c in [CellIndex::new(0, 1, 2), CellIndex::new(2, 7, 30)] {
            assert_eq!(w1.local_threshold(&cfg, c), u.local_threshold(&cfg, c));
        }
        let b = ThresholdPolicy::fixed(ThresholdMode::Weighted, 1e-2, Some(Distribution::beta(2.0, 5.0)));
        let c = CellIndex::new(0, 0, 7);
        let expected = 1e-2 / 16.0 / (30.0 * 0.875 * 0.125f64.powi(4));
        assert!((b.local_threshold(&cfg, c) - expected).abs() < 1e-12 * expected);
        let z = ThresholdPolicy::fixed(ThresholdMode::Weighted, 1e-2, Some(Distribution::Uniform { a: 0.0, b: 0.5 }));
        assert_eq!(z.local_threshold(&cfg, CellIndex::new(0, 0, 7)), f64::INFINITY);
    }

    #[test]
    fn threshold_extremes() {
        let (cfg, basis) = setup(2);
        let f = LeafField::project(&cfg, &basis, DetailTree::full(&cfg), 1, |x, xi, o| o[0] = (7.0 * x * xi).sin());
        let ms = forward_transform(&cfg, &basis, &f).unwrap();
        let huge = threshold(&cfg, &ms, &ThresholdPolicy::fixed(ThresholdMode::Uniform, 1e9, None));
        assert!(huge.tree().is_empty());
        let tiny = threshold(&cfg, &ms, &ThresholdPolicy::fixed(ThresholdMode::Uniform, 1e-300, None));
        assert_eq!(tiny.tree().len(), ms.tree().len());
    }

    #[test]
    fn prediction_marks_x_neighbours_only() {
        let cfg = GridConfig::unit(8, 8, 3).unwrap();
        let basis = DgBasis::new(1).unwrap();
        let mut f = LeafField::zeros(&cfg, DetailTree::from_cells([CellIndex::new(0, 3, 3)]), 1, 1);
        // Make the refined cell carry a detail: one child differs.
        let i = f.index_of(CellIndex::new(1, 7, 6)).unwrap();
        f.block_mut(i)[0] = 1.0;
        let ms = forward_transform(&cfg, &basis, &f).unwrap();
        let policy = ThresholdPolicy::fixed(ThresholdMode::Uniform, 1.0, None).with_no_steepening();
        let pred = predict(&cfg, &ms, &policy, Boundary::Periodic);
        assert_eq!(
            pred.tree().sorted(),
            vec![CellIndex::new(0, 2, 3), CellIndex::new(0, 3, 3), CellIndex::new(0, 4, 3)]
        );
        let steep = ThresholdPolicy::fixed(ThresholdMode::Uniform, 1e-4, None);
        let pred = predict(&cfg, &ms, &steep, Boundary::Periodic);
        assert!(pred.tree().contains(&CellIndex::new(1, 7, 6)));
        let empty = LeafField::zeros(&cfg, DetailTree::new(), 1, 1);
        let ms = forward_transform(&cfg, &basis, &empty).unwrap();
        assert!(predict(&cfg, &ms, &steep, Boundary::Periodic).tree().is_empty());
    }
}
