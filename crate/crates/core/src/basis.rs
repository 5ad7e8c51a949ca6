//! Orthonormal Legendre scaling functions, Alpert multiwavelets and the
//! two-scale masks connecting a cell with its children.
//!
//! All functions live on the reference interval `[0,1]`. On a physical cell
//! `V` the tensor basis is `φ_{i₁}(x̂) φ_{i₂}(ξ̂) / √|V|`, orthonormal in
//! `L²(V)`. Because the bases are affine invariant the masks are computed once
//! on the reference cell and reused on every level.
//!
//! Coefficient blocks are stored component-major: `block[c·p² + i₁·p + i₂]`
//! with `i₁` the degree in `x` and `i₂` the degree in `ξ`. Detail blocks hold
//! three `p×p` sub-blocks per component, for the wavelet types
//! `(1,0)`, `(0,1)` and `(1,1)` in that order.

use crate::error::{Error, Result};
use crate::grid::Rect;
use crate::quadrature::GaussRule;

/// Largest supported polynomial order `p` (degree `p-1`).
pub const MAX_ORDER: usize = 4;

/// Orthonormal shifted Legendre polynomial of degree `n` on `[0,1]`.
pub fn legendre(n: usize, x: f64) -> f64 {
    let t = 2.0 * x - 1.0;
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * t * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1 * ((2 * n + 1) as f64).sqrt()
}

/// Values `φ_0(x) … φ_{p-1}(x)`.
pub fn legendre_values(x: f64, out: &mut [f64]) {
    let t = 2.0 * x - 1.0;
    let (mut p0, mut p1) = (1.0, t);
    for (n, o) in out.iter_mut().enumerate() {
        let pn = match n {
            0 => 1.0,
            1 => t,
            _ => {
                let k = (n - 1) as f64;
                let p2 = ((2.0 * k + 1.0) * t * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        *o = pn * ((2 * n + 1) as f64).sqrt();
    }
}

/// Derivatives `φ_0'(x) … φ_{p-1}'(x)` with respect to the reference coordinate.
pub fn legendre_derivatives(x: f64, out: &mut [f64]) {
    let t = 2.0 * x - 1.0;
    let p = out.len();
    let mut pv = [0.0; MAX_ORDER + 2];
    let mut dv = [0.0; MAX_ORDER + 2];
    pv[0] = 1.0;
    if p > 1 {
        pv[1] = t;
        dv[1] = 1.0;
    }
    for n in 1..p.saturating_sub(1) {
        let k = n as f64;
        pv[n + 1] = ((2.0 * k + 1.0) * t * pv[n] - k * pv[n - 1]) / (k + 1.0);
        dv[n + 1] = dv[n - 1] + (2.0 * k + 1.0) * pv[n];
    }
    for (n, o) in out.iter_mut().enumerate() {
        *o = 2.0 * dv[n] * ((2 * n + 1) as f64).sqrt();
    }
}

/// Scaling functions `φ_0 … φ_{p-1}`: the shifted, `L²(0,1)`-normalised
/// Legendre polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingBasis1D {
    p: usize,
}

impl ScalingBasis1D {
    pub fn order(&self) -> usize {
        self.p
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        legendre(i, x)
    }

    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        let mut d = [0.0; MAX_ORDER];
        legendre_derivatives(x, &mut d[..=i]);
        d[i]
    }
}

pub fn build_scaling_basis(p: usize) -> Result<ScalingBasis1D> {
    if p == 0 || p > MAX_ORDER {
        return Err(Error::Config(format!("polynomial order p = {p} outside 1..={MAX_ORDER}")));
    }
    Ok(ScalingBasis1D { p })
}

/// Value of child basis function `k` (child `k / p`, degree `k % p`) at `x ∈ [0,1]`.
fn child_function(p: usize, k: usize, x: f64) -> f64 {
    let (child, j) = (k / p, k % p);
    let in_child = if child == 0 { x < 0.5 } else { x >= 0.5 };
    if in_child {
        std::f64::consts::SQRT_2 * legendre(j, 2.0 * x - child as f64)
    } else {
        0.0
    }
}

/// Coordinates of a function that is polynomial on each half of `[0,1]` with
/// respect to the orthonormal child basis.
fn child_coordinates(p: usize, rule: &GaussRule, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; 2 * p];
    for child in 0..2 {
        let a = 0.5 * child as f64;
        for j in 0..p {
            out[child * p + j] =
                rule.integrate(a, a + 0.5, |x| f(x) * std::f64::consts::SQRT_2 * legendre(j, 2.0 * x - child as f64));
        }
    }
    out
}

/// Multiwavelets `ψ_0 … ψ_{p-1}`, piecewise polynomial on the two halves of
/// `[0,1]`, stored through their coordinates in the child scaling basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet1D {
    p: usize,
    /// Row `i` holds the `2p` child coordinates of `ψ_i`.
    coeffs: Vec<f64>,
}

impl Wavelet1D {
    /// Wraps explicit child coordinates (`p` rows of length `2p`).
    pub fn from_child_coordinates(p: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 2 * p * p {
            return Err(Error::Config(format!("expected {} wavelet coordinates, got {}", 2 * p * p, coeffs.len())));
        }
        Ok(Wavelet1D { p, coeffs })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn child_coordinates(&self, i: usize) -> &[f64] {
        &self.coeffs[i * 2 * self.p..(i + 1) * 2 * self.p]
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        self.child_coordinates(i).iter().enumerate().map(|(k, &c)| c * child_function(self.p, k, x)).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Alpert construction: seeds `x^j·sign(x-½)` are orthogonalised against the
/// scaling functions and then among themselves (Gram–Schmidt, two passes).
/// Signs are fixed so the highest-degree right-child coordinate is positive.
pub fn build_wavelets(p: usize) -> Result<Wavelet1D> {
    let phi = build_scaling_basis(p)?;
    let rule = GaussRule::unit(2 * p);
    let scaling: Vec<Vec<f64>> = (0..p).map(|i| child_coordinates(p, &rule, |x| phi.eval(i, x))).collect();
    let mut wavelets: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut w = child_coordinates(p, &rule, |x| {
            let s = if x < 0.5 { -1.0 } else { 1.0 };
            s * x.powi(j as i32)
        });
        for _ in 0..2 {
            for v in scaling.iter().chain(wavelets.iter()) {
                let a = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= a * vi);
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm < 1e-10 {
            return Err(Error::NonOrthogonal(norm));
        }
        w.iter_mut().for_each(|wi| *wi /= norm);
        let lead = (p..2 * p).rev().map(|k| w[k]).find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        if lead < 0.0 {
            w.iter_mut().for_each(|wi| *wi = -*wi);
        }
        wavelets.push(w);
    }
    Wavelet1D::from_child_coordinates(p, wavelets.concat())
}

/// Orthogonal `2p × 2p` matrix mapping the two children's scaling
/// coordinates to the parent's `[scaling | wavelet]` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleMasks {
    p: usize,
    m: Vec<f64>,
}

impl TwoScaleMasks {
    pub fn order(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &[f64] {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.m[row * 2 * self.p + col]
    }

    /// Children `[left | right]` to parent `[scaling | wavelet]`.
    pub fn forward(&self, children: &[f64], parent: &mut [f64]) {
        let n = 2 * self.p;
        for r in 0..n {
            parent[r] = dot(&self.m[r * n..(r + 1) * n], children);
        }
    }

    pub fn inverse(&self, parent: &[f64], children: &mut [f64]) {
        let n = 2 * self.p;
        for k in 0..n {
            children[k] = (0..n).map(|r| self.m[r * n + k] * parent[r]).sum();
        }
    }

    /// Largest deviation of `M·Mᵀ` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = 2 * self.p;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let v = dot(&self.m[a * n..(a + 1) * n], &self.m[b * n..(b + 1) * n]);
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// Inner products of the parent scaling functions and wavelets with the
/// child scaling functions, by Gauss quadrature on each half.
pub fn build_masks(phi: &ScalingBasis1D, psi: &Wavelet1D) -> Result<TwoScaleMasks> {
    let p = phi.order();
    if psi.order() != p {
        return Err(Error::Config("scaling and wavelet orders differ".into()));
    }
    let rule = GaussRule::unit(2 * p);
    let mut m = Vec::with_capacity(4 * p * p);
    for i in 0..p {
        m.extend(child_coordinates(p, &rule, |x| phi.eval(i, x)));
    }
    for i in 0..p {
        m.extend(child_coordinates(p, &rule, |x| psi.eval(i, x)));
    }
    let masks = TwoScaleMasks { p, m };
    let defect = masks.orthogonality_defect();
    if defect > 1e-12 {
        return Err(Error::NonOrthogonal(defect));
    }
    Ok(masks)
}

/// Tensor-product DG basis with its two-scale transform.
#[derive(Debug, Clone)]
pub struct DgBasis {
    p: usize,
    scaling: ScalingBasis1D,
    wavelets: Wavelet1D,
    masks: TwoScaleMasks,
    mask: Mask,
    projection_rule: GaussRule,
}

const MAXN: usize = 2 * MAX_ORDER;
type Mask = [[f64; MAXN]; MAXN];

/// `B = M·A·Mᵀ` where `A` holds the children as `[[c0, c2], [c1, c3]]` with `x`
/// along rows; `B` splits into scaling, (1,0), (0,1) and (1,1) quadrants.
fn restrict_p<const P: usize>(m: &Mask, ncomp: usize, children: [&[f64]; 4], parent: &mut [f64], detail: &mut [f64]) {
    let n = 2 * P;
    let pp = P * P;
    for c in 0..ncomp {
        let mut a = [[0.0; MAXN]; MAXN];
        for (k, child) in children.iter().enumerate() {
            let (cx, cxi) = (k & 1, k >> 1);
            let src = &child[c * pp..(c + 1) * pp];
            for j1 in 0..P {
                for j2 in 0..P {
                    a[cx * P + j1][cxi * P + j2] = src[j1 * P + j2];
                }
            }
        }
        let mut t = [[0.0; MAXN]; MAXN];
        for r in 0..n {
            for k in 0..n {
                let mrk = m[r][k];
                for col in 0..n {
                    t[r][col] += mrk * a[k][col];
                }
            }
        }
        let mut b = [[0.0; MAXN]; MAXN];
        for r in 0..n {
            for s in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += t[r][k] * m[s][k];
                }
                b[r][s] = v;
            }
        }
        let dst_p = &mut parent[c * pp..(c + 1) * pp];
        let dst_d = &mut detail[c * 3 * pp..(c + 1) * 3 * pp];
        for i1 in 0..P {
            for i2 in 0..P {
                dst_p[i1 * P + i2] = b[i1][i2];
                dst_d[i1 * P + i2] = b[P + i1][i2];
                dst_d[pp + i1 * P + i2] = b[i1][P + i2];
                dst_d[2 * pp + i1 * P + i2] = b[P + i1][P + i2];
            }
        }
    }
}

fn prolong_p<const P: usize>(
    m: &Mask,
    ncomp: usize,
    parent: &[f64],
    detail: Option<&[f64]>,
    children: [&mut [f64]; 4],
) {
    let n = 2 * P;
    let pp = P * P;
    let out = children;
    // Rows of B that can be nonzero.
    let rows = if detail.is_some() { n } else { P };
    for c in 0..ncomp {
        let mut b = [[0.0; MAXN]; MAXN];
        let src_p = &parent[c * pp..(c + 1) * pp];
        for i1 in 0..P {
            for i2 in 0..P {
                b[i1][i2] = src_p[i1 * P + i2];
            }
        }
        if let Some(d) = detail {
            let d = &d[c * 3 * pp..(c + 1) * 3 * pp];
            for i1 in 0..P {
                for i2 in 0..P {
                    b[P + i1][i2] = d[i1 * P + i2];
                    b[i1][P + i2] = d[pp + i1 * P + i2];
                    b[P + i1][P + i2] = d[2 * pp + i1 * P + i2];
                }
            }
        }
        // t = Mᵀ B
        let mut t = [[0.0; MAXN]; MAXN];
        for r in 0..rows {
            for k in 0..n {
                let mrk = m[r][k];
                for s in 0..n {
                    t[k][s] += mrk * b[r][s];
                }
            }
        }
        // A = T M
        for k in 0..n {
            let (cx, j1) = (k / P, k % P);
            for l in 0..n {
                let mut v = 0.0;
                for s in 0..n {
                    v += t[k][s] * m[s][l];
                }
                let (cxi, j2) = (l / P, l % P);
                out[cx + 2 * cxi][c * pp + j1 * P + j2] = v;
            }
        }
    }
}

impl DgBasis {
    pub fn new(p: usize) -> Result<Self> {
        let scaling = build_scaling_basis(p)?;
        let wavelets = build_wavelets(p)?;
        let masks = build_masks(&scaling, &wavelets)?;
        let n = 2 * p;
        let mut mask = [[0.0; MAXN]; MAXN];
        for (r, row) in mask.iter_mut().enumerate().take(n) {
            for (col, v) in row.iter_mut().enumerate().take(n) {
                *v = masks.entry(r, col);
            }
        }
        Ok(DgBasis { p, scaling, wavelets, masks, mask, projection_rule: GaussRule::unit(p + 2) })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// Number of tensor scaling functions, `p²`.
    pub fn n_modes(&self) -> usize {
        self.p * self.p
    }

    pub fn scaling(&self) -> &ScalingBasis1D {
        &self.scaling
    }

    pub fn wavelets(&self) -> &Wavelet1D {
        &self.wavelets
    }

    pub fn masks(&self) -> &TwoScaleMasks {
        &self.masks
    }

    pub fn block_len(&self, ncomp: usize) -> usize {
        ncomp * self.p * self.p
    }

    pub fn detail_len(&self, ncomp: usize) -> usize {
        3 * ncomp * self.p * self.p
    }

    /// Four child scaling blocks (ordered as [`crate::grid::CellIndex::children`])
    /// to the parent scaling block plus its detail block.
    pub fn restrict(&self, ncomp: usize, children: [&[f64]; 4], parent: &mut [f64], detail: &mut [f64]) {
        match self.p {
            1 => restrict_p::<1>(&self.mask, ncomp, children, parent, detail),
            2 => restrict_p::<2>(&self.mask, ncomp, children, parent, detail),
            3 => restrict_p::<3>(&self.mask, ncomp, children, parent, detail),
            _ => restrict_p::<4>(&self.mask, ncomp, children, parent, detail),
        }
    }

    /// Inverse of [`DgBasis::restrict`].
    pub fn prolong(&self, ncomp: usize, parent: &[f64], detail: Option<&[f64]>, children: [&mut [f64]; 4]) {
        match self.p {
            1 => prolong_p::<1>(&self.mask, ncomp, parent, detail, children),
            2 => prolong_p::<2>(&self.mask, ncomp, parent, detail, children),
            3 => prolong_p::<3>(&self.mask, ncomp, parent, detail, children),
            _ => prolong_p::<4>(&self.mask, ncomp, parent, detail, children),
        }
    }

    /// Value of every component at a physical point inside `cell`.
    pub fn evaluate(&self, block: &[f64], ncomp: usize, x: f64, xi: f64, cell: &Rect) -> Result<Vec<f64>> {
        if !cell.contains(x, xi) {
            return Err(Error::PointOutsideCell { x, xi, x0: cell.x0, x1: cell.x1, xi0: cell.xi0, xi1: cell.xi1 });
        }
        let (xr, yr) = cell.to_reference(x, xi);
        let mut out = vec![0.0; ncomp];
        self.evaluate_reference(block, xr, yr, cell.area(), &mut out);
        Ok(out)
    }

    /// Evaluation at reference coordinates, no bounds check.
    pub fn evaluate_reference(&self, block: &[f64], xr: f64, yr: f64, area: f64, out: &mut [f64]) {
        let p = self.p;
        let mut fx = [0.0; MAX_ORDER];
        let mut fy = [0.0; MAX_ORDER];
        legendre_values(xr, &mut fx[..p]);
        legendre_values(yr, &mut fy[..p]);
        let scale = 1.0 / area.sqrt();
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
            *o = v * scale;
        }
    }

    /// `L²(V)` projection of `f` onto the cell's tensor polynomials.
    pub fn project(&self, ncomp: usize, cell: &Rect, f: impl Fn(f64, f64, &mut [f64])) -> Vec<f64> {
        let mut block = vec![0.0; self.block_len(ncomp)];
        self.project_into(ncomp, cell, &self.projection_rule, f, &mut block);
        block
    }

    pub fn project_into(
        &self,
        ncomp: usize,
        cell: &Rect,
        rule: &GaussRule,
        f: impl Fn(f64, f64, &mut [f64]),
        block: &mut [f64],
    ) {
        let p = self.p;
        block.iter_mut().for_each(|b| *b = 0.0);
        let mut val = [0.0; 8];
        let mut fx = [0.0; MAX_ORDER];
        let mut fy = [0.0; MAX_ORDER];
        let sq = cell.area().sqrt();
        for (&qx, &wx) in rule.nodes.iter().zip(&rule.weights) {
            legendre_values(qx, &mut fx[..p]);
            let x = cell.x0 + qx * cell.hx();
            for (&qy, &wy) in rule.nodes.iter().zip(&rule.weights) {
                legendre_values(qy, &mut fy[..p]);
                let xi = cell.xi0 + qy * cell.hxi();
                f(x, xi, &mut val[..ncomp]);
                let w = wx * wy * sq;
                for c in 0..ncomp {
                    let b = &mut block[c * p * p..(c + 1) * p * p];
                    for i1 in 0..p {
                        for i2 in 0..p {
                            b[i1 * p + i2] += w * val[c] * fx[i1] * fy[i2];
                        }
                    }
                }
            }
        }
    }
}
