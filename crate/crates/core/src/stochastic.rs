//! Probability densities for the random parameter and post-processing of
//! stochastic moments from an adaptive solution.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use crate::basis::{legendre_values, MAX_ORDER};
use crate::error::{Error, Result};
use crate::field::{nominal_area, LeafField};
use crate::grid::{CellIndex, GridConfig};
use crate::quadrature::GaussRule;

/// Gauss points per stochastic leaf used for moment integrals.
pub const MOMENT_QUADRATURE_POINTS: usize = 10;

/// Density of the random parameter on `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Uniform {
        a: f64,
        b: f64,
    },
    /// Clipped to `[0,1]` without renormalisation.
    Normal {
        mu: f64,
        sigma: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
}

impl Distribution {
    pub fn uniform() -> Self {
        Distribution::Uniform { a: 0.0, b: 1.0 }
    }

    pub fn normal(mu: f64, sigma: f64) -> Self {
        Distribution::Normal { mu, sigma }
    }

    pub fn beta(alpha: f64, beta: f64) -> Self {
        Distribution::Beta { alpha, beta }
    }

    /// `U(0,1)`, `N(0.5,0.15)`, `B(2,5)`, `B(2,20)`.
    pub fn standard_set() -> [Distribution; 4] {
        [Self::uniform(), Self::normal(0.5, 0.15), Self::beta(2.0, 5.0), Self::beta(2.0, 20.0)]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Uniform { a, b } => b > a && a >= 0.0 && b <= 1.0,
            Distribution::Normal { sigma, mu } => sigma > 0.0 && mu.is_finite(),
            Distribution::Beta { alpha, beta } => alpha >= 1.0 && beta >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid distribution {self}")))
        }
    }

    /// File-name friendly label, e.g. `beta_2_5`.
    pub fn label(&self) -> String {
        match *self {
            Distribution::Uniform { a, b } if a == 0.0 && b == 1.0 => "uniform".into(),
            Distribution::Uniform { a, b } => format!("uniform_{a}_{b}"),
            Distribution::Normal { mu, sigma } => format!("normal_{mu}_{sigma}"),
            Distribution::Beta { alpha, beta } => format!("beta_{alpha}_{beta}"),
        }
    }

    pub fn pdf(&self, xi: f64) -> f64 {
        if !(0.0..=1.0).contains(&xi) {
            return 0.0;
        }
        match *self {
            Distribution::Uniform { a, b } => {
                if xi >= a && xi <= b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Distribution::Normal { mu, sigma } => {
                let z = (xi - mu) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Distribution::Beta { alpha, beta } => {
                let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
                let v = xi.powf(alpha - 1.0) * (1.0 - xi).powf(beta - 1.0);
                v * (-ln_b).exp()
            }
        }
    }

    /// Location of the density maximum, when it is a single point.
    pub fn mode(&self) -> Option<f64> {
        match *self {
            Distribution::Uniform { .. } => None,
            Distribution::Normal { mu, .. } => Some(mu),
            Distribution::Beta { alpha, beta } if alpha + beta > 2.0 => Some((alpha - 1.0) / (alpha + beta - 2.0)),
            Distribution::Beta { .. } => None,
        }
    }

    /// `sup p` over `[xi0, xi1]`, exact for these unimodal densities.
    pub fn cell_sup_norm(&self, xi0: f64, xi1: f64) -> f64 {
        if let Distribution::Uniform { a, b } = *self {
            return if xi1 >= a && xi0 <= b { 1.0 / (b - a) } else { 0.0 };
        }
        let mut s = self.pdf(xi0).max(self.pdf(xi1));
        if let Some(m) = self.mode() {
            if m > xi0 && m < xi1 {
                s = s.max(self.pdf(m));
            }
        }
        s
    }

    /// `‖p‖_∞` on `[0,1]`.
    pub fn sup(&self) -> f64 {
        self.cell_sup_norm(0.0, 1.0)
    }

    /// `∫_a^b p dξ` by composite Gauss quadrature.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let rule = GaussRule::unit(MOMENT_QUADRATURE_POINTS);
        let n = 64;
        let h = (b - a) / n as f64;
        (0..n)
            .map(|k| {
                let x0 = a + k as f64 * h;
                rule.integrate(x0, x0 + h, |x| self.pdf(x))
            })
            .sum()
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Distribution::Uniform { a, b } => write!(f, "U({a},{b})"),
            Distribution::Normal { mu, sigma } => write!(f, "N({mu},{sigma})"),
            Distribution::Beta { alpha, beta } => write!(f, "B({alpha},{beta})"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// Accepts `uniform`, `normal`, `beta25`, `beta220` and the explicit forms
    /// `U(a,b)`, `N(mu,sigma)`, `B(alpha,beta)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let d = match t.as_str() {
            "uniform" | "u" => Self::uniform(),
            "normal" | "n" => Self::normal(0.5, 0.15),
            "beta25" | "beta_2_5" => Self::beta(2.0, 5.0),
            "beta220" | "beta_2_20" => Self::beta(2.0, 20.0),
            _ => {
                let bad = || Error::Config(format!("unknown distribution '{s}'"));
                let open = t.find('(').ok_or_else(bad)?;
                if !t.ends_with(')') {
                    return Err(bad());
                }
                let args: Vec<f64> = t[open + 1..t.len() - 1]
                    .split(',')
                    .map(|a| a.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad())?;
                if args.len() != 2 {
                    return Err(bad());
                }
                match &t[..open] {
                    "u" | "uniform" => Distribution::Uniform { a: args[0], b: args[1] },
                    "n" | "normal" => Self::normal(args[0], args[1]),
                    "b" | "beta" => Self::beta(args[0], args[1]),
                    _ => return Err(bad()),
                }
            }
        };
        d.validate()?;
        Ok(d)
    }
}

/// Expectation and variance sampled at points `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl MomentField {
    pub fn std_dev(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// CSV with header `x,mean,variance,mean_minus_std,mean_plus_std`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,mean,variance,mean_minus_std,mean_plus_std")?;
        for (i, s) in self.std_dev().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.x[i],
                self.mean[i],
                self.variance[i],
                self.mean[i] - s,
                self.mean[i] + s
            )?;
        }
        Ok(())
    }
}

/// Leaves whose `x`-extent contains `x`, in no particular order.
pub fn column_leaves(cfg: &GridConfig, field: &LeafField, x: f64) -> Vec<CellIndex> {
    let tree = field.tree();
    let fx = (x - cfg.x_interval.0) / (cfg.x_interval.1 - cfg.x_interval.0);
    let ix_at = |l: u8| ((fx * cfg.nx(l) as f64).floor().max(0.0) as u32).min(cfg.nx(l) - 1);
    let mut out = Vec::new();
    let mut stack: Vec<CellIndex> = (0..cfg.n0_xi).map(|j| CellIndex::new(0, ix_at(0), j)).collect();
    while let Some(c) = stack.pop() {
        if tree.contains(&c) {
            let ix = ix_at(c.level + 1).clamp(2 * c.ix, 2 * c.ix + 1);
            stack.push(CellIndex::new(c.level + 1, ix, 2 * c.ixi));
            stack.push(CellIndex::new(c.level + 1, ix, 2 * c.ixi + 1));
        } else {
            out.push(c);
        }
    }
    out
}

/// Per-point quadrature data of one `x`-column: `(weight·p(ξ), value)` for
/// every Gauss point of every stochastic leaf.
fn column_samples(
    cfg: &GridConfig,
    field: &LeafField,
    dist: &Distribution,
    rule: &GaussRule,
    x: f64,
    quantity: &dyn Fn(&[f64]) -> f64,
) -> Result<Vec<(f64, f64)>> {
    if x < cfg.x_interval.0 || x > cfg.x_interval.1 {
        return Err(Error::NotCovering { x, covered: 0.0 });
    }
    let mut leaves = column_leaves(cfg, field, x);
    leaves.sort_unstable_by_key(|c| (c.ixi << (cfg.max_level - c.level), c.level));
    let p = field.order();
    let ncomp = field.ncomp();
    let mut fy = vec![[0.0; MAX_ORDER]; rule.len()];
    for (q, &t) in rule.nodes.iter().enumerate() {
        legendre_values(t, &mut fy[q][..p]);
    }
    let mut covered = 0.0;
    let mut out = Vec::with_capacity(leaves.len() * rule.len());
    let mut u = vec![0.0; ncomp];
    for c in leaves {
        let i = field.index_of(c).ok_or_else(|| Error::LeafMismatch(format!("{c:?} is not a leaf")))?;
        let r = cfg.cell_geometry(c);
        covered += r.hxi();
        let mut fx = [0.0; MAX_ORDER];
        legendre_values((x - r.x0) / r.hx(), &mut fx[..p]);
        let scale = 1.0 / nominal_area(cfg, c.level).sqrt();
        let block = field.block(i);
        for (q, (&t, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let xi = r.xi0 + t * r.hxi();
            for (k, uk) in u.iter_mut().enumerate() {
                let b = &block[k * p * p..(k + 1) * p * p];
                let mut v = 0.0;
                for i1 in 0..p {
                    let mut row = 0.0;
                    for i2 in 0..p {
                        row += b[i1 * p + i2] * fy[q][i2];
                    }
                    v += fx[i1] * row;
                }
                *uk = v * scale;
            }
            out.push((w * r.hxi() * dist.pdf(xi), quantity(&u)));
        }
    }
    let len = cfg.xi_interval.1 - cfg.xi_interval.0;
    if (covered - len).abs() > 1e-12 * len.max(1.0) {
        return Err(Error::NotCovering { x, covered });
    }
    Ok(out)
}

/// Expectation and variance of component `comp` at each sample point.
pub fn compute_moments(
    cfg: &GridConfig,
    field: &LeafField,
    dist: &Distribution,
    comp: usize,
    x_samples: &[f64],
) -> Result<MomentField> {
    compute_moments_of(cfg, field, dist, x_samples, &|u: &[f64]| u[comp])
}

/// Moments of a pointwise functional `g(u)` of the state.
pub fn compute_moments_of(
    cfg: &GridConfig,
    field: &LeafField,
    dist: &Distribution,
    x_samples: &[f64],
    quantity: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<MomentField> {
    use rayon::prelude::*;
    let rule = GaussRule::unit(MOMENT_QUADRATURE_POINTS);
    let per_x: Vec<(f64, f64)> = x_samples
        .par_iter()
        .map(|&x| {
            let s = column_samples(cfg, field, dist, &rule, x, quantity)?;
            let mean: f64 = s.iter().map(|(w, v)| w * v).sum();
            let var: f64 = s.iter().map(|(w, v)| w * (v - mean) * (v - mean)).sum();
            Ok((mean, var))
        })
        .collect::<Result<_>>()?;
    Ok(MomentField {
        x: x_samples.to_vec(),
        mean: per_x.iter().map(|m| m.0).collect(),
        variance: per_x.iter().map(|m| m.1).collect(),
    })
}

/// One inequality `lhs ≤ rhs` evaluated numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-14
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StabilityReport {
    pub checks: Vec<InequalityCheck>,
}

impl StabilityReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(InequalityCheck::holds)
    }

    pub fn failures(&self) -> Vec<&InequalityCheck> {
        self.checks.iter().filter(|c| !c.holds()).collect()
    }

    fn push(&mut self, name: &str, lhs: f64, rhs: f64) {
        self.checks.push(InequalityCheck { name: name.to_string(), lhs, rhs });
    }
}

/// Both fields sampled on a common tensor Gauss raster over the finest grid.
struct PairedSamples {
    /// Per `x` point: its weight and `(ξ weight, p(ξ), u, v)` per `ξ` point.
    columns: Vec<(f64, Vec<[f64; 4]>)>,
}

impl PairedSamples {
    fn new(cfg: &GridConfig, u: &LeafField, v: &LeafField, dist: &Distribution, points: usize) -> Self {
        let rule = GaussRule::unit(points);
        let nx = cfg.nx(cfg.max_level);
        let nxi = cfg.nxi(cfg.max_level);
        let hx = cfg.h_x(cfg.max_level);
        let hy = cfg.h_xi(cfg.max_level);
        let mut columns = Vec::with_capacity(nx as usize * points);
        let mut a = [0.0; 1];
        let mut b = [0.0; 1];
        for i in 0..nx {
            for (&tx, &wx) in rule.nodes.iter().zip(&rule.weights) {
                let x = cfg.x_interval.0 + (i as f64 + tx) * hx;
                let mut col = Vec::with_capacity(nxi as usize * points);
                for j in 0..nxi {
                    for (&ty, &wy) in rule.nodes.iter().zip(&rule.weights) {
                        let xi = cfg.xi_interval.0 + (j as f64 + ty) * hy;
                        u.evaluate_into(cfg, x, xi, &mut a);
                        v.evaluate_into(cfg, x, xi, &mut b);
                        col.push([wy * hy, dist.pdf(xi), a[0], b[0]]);
                    }
                }
                columns.push((wx * hx, col));
            }
        }
        PairedSamples { columns }
    }

    /// `∫_{Ω₁} g(column) dx`.
    fn integrate_x(&self, g: impl Fn(&[[f64; 4]]) -> f64) -> f64 {
        self.columns.iter().map(|(w, c)| w * g(c)).sum()
    }

    fn sup_x(&self, g: impl Fn(&[[f64; 4]]) -> f64) -> f64 {
        self.columns.iter().map(|(_, c)| g(c)).fold(0.0, f64::max)
    }

    /// `∫_Ω g(u, v) dΩ`.
    fn integrate(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.integrate_x(|c| c.iter().map(|s| s[0] * g(s[2], s[3])).sum())
    }

    fn expect(c: &[[f64; 4]], g: impl Fn(f64, f64) -> f64) -> f64 {
        c.iter().map(|s| s[0] * s[1] * g(s[2], s[3])).sum()
    }
}

/// `‖E[u] − E[v]‖_{L¹(Ω₁)}` on a tensor Gauss raster over the finest grid.
pub fn expectation_l1_distance(cfg: &GridConfig, u: &LeafField, v: &LeafField, dist: &Distribution) -> f64 {
    let s = PairedSamples::new(cfg, u, v, dist, 4);
    s.integrate_x(|c| PairedSamples::expect(c, |a, b| a - b).abs())
}

/// `‖E[|u − v|]‖_{L¹(Ω₁)}`.
pub fn expected_abs_difference(cfg: &GridConfig, u: &LeafField, v: &LeafField, dist: &Distribution) -> f64 {
    let s = PairedSamples::new(cfg, u, v, dist, 4);
    s.integrate_x(|c| PairedSamples::expect(c, |a, b| (a - b).abs()))
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `c_k(u,v) = Σ_j C(k,j)(2k−j) M^{2k−j−1}`.
pub fn moment_constant(k: u32, m: f64) -> f64 {
    (0..=k).map(|j| binomial(k, j) * (2 * k - j) as f64 * m.powi((2 * k - j - 1) as i32)).sum()
}

/// Evaluates, for `k ∈ {1,2}` and `q = 1` (and `q = ∞` where stated), the
/// stability estimates relating moments of `u` and `v` to their difference.
/// Scalar fields only.
pub fn moment_stability_check(cfg: &GridConfig, u: &LeafField, v: &LeafField, dist: &Distribution) -> StabilityReport {
    let s = PairedSamples::new(cfg, u, v, dist, 4);
    let pinf = dist.sup();
    let mut r = StabilityReport::default();

    let sup_u = s.sup_x(|c| c.iter().map(|z| z[2].abs()).fold(0.0, f64::max));
    let sup_v = s.sup_x(|c| c.iter().map(|z| z[3].abs()).fold(0.0, f64::max));
    let m = sup_u.max(sup_v);

    let e = |c: &[[f64; 4]], first: bool| PairedSamples::expect(c, |a, b| if first { a } else { b });
    let var = |c: &[[f64; 4]], first: bool| {
        let mu = e(c, first);
        PairedSamples::expect(c, |a, b| {
            let w = if first { a } else { b } - mu;
            w * w
        })
    };
    let e_abs_diff = s.integrate_x(|c| PairedSamples::expect(c, |a, b| (a - b).abs()));

    for k in 1..=2i32 {
        // Estimates for the expectation of powers and powers of the expectation.
        let lhs = s.integrate_x(|c| PairedSamples::expect(c, |a, _| a.powi(k)).abs());
        let uk_l1 = s.integrate(|a, _| a.powi(k).abs());
        r.push(&format!("E[u^{k}] L1 <= sup p * ||u^{k}||_L1"), lhs, pinf * uk_l1);
        let mid = s.integrate_x(|c| PairedSamples::expect(c, |a, _| a.powi(k).abs()));
        r.push(&format!("E[u^{k}] L1 <= E[||u^{k}||_L1]"), lhs, mid);
        let u_lk = s.integrate(|a, _| a.abs().powi(k));
        r.push(&format!("E[||u^{k}||_L1] <= sup p * ||u||_Lk^k"), mid, pinf * u_lk);
        let lhs_inf = s.sup_x(|c| PairedSamples::expect(c, |a, _| a.powi(k)).abs());
        r.push(&format!("E[u^{k}] Linf <= ||u||_inf^{k}"), lhs_inf, sup_u.powi(k));
        let ek = s.integrate_x(|c| e(c, true).powi(k).abs());
        r.push(&format!("E^{k}[u] L1 <= sup p^{k} * ||u^{k}||_L1"), ek, pinf.powi(k) * uk_l1);
        let ek_inf = s.sup_x(|c| e(c, true).powi(k).abs());
        r.push(&format!("E^{k}[u] Linf <= ||u||_inf^{k}"), ek_inf, sup_u.powi(k));

        // Differences of moments.
        let kf = k as f64;
        let d1 = s.integrate_x(|c| PairedSamples::expect(c, |a, b| a.powi(k) - b.powi(k)).abs());
        r.push(&format!("E[u^{k}]-E[v^{k}] L1 <= k M^(k-1) E|u-v|"), d1, kf * m.powi(k - 1) * e_abs_diff);
        let d2 = s.integrate_x(|c| (e(c, true).powi(k) - e(c, false).powi(k)).abs());
        let me = s.sup_x(|c| e(c, true).abs()).max(s.sup_x(|c| e(c, false).abs()));
        let e_diff = s.integrate_x(|c| PairedSamples::expect(c, |a, b| a - b).abs());
        r.push(&format!("E^{k}[u]-E^{k}[v] L1 <= k M_E^(k-1) |E[u-v]|"), d2, kf * me.powi(k - 1) * e_diff);
        r.push(
            &format!("k M_E^(k-1) |E[u-v]| <= k M^(k-1) E|u-v|"),
            kf * me.powi(k - 1) * e_diff,
            kf * m.powi(k - 1) * e_abs_diff,
        );
    }

    // Stability of expectation and variance.
    let u_minus_v = s.integrate(|a, b| (a - b).abs());
    let e_diff = s.integrate_x(|c| (e(c, true) - e(c, false)).abs());
    r.push("E[u]-E[v] L1 <= sup p * ||u-v||_L1", e_diff, pinf * u_minus_v);
    let e_diff_inf = s.sup_x(|c| (e(c, true) - e(c, false)).abs());
    let u_minus_v_inf = s.sup_x(|c| c.iter().map(|z| (z[2] - z[3]).abs()).fold(0.0, f64::max));
    r.push("E[u]-E[v] Linf <= ||u-v||_inf", e_diff_inf, u_minus_v_inf);
    for k in 1..=2u32 {
        let mk_diff = if k == 1 { 0.0 } else { s.integrate_x(|c| (var(c, true) - var(c, false)).abs()) };
        let ck = moment_constant(k, m);
        let factor = pinf.max(pinf.powi(k as i32));
        r.push(&format!("M^{k}[u]-M^{k}[v] L1 <= c_k max(p, p^k) E|u-v|"), mk_diff, ck * factor * e_abs_diff);
        let mk_inf = if k == 1 { 0.0 } else { s.sup_x(|c| (var(c, true) - var(c, false)).abs()) };
        let e_abs_inf = s.sup_x(|c| PairedSamples::expect(c, |a, b| (a - b).abs()));
        r.push(&format!("M^{k}[u]-M^{k}[v] Linf <= c_k E|u-v| Linf"), mk_inf, ck * e_abs_inf);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::DgBasis;
    use crate::grid::DetailTree;

    #[test]
    fn densities() {
        assert_eq!(Distribution::uniform().pdf(0.3), 1.0);
        let b = Distribution::beta(2.0, 5.0);
        assert!((b.pdf(0.2) - 30.0 * 0.2 * 0.8f64.powi(4)).abs() < 1e-12);
        let n = Distribution::normal(0.5, 0.15);
        assert!((n.pdf(0.5) - 1.0 / (0.15 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-12);
        assert_eq!(b.pdf(1.5), 0.0);
        assert_eq!(n.pdf(-0.1), 0.0);
    }

    #[test]
    fn cell_sup_norms() {
        assert_eq!(Distribution::uniform().cell_sup_norm(0.25, 0.5), 1.0);
        let b220 = Distribution::beta(2.0, 20.0);
        let expected = 420.0 * 0.05 * 0.95f64.powi(19);
        assert!((b220.cell_sup_norm(0.0, 0.125) - expected).abs() < 1e-12);
        let b25 = Distribution::beta(2.0, 5.0);
        assert!((b25.cell_sup_norm(0.5, 1.0) - 0.9375).abs() < 1e-12);
        assert!((b25.cell_sup_norm(0.875, 1.0) - 30.0 * 0.875 * 0.125f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn normal_mass_on_unit_interval() {
        let m = Distribution::normal(0.5, 0.15).mass(0.0, 1.0);
        assert!((m - 0.9991).abs() < 5e-4, "{m}");
        for d in [Distribution::uniform(), Distribution::beta(2.0, 5.0), Distribution::beta(2.0, 20.0)] {
            assert!((d.mass(0.0, 1.0) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn parse_and_label() {
        assert_eq!("beta25".parse::<Distribution>().unwrap(), Distribution::beta(2.0, 5.0));
        assert_eq!("B(2,20)".parse::<Distribution>().unwrap(), Distribution::beta(2.0, 20.0));
        assert_eq!("N(0.5, 0.15)".parse::<Distribution>().unwrap(), Distribution::normal(0.5, 0.15));
        assert!("gamma".parse::<Distribution>().is_err());
        assert_eq!(Distribution::beta(2.0, 5.0).label(), "beta_2_5");
    }

    #[test]
    fn moments_of_linear_field() {
        let cfg = GridConfig::unit(2, 4, 2).unwrap();
        let basis = DgBasis::new(3).unwrap();
        let tree = DetailTree::from_cells([CellIndex::new(1, 2, 5)]).grade();
        let field = LeafField::project(&cfg, &basis, tree, 1, |_, xi, o| o[0] = xi);
        let xs = [0.1, 0.45, 0.8];
        let m = compute_moments(&cfg, &field, &Distribution::uniform(), 0, &xs).unwrap();
        for i in 0..3 {
            assert!((m.mean[i] - 0.5).abs() < 1e-13);
            assert!((m.variance[i] - 1.0 / 12.0).abs() < 1e-13);
        }
        let m = compute_moments(&cfg, &field, &Distribution::beta(2.0, 5.0), 0, &xs).unwrap();
        assert!((m.mean[0] - 2.0 / 7.0).abs() < 1e-10);
        assert!((m.variance[0] - 10.0 / 392.0).abs() < 1e-10);
    }

    #[test]
    fn moments_csv_header() {
        let m = MomentField { x: vec![0.5], mean: vec![1.0], variance: vec![0.25] };
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x,mean,variance,mean_minus_std,mean_plus_std\n0.5,1,0.25,0.5,1.5\n"
        );
    }

    #[test]
    fn moment_constants() {
        assert_eq!(moment_constant(1, 2.0), 2.0 * 2.0 + 1.0);
        assert_eq!(moment_constant(2, 1.0), 4.0 + 6.0 + 2.0);
    }

    #[test]
    fn stability_identical_fields() {
        let cfg = GridConfig::unit(2, 2, 2).unwrap();
        let basis = DgBasis::new(2).unwrap();
        let u = LeafField::project(&cfg, &basis, DetailTree::full(&cfg), 1, |x, xi, o| o[0] = x - xi);
        let r = moment_stability_check(&cfg, &u, &u, &Distribution::beta(2.0, 5.0));
        assert!(r.all_hold(), "{:?}", r.failures());
        assert_eq!(expectation_l1_distance(&cfg, &u, &u, &Distribution::uniform()), 0.0);
    }
}
