//! Conservation laws on `(x, ξ)`: flux in `x`, zero flux in `ξ`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Boundary;

/// Largest number of conserved components.
pub const MAX_COMPONENTS: usize = 3;

pub const EULER_GAMMA: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConservationLaw {
    /// `f(u) = u²/2`.
    Burgers,
    /// `(ρ, ρv, ρE)` for a perfect gas.
    Euler { gamma: f64 },
    /// `f(u) = a·u`.
    LinearAdvection { speed: f64 },
}

impl ConservationLaw {
    pub fn ncomp(&self) -> usize {
        match self {
            ConservationLaw::Euler { .. } => 3,
            _ => 1,
        }
    }

    pub fn flux(&self, u: &[f64], out: &mut [f64]) {
        match *self {
            ConservationLaw::Burgers => out[0] = burgers_flux(u[0]),
            ConservationLaw::LinearAdvection { speed } => out[0] = speed * u[0],
            ConservationLaw::Euler { gamma } => out[..3].copy_from_slice(&euler_flux([u[0], u[1], u[2]], gamma)),
        }
    }

    pub fn max_speed(&self, u: &[f64]) -> f64 {
        match *self {
            ConservationLaw::Burgers => burgers_speed(u[0]),
            ConservationLaw::LinearAdvection { speed } => speed.abs(),
            ConservationLaw::Euler { gamma } => euler_speed([u[0], u[1], u[2]], gamma),
        }
    }

    /// Reason the state is not admissible, if any.
    pub fn check_admissible(&self, u: &[f64]) -> std::result::Result<(), String> {
        if u.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite state {u:?}"));
        }
        if let ConservationLaw::Euler { gamma } = *self {
            if u[0] <= 0.0 {
                return Err(format!("density {} <= 0", u[0]));
            }
            let p = euler_pressure([u[0], u[1], u[2]], gamma);
            if p <= 0.0 {
                return Err(format!("pressure {p} <= 0"));
            }
        }
        Ok(())
    }

    /// Names of the derived quantities whose moments are reported.
    pub fn quantities(&self) -> Vec<Quantity> {
        match self {
            ConservationLaw::Euler { .. } => vec![
                Quantity::Component(0),
                Quantity::Component(1),
                Quantity::Component(2),
                Quantity::Velocity,
                Quantity::Pressure,
            ],
            _ => vec![Quantity::Component(0)],
        }
    }
}

/// Pointwise functional of the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Component(usize),
    Velocity,
    Pressure,
}

impl Quantity {
    pub fn eval(&self, law: &ConservationLaw, u: &[f64]) -> f64 {
        match (*self, *law) {
            (Quantity::Component(k), _) => u[k],
            (Quantity::Velocity, _) => u[1] / u[0],
            (Quantity::Pressure, ConservationLaw::Euler { gamma }) => euler_pressure([u[0], u[1], u[2]], gamma),
            (Quantity::Pressure, _) => f64::NAN,
        }
    }

    pub fn name(&self, law: &ConservationLaw) -> String {
        match (*self, law) {
            (Quantity::Component(0), ConservationLaw::Euler { .. }) => "rho".into(),
            (Quantity::Component(1), ConservationLaw::Euler { .. }) => "rho_v".into(),
            (Quantity::Component(2), ConservationLaw::Euler { .. }) => "rho_e".into(),
            (Quantity::Component(k), _) if k == 0 => "u".into(),
            (Quantity::Component(k), _) => format!("u{k}"),
            (Quantity::Velocity, _) => "v".into(),
            (Quantity::Pressure, _) => "p".into(),
        }
    }
}

pub fn burgers_flux(u: f64) -> f64 {
    0.5 * u * u
}

pub fn burgers_speed(u: f64) -> f64 {
    u.abs()
}

pub fn euler_pressure(s: [f64; 3], gamma: f64) -> f64 {
    (gamma - 1.0) * (s[2] - 0.5 * s[1] * s[1] / s[0])
}

/// `(ρv, ρv² + p, v(ρE + p))`.
pub fn euler_flux(s: [f64; 3], gamma: f64) -> [f64; 3] {
    let v = s[1] / s[0];
    let p = euler_pressure(s, gamma);
    [s[1], s[1] * v + p, v * (s[2] + p)]
}

/// `|v| + √(γp/ρ)`; pressure and density are floored at zero so that the
/// speed stays finite at slightly non-physical quadrature points.
pub fn euler_speed(s: [f64; 3], gamma: f64) -> f64 {
    let rho = s[0].abs().max(1e-300);
    let v = s[1] / rho;
    let p = euler_pressure([rho, s[1], s[2]], gamma).max(0.0);
    v.abs() + (gamma * p / rho).sqrt()
}

/// Local Lax–Friedrichs flux `½(f⁻+f⁺) − ½α(u⁺−u⁻)`.
pub fn llf_flux(law: &ConservationLaw, ul: &[f64], ur: &[f64], out: &mut [f64]) {
    let n = law.ncomp();
    let mut fl = [0.0; MAX_COMPONENTS];
    let mut fr = [0.0; MAX_COMPONENTS];
    law.flux(ul, &mut fl);
    law.flux(ur, &mut fr);
    let alpha = law.max_speed(ul).max(law.max_speed(ur));
    for k in 0..n {
        out[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * alpha * (ur[k] - ul[k]);
    }
}

pub fn initial_data_burgers(x: f64, xi: f64) -> f64 {
    use std::f64::consts::PI;
    (2.0 * PI * x).sin() * (2.0 * PI * xi).sin()
}

/// Sod-type data with uncertain left pressure `ξ + 0.2`.
pub fn initial_data_euler(x: f64, xi: f64) -> [f64; 3] {
    if x < 0.5 {
        [1.0, 0.0, 0.5 + 2.5 * xi]
    } else {
        [0.125, 0.0, 0.25]
    }
}

pub type InitialData = Arc<dyn Fn(f64, f64, &mut [f64]) + Send + Sync>;

/// A conservation law with initial data, boundary treatment and domain.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub law: ConservationLaw,
    pub boundary: Boundary,
    pub x_interval: (f64, f64),
    pub xi_interval: (f64, f64),
    pub initial: InitialData,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("law", &self.law)
            .field("boundary", &self.boundary)
            .finish()
    }
}

impl Problem {
    pub fn burgers() -> Self {
        Problem {
            name: "burgers".into(),
            law: ConservationLaw::Burgers,
            boundary: Boundary::Periodic,
            x_interval: (0.0, 1.0),
            xi_interval: (0.0, 1.0),
            initial: Arc::new(|x, xi, out| out[0] = initial_data_burgers(x, xi)),
        }
    }

    pub fn euler_sod() -> Self {
        Problem {
            name: "euler".into(),
            law: ConservationLaw::Euler { gamma: EULER_GAMMA },
            boundary: Boundary::Extrapolate,
            x_interval: (0.0, 1.0),
            xi_interval: (0.0, 1.0),
            initial: Arc::new(|x, xi, out| out[..3].copy_from_slice(&initial_data_euler(x, xi))),
        }
    }

    pub fn with_initial(mut self, f: impl Fn(f64, f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(f);
        self
    }

    pub fn linear_advection(speed: f64) -> Self {
        use std::f64::consts::PI;
        Problem {
            name: "advection".into(),
            law: ConservationLaw::LinearAdvection { speed },
            boundary: Boundary::Periodic,
            x_interval: (0.0, 1.0),
            xi_interval: (0.0, 1.0),
            initial: Arc::new(|x, _, out| out[0] = (2.0 * PI * x).sin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Burgers,
    Euler,
}

impl ModelKind {
    pub fn problem(&self) -> Problem {
        match self {
            ModelKind::Burgers => Problem::burgers(),
            ModelKind::Euler => Problem::euler_sod(),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "burgers" => Ok(ModelKind::Burgers),
            "euler" | "sod" => Ok(ModelKind::Euler),
            _ => Err(Error::Config(format!("unknown model '{s}'"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Burgers => "burgers",
            ModelKind::Euler => "euler",
        })
    }
}

/// `minmod(a, b, c)`: the argument of smallest magnitude when all signs
/// agree, zero otherwise. Returns `a` itself when it is the smallest.
pub fn minmod(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// TVB-modified minmod: `a` is kept when `|a| ≤ M h²`.
pub fn tvb_minmod(a: f64, b: f64, c: f64, m: f64, h: f64) -> f64 {
    if a.abs() <= m * h * h {
        a
    } else {
        minmod(a, b, c)
    }
}

/// Limits the linear `x`-moment of every component of one cell block against
/// the neighbour mean differences. When a component's slope changes, its
/// higher `x`-moments and the mixed moments are zeroed; the pure `ξ`-moments
/// and the mean are left untouched. Returns whether anything changed.
#[allow(clippy::too_many_arguments)]
pub fn shu_limit(
    block: &mut [f64],
    ncomp: usize,
    p: usize,
    area: f64,
    hx: f64,
    left_mean: &[f64],
    right_mean: &[f64],
    tvb_m: f64,
) -> bool {
    if p < 2 {
        return false;
    }
    let sq = area.sqrt();
    let s3 = 3f64.sqrt();
    let mut changed = false;
    for k in 0..ncomp {
        let b = &mut block[k * p * p..(k + 1) * p * p];
        let mean = b[0] / sq;
        let a = s3 * b[p] / sq;
        let limited = tvb_minmod(a, right_mean[k] - mean, mean - left_mean[k], tvb_m, hx);
        if limited != a {
            changed = true;
            b[p] = limited * sq / s3;
            for i1 in 1..p {
                for i2 in 0..p {
                    if !(i1 == 1 && i2 == 0) {
                        b[i1 * p + i2] = 0.0;
                    }
                }
            }
        }
    }
    changed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_flux_and_speed() {
        assert_eq!(burgers_flux(0.0), 0.0);
        assert_eq!(burgers_speed(0.0), 0.0);
        assert_eq!(burgers_flux(2.0), 2.0);
        assert_eq!(burgers_flux(-1.0), 0.5);
        assert_eq!(burgers_speed(-1.0), 1.0);
    }

    #[test]
    fn sod_states() {
        let l = [1.0, 0.0, 2.5];
        assert!((euler_pressure(l, 1.4) - 1.0).abs() < 1e-15);
        let f = euler_flux(l, 1.4);
        assert!((f[0]).abs() < 1e-15 && (f[1] - 1.0).abs() < 1e-15 && f[2].abs() < 1e-15);
        assert!((euler_speed(l, 1.4) - 1.4f64.sqrt()).abs() < 1e-15);
        let r = [0.125, 0.0, 0.25];
        assert!((euler_pressure(r, 1.4) - 0.1).abs() < 1e-15);
        assert!((euler_speed(r, 1.4) - (1.4f64 * 0.8).sqrt()).abs() < 1e-14);
        assert!((euler_flux(r, 1.4)[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn initial_data() {
        assert!((initial_data_burgers(0.25, 0.25) - 1.0).abs() < 1e-15);
        assert!(initial_data_burgers(0.5, 0.3).abs() < 1e-15);
        assert!((initial_data_burgers(0.25, 0.75) + 1.0).abs() < 1e-15);
        let s = initial_data_euler(0.25, 0.32);
        assert_eq!(s, [1.0, 0.0, 1.3]);
        assert!((euler_pressure(s, 1.4) - 0.52).abs() < 1e-14);
        assert_eq!(initial_data_euler(0.75, 0.9), [0.125, 0.0, 0.25]);
        assert!(euler_pressure(initial_data_euler(0.1, 0.0), 1.4) > 0.0);
    }

    #[test]
    fn llf_is_consistent() {
        let law = ConservationLaw::Euler { gamma: 1.4 };
        let u = [0.7, -0.2, 1.9];
        let mut f = [0.0; 3];
        let mut g = [0.0; 3];
        llf_flux(&law, &u, &u, &mut f);
        law.flux(&u, &mut g);
        assert_eq!(f, g);
    }

    #[test]
    fn admissibility() {
        let law = ConservationLaw::Euler { gamma: 1.4 };
        assert!(law.check_admissible(&[1.0, 0.0, 2.5]).is_ok());
        assert!(law.check_admissible(&[-1.0, 0.0, 2.5]).is_err());
        assert!(law.check_admissible(&[1.0, 3.0, 2.5]).is_err());
    }

    #[test]
    fn minmod_cases() {
        assert_eq!(minmod(1.0, 2.0, 3.0), 1.0);
        assert_eq!(minmod(-3.0, -2.0, -1.5), -1.5);
        assert_eq!(minmod(1.0, -2.0, 3.0), 0.0);
        assert_eq!(tvb_minmod(0.01, -1.0, 1.0, 10.0, 0.1), 0.01);
    }

    #[test]
    fn limiter_preserves_consistent_linear_data() {
        let (p, area, hx): (usize, f64, f64) = (3, 0.01, 0.1);
        let sq: f64 = area.sqrt();
        let mut b = vec![0.0; 9];
        b[0] = 2.0 * sq;
        b[3] = 0.1 * sq / 3f64.sqrt();
        b[1] = 0.3;
        let orig = b.clone();
        assert!(!shu_limit(&mut b, 1, p, area, hx, &[1.8], &[2.2], 0.0));
        assert_eq!(b, orig);
        let mut c = vec![0.0; 9];
        c[0] = sq;
        assert!(!shu_limit(&mut c, 1, p, area, hx, &[1.0], &[1.0], 0.0));
    }

    #[test]
    fn limiter_flattens_extremum() {
        let (p, area, hx): (usize, f64, f64) = (3, 0.01, 0.1);
        let sq: f64 = area.sqrt();
        let mut b = vec![0.0; 9];
        b[0] = 3.0 * sq;
        b[3] = 0.5 * sq / 3f64.sqrt();
        b[4] = 0.2;
        b[6] = 0.1;
        b[2] = 0.05;
        assert!(shu_limit(&mut b, 1, p, area, hx, &[1.0], &[1.0], 0.0));
        assert_eq!(b[0], 3.0 * sq);
        assert_eq!(b[3], 0.0);
        assert_eq!(b[4], 0.0);
        assert_eq!(b[6], 0.0);
        assert_eq!(b[2], 0.05);
        // Slope reduced to the smaller mean difference.
        let mut b = vec![0.0; 9];
        b[0] = 2.0 * sq;
        b[3] = 0.5 * sq / 3f64.sqrt();
        shu_limit(&mut b, 1, p, area, hx, &[1.9], &[2.3], 0.0);
        assert!((3f64.sqrt() * b[3] / sq - 0.1).abs() < 1e-14);
    }
}
