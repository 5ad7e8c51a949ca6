use std::f64::consts::PI;

use mrdg::grid::{DetailTree, GridConfig};
use mrdg::models::Problem;
use mrdg::mra::{ThresholdMode, ThresholdPolicy};
use mrdg::quadrature::GaussRule;
use mrdg::solver::{Solver, SolverOptions};

fn heuristic(cfg: &GridConfig) -> ThresholdPolicy {
    ThresholdPolicy::heuristic(cfg, ThresholdMode::Uniform, 0.1, 1.0, None).unwrap()
}

#[test]
fn xi_independent_burgers_stays_xi_independent() {
    let cfg = GridConfig::unit(8, 8, 3).unwrap();
    let problem = Problem::burgers().with_initial(|x, _, o| o[0] = (2.0 * PI * x).sin());
    let solver = Solver::new(cfg.clone(), 3, problem, heuristic(&cfg), SolverOptions::default()).unwrap();
    let (state, _) = solver.run(0.35).unwrap();
    let vals = state.field.sample_raster(&cfg, 128, 16);
    let mut worst = 0.0f64;
    for i in 0..128 {
        let row = &vals[i * 16..(i + 1) * 16];
        for v in row {
            worst = worst.max((v - row[0]).abs());
        }
    }
    assert!(worst <= 1e-12, "ξ variation {worst:e}");
}

#[test]
fn adaptive_burgers_conserves_mass() {
    let cfg = GridConfig::unit(8, 16, 3).unwrap();
    let solver = Solver::new(cfg.clone(), 3, Problem::burgers(), heuristic(&cfg), SolverOptions::default()).unwrap();
    let init = solver.initialize().unwrap();
    let m0 = init.field.total_integral(&cfg)[0];
    let (state, stats) = solver.run(0.35).unwrap();
    let m1 = state.field.total_integral(&cfg)[0];
    assert!((m1 - m0).abs() <= 1e-10, "{m0} -> {m1}");
    assert_eq!(stats.n_total, state.leaf_counts.iter().map(|e| e.2 as u64).sum::<u64>());
    assert!(state.leaf_counts.iter().all(|e| e.2 <= 64 * 128));
}

#[test]
fn sod_stays_admissible_at_level_three() {
    let cfg = GridConfig::unit(8, 8, 3).unwrap();
    let solver = Solver::new(cfg.clone(), 3, Problem::euler_sod(), heuristic(&cfg), SolverOptions::default()).unwrap();
    let mut min_rho = f64::INFINITY;
    let mut min_p = f64::INFINITY;
    let (state, _) = solver
        .run_with(0.2, |st| {
            for i in 0..st.field.len() {
                let u: Vec<f64> = (0..3).map(|k| st.field.mean(&cfg, i, k)).collect();
                min_rho = min_rho.min(u[0]);
                min_p = min_p.min(0.4 * (u[2] - 0.5 * u[1] * u[1] / u[0]));
            }
        })
        .unwrap();
    assert_eq!(state.t, 0.2);
    assert!(min_rho > 0.0 && min_p > 0.0, "rho {min_rho} p {min_p}");
    // The shock has left the initial interface.
    let mut u = [0.0; 3];
    state.field.evaluate_into(&cfg, 0.8, 0.5, &mut u);
    assert!(u[0] > 0.125 + 1e-3);
}

#[test]
fn zero_threshold_reproduces_the_full_grid_scheme() {
    let cfg = GridConfig::unit(4, 4, 2).unwrap();
    let policy = ThresholdPolicy::fixed(ThresholdMode::Uniform, 0.0, None);
    let solver = Solver::new(cfg.clone(), 3, Problem::burgers(), policy, SolverOptions::default()).unwrap();
    let (adaptive, _) = solver.run(0.05).unwrap();
    let full = solver.evolve_fixed(solver.project_uniform(), 0.05).unwrap();
    let a = adaptive.field.sample_raster(&cfg, 32, 32);
    let b = full.sample_raster(&cfg, 32, 32);
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-10, "adaptive and full grid differ by {diff:e}");
}

fn advection_error(level: u8) -> f64 {
    let cfg = GridConfig::unit(4, 1, level).unwrap();
    let options = SolverOptions { limiter: false, ..SolverOptions::default() };
    let solver = Solver::new(cfg.clone(), 3, Problem::linear_advection(1.0), heuristic(&cfg), options).unwrap();
    let t = 0.25;
    let field = solver.evolve_fixed(solver.project_uniform(), t).unwrap();
    assert_eq!(field.tree(), &DetailTree::full(&cfg));
    let rule = GaussRule::unit(5);
    let nx = cfg.nx(level);
    let h = cfg.h_x(level);
    let mut err = 0.0;
    let mut u = [0.0];
    for i in 0..nx {
        for (x, w) in rule.mapped(i as f64 * h, (i + 1) as f64 * h) {
            field.evaluate_into(&cfg, x, 0.5, &mut u);
            err += w * (u[0] - (2.0 * PI * (x - t)).sin()).abs();
        }
    }
    err
}

#[test]
fn advection_converges_at_third_order() {
    let e: Vec<f64> = (2..=4).map(advection_error).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 2.7 && order < 3.5, "errors {e:?}");
    }
}
