use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mrdg::basis::DgBasis;
use mrdg::field::{nominal_area, LeafField};
use mrdg::grid::{Boundary, CellIndex, DetailTree, GridConfig};
use mrdg::models::Problem;
use mrdg::mra::{
    coarsen, forward_transform, inverse_transform, refine_field, threshold, ThresholdMode, ThresholdPolicy,
};
use mrdg::solver::{Solver, SolverOptions};
use mrdg::stochastic::Distribution;

fn random_tree(cfg: &GridConfig, rng: &mut ChaCha8Rng, marks: usize) -> DetailTree {
    let mut tree = DetailTree::new();
    for _ in 0..marks {
        if cfg.max_level == 0 {
            break;
        }
        let l = rng.gen_range(0..cfg.max_level);
        let c = CellIndex::new(l, rng.gen_range(0..cfg.nx(l)), rng.gen_range(0..cfg.nxi(l)));
        tree.mark(c);
    }
    tree.grade()
}

fn random_field(cfg: &GridConfig, tree: DetailTree, ncomp: usize, p: usize, rng: &mut ChaCha8Rng) -> LeafField {
    let n = tree.leaves(cfg).len() * ncomp * p * p;
    let coeffs = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    LeafField::new(cfg, tree, ncomp, p, coeffs).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip_is_exact(seed in any::<u64>(), level in 0u8..=4, p in 1usize..=3, ncomp in prop_oneof![Just(1usize), Just(3usize)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GridConfig::unit(2, 2, level).unwrap();
        let basis = DgBasis::new(p).unwrap();
        let tree = random_tree(&cfg, &mut rng, 12);
        let field = random_field(&cfg, tree, ncomp, p, &mut rng);
        let ms = forward_transform(&cfg, &basis, &field).unwrap();
        let back = inverse_transform(&cfg, &basis, &ms);
        prop_assert_eq!(back.leaves(), field.leaves());
        prop_assert!(max_diff(back.coefficients(), field.coefficients()) <= 1e-12);
        let energy: f64 = field.coefficients().iter().map(|v| v * v).sum();
        prop_assert!((ms.norm_squared() - energy).abs() <= 1e-12 * energy);
    }

    #[test]
    fn coarsening_matches_threshold_then_inverse(seed in any::<u64>(), eps in 1e-3f64..0.5, weighted in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GridConfig::unit(2, 2, 4).unwrap();
        let basis = DgBasis::new(3).unwrap();
        let tree = random_tree(&cfg, &mut rng, 20);
        let field = random_field(&cfg, tree, 1, 3, &mut rng);
        let policy = if weighted {
            ThresholdPolicy::fixed(ThresholdMode::Weighted, eps, Some(Distribution::beta(2.0, 5.0)))
        } else {
            ThresholdPolicy::fixed(ThresholdMode::Uniform, eps, None)
        };
        let (fast, significant) = coarsen(&cfg, &basis, &field, &policy).unwrap();
        let ms = forward_transform(&cfg, &basis, &field).unwrap();
        let slow = inverse_transform(&cfg, &basis, &threshold(&cfg, &ms, &policy));
        prop_assert_eq!(fast.leaves(), slow.leaves());
        prop_assert!(max_diff(fast.coefficients(), slow.coefficients()) <= 1e-12);
        for (c, norm) in significant {
            prop_assert!(norm > policy.local_threshold(&cfg, c));
            prop_assert!((norm - ms.detail_norm_of(&cfg, c)).abs() <= 1e-12);
        }
    }

    #[test]
    fn refinement_adds_only_zero_details(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GridConfig::unit(2, 2, 4).unwrap();
        let basis = DgBasis::new(3).unwrap();
        let tree = random_tree(&cfg, &mut rng, 6);
        let field = random_field(&cfg, tree.clone(), 3, 3, &mut rng);
        let mut bigger = tree.clone();
        for c in random_tree(&cfg, &mut rng, 6).iter() {
            bigger.mark(*c);
        }
        let bigger = bigger.grade();
        let fine = refine_field(&cfg, &basis, &field, bigger.clone()).unwrap();
        let leaves = bigger.leaves(&cfg);
        prop_assert_eq!(fine.leaves(), leaves.as_slice());
        let a = forward_transform(&cfg, &basis, &field).unwrap();
        let b = forward_transform(&cfg, &basis, &fine).unwrap();
        prop_assert!(max_diff(a.coarse(), b.coarse()) <= 1e-12);
        for c in bigger.iter() {
            let d = b.detail(*c).unwrap();
            match a.detail(*c) {
                Some(old) => prop_assert!(max_diff(old, d) <= 1e-12),
                None => prop_assert!(d.iter().all(|v| v.abs() <= 1e-12)),
            }
        }
        prop_assert!(refine_field(&cfg, &basis, &fine, tree).is_err());
    }

    #[test]
    fn residual_conserves_every_component(seed in any::<u64>(), euler in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GridConfig::unit(4, 4, 3).unwrap();
        let (problem, ncomp) = if euler {
            let mut sod = Problem::euler_sod();
            sod.boundary = Boundary::Periodic;
            (sod, 3)
        } else {
            (Problem::burgers(), 1)
        };
        let policy = ThresholdPolicy::fixed(ThresholdMode::Uniform, 1e-3, None);
        let solver = Solver::new(cfg.clone(), 3, problem, policy, SolverOptions::default()).unwrap();
        let tree = random_tree(&cfg, &mut rng, 10);
        let n = tree.leaves(&cfg).len();
        let mut coeffs = Vec::with_capacity(n * ncomp * 9);
        for _ in 0..n {
            for k in 0..ncomp {
                for m in 0..9 {
                    let v: f64 = rng.gen_range(-0.05..0.05);
                    // Euler states stay near (1, 0, 2.5) so every trace is admissible.
                    let base = if euler && m == 0 { [1.0, 0.0, 2.5][k] } else { 0.0 };
                    coeffs.push(base + v);
                }
            }
        }
        let field = LeafField::new(&cfg, tree, ncomp, 3, coeffs).unwrap();
        let r = solver.residual(&field);
        for k in 0..ncomp {
            let total: f64 = field
                .leaves()
                .iter()
                .enumerate()
                .map(|(i, c)| r[i * ncomp * 9 + k * 9] * nominal_area(&cfg, c.level).sqrt())
                .sum();
            prop_assert!(total.abs() <= 1e-12, "component {} drifts by {}", k, total);
        }
    }

    #[test]
    fn unit_density_weights_nothing(level in 0u8..=5, ix in 0u32..256, ixi in 0u32..256, eps in 1e-6f64..1.0) {
        let cfg = GridConfig::unit(8, 16, 5).unwrap();
        let c = CellIndex::new(level, ix % cfg.nx(level), ixi % cfg.nxi(level));
        let u = ThresholdPolicy::fixed(ThresholdMode::Uniform, eps, None);
        let w = ThresholdPolicy::fixed(ThresholdMode::Weighted, eps, Some(Distribution::uniform()));
        prop_assert_eq!(u.local_threshold(&cfg, c), w.local_threshold(&cfg, c));
    }

    #[test]
    fn local_thresholds_sum_below_global(eps in 1e-6f64..1.0, top in 1u8..=8) {
        let cfg = GridConfig::unit(8, 8, top).unwrap();
        let policy = ThresholdPolicy::fixed(ThresholdMode::Uniform, eps, None);
        let sum: f64 = (0..top).map(|l| policy.local_threshold(&cfg, CellIndex::new(l, 0, 0))).sum();
        prop_assert!(sum <= eps);
    }
}
