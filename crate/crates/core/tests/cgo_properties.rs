use std::sync::Arc;

use levelcg_core::cgo::{cgo_params, cgo_run, cgo_solve, CgoConfig, CgoState, CgoStatus, IterRecord, SaddleProblem};
use levelcg_core::geometry::{FeasibleSet, ProxKind};
use levelcg_core::oracle::{HingeSum, Linear, Quadratic, Rows, SharedOracle};
use levelcg_core::verify::{grid_saddle, GridSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(rng: &mut ChaCha8Rng, dim: usize) -> FeasibleSet {
    match rng.random_range(0..3) {
        0 => {
            let lo: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..0.5)).collect();
            let hi = lo.iter().map(|l| l + rng.random_range(0.2..1.5)).collect();
            FeasibleSet::boxed(lo, hi).unwrap()
        }
        1 => FeasibleSet::simplex_leq(dim, rng.random_range(0.5..2.0)).unwrap(),
        _ if dim >= 2 => FeasibleSet::simplex(dim).unwrap(),
        _ => FeasibleSet::interval(-0.5, 1.0).unwrap(),
    }
}

fn random_oracle(rng: &mut ChaCha8Rng, set: &FeasibleSet) -> SharedOracle {
    let center: Vec<f64> = (0..set.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = rng.random_range(-0.5..0.5);
    if rng.random_bool(0.5) {
        let reach = set.max_norm() + center.iter().map(|c| c * c).sum::<f64>().sqrt();
        Arc::new(Quadratic::new(rng.random_range(0.1..2.0), center, b, reach))
    } else {
        Arc::new(Linear::new(center, b))
    }
}

fn random_problem(seed: u64, prox: ProxKind) -> SaddleProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=3);
    let set = random_set(&mut rng, dim);
    let objective = rng.random_bool(0.5).then(|| random_oracle(&mut rng, &set));
    let rows = (0..rng.random_range(1..=3)).map(|_| random_oracle(&mut rng, &set)).collect();
    SaddleProblem::new(objective, rows, set, prox).unwrap()
}

fn grid_points(dim: usize) -> usize {
    [0, 1001, 101, 25][dim]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounds_bracket_the_grid_value(seed in 0u64..1_000_000, euclid in any::<bool>()) {
        let prox = if euclid { ProxKind::Euclidean } else { ProxKind::Entropy };
        let p = random_problem(seed, prox);
        let grid = grid_saddle(&p, &GridSpec::covering(p.x_set(), grid_points(p.dim())).unwrap()).unwrap();
        let mut recs = Vec::new();
        let cfg = CgoConfig { max_iter: 200, ..CgoConfig::new(1e-12, 0.5) };
        let out = cgo_run(&p, &cfg, &mut |r: &IterRecord| recs.push(r.clone())).unwrap();
        // each LMO vertex of a simplex adds at most one nonzero coordinate
        let simplex_like = !matches!(p.x_set(), FeasibleSet::Box(_));
        for r in &recs {
            prop_assert!(r.lower <= r.upper + 1e-12, "t {}: {} > {}", r.t, r.lower, r.upper);
            prop_assert!(r.lower <= grid.value + 1e-9);
            prop_assert!(r.upper >= grid.value - grid.error_bound - 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.gamma));
            prop_assert!(!simplex_like || r.support as u64 <= r.t + 1);
            prop_assert!(r.gap <= p.gap_bound(r.t) + 1e-12);
        }
        prop_assert!(p.x_set().contains(&out.x, 1e-9));
        prop_assert!((out.z.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(out.z.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn minorant_stays_below_the_saddle_function(seed in 0u64..1_000_000) {
        let p = random_problem(seed, ProxKind::Entropy);
        let mut st = CgoState::init(&p, None, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..30 {
            st.step(&p, 1.0).unwrap();
        }
        for _ in 0..1000 {
            let x = p.x_set().sample(&mut rng);
            let under: f64 = st.minorant_intercept + st.minorant_slope.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            prop_assert!(under <= p.upper_value(&x) + 1e-9, "{under} > {}", p.upper_value(&x));
        }
    }
}

#[test]
fn step_schedule_matches_the_closed_form() {
    let (a, l, tau) = cgo_params(3, 1.0, 1.0).unwrap();
    assert_eq!(a, 0.5);
    assert!((l - 2.0 / 3.0).abs() < 1e-15);
    assert!((tau - 9.0 * 3f64.sqrt()).abs() < 1e-12);
    assert_eq!(cgo_params(1, 2.0, 0.5).unwrap(), (1.0, 0.0, 9.0));
    assert!(cgo_params(0, 1.0, 1.0).is_err());
}

#[test]
fn smooth_benchmark_gap_decays_under_the_bound() {
    let p = SaddleProblem::new(
        Some(Arc::new(Quadratic::new(1.0, vec![0.8], 0.0, 1.0))),
        vec![Arc::new(Linear::new(vec![1.0], -0.5))],
        FeasibleSet::interval(0.0, 1.0).unwrap(),
        ProxKind::Entropy,
    )
    .unwrap();
    let mut gaps = vec![f64::NAN];
    let cfg = CgoConfig { max_iter: 1000, ..CgoConfig::new(1e-14, 0.5) };
    cgo_run(&p, &cfg, &mut |r: &IterRecord| gaps.push(r.gap)).unwrap();
    assert!(gaps[400] <= 0.75 * gaps[100], "{} vs {}", gaps[400], gaps[100]);
    for (t, g) in gaps.iter().enumerate().skip(1) {
        assert!(*g <= p.gap_bound(t as u64), "t {t}");
    }
}

#[test]
fn nonsmooth_hinge_row_reaches_tolerance_with_exact_upper() {
    // l-shifted objective row -0.2 and the hinge [x - 0.5]_+ on [0, 1]
    let hinge: SharedOracle = Arc::new(HingeSum::single(vec![1.0], -0.5).unwrap());
    let shifted: SharedOracle = Arc::new(Linear::constant(1, -0.2));
    let p = SaddleProblem::new(None, vec![shifted, hinge.clone()], FeasibleSet::interval(0.0, 1.0).unwrap(), ProxKind::Entropy)
        .unwrap();
    let cfg = CgoConfig::new(1e-2, 0.5);
    let out = levelcg_core::cgo::cgo_solve_nonsmooth(&p, &cfg).unwrap();
    assert_eq!(out.status, CgoStatus::Converged);
    assert!(out.gap() <= cfg.tolerance());
    assert!((out.upper - p.upper_value(&out.x)).abs() <= 1e-12);
    let grid = grid_saddle(&p, &GridSpec::covering(p.x_set(), 2001).unwrap()).unwrap();
    assert!(out.lower <= grid.value + 1e-9 && grid.value - grid.error_bound <= out.upper + 1e-9);
    assert!(hinge.value(&out.x) >= 0.0);
}

#[test]
fn smooth_solve_is_reproducible() {
    let p = random_problem(11, ProxKind::Entropy);
    let cfg = CgoConfig { max_iter: 500, ..CgoConfig::new(1e-6, 0.5) };
    assert_eq!(cgo_solve(&p, &cfg).unwrap(), cgo_solve(&p, &cfg).unwrap());
}

#[test]
fn hinge_rows_over_many_terms_keep_bounds_ordered() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rows = Rows::new(20, 2, data).unwrap();
    let offsets = (0..20).map(|_| rng.random_range(-0.5..0.5)).collect();
    let h = HingeSum::new(vec![0.0, 0.0], -0.3, rows, offsets, vec![0.05; 20]).unwrap();
    let set = FeasibleSet::simplex_leq(2, 1.0).unwrap();
    let p = SaddleProblem::new(Some(Arc::new(Quadratic::new(1.0, vec![0.5, 0.5], 0.0, 2.0))), vec![Arc::new(h)], set, ProxKind::Entropy)
        .unwrap();
    let mut ok = true;
    let cfg = CgoConfig { max_iter: 2000, ..CgoConfig::new(1e-12, 0.5) };
    let out = cgo_run(&p, &cfg, &mut |r: &IterRecord| ok &= r.lower <= r.upper + 1e-12).unwrap();
    assert!(ok);
    let grid = grid_saddle(&p, &GridSpec::covering(p.x_set(), 201).unwrap()).unwrap();
    assert!(out.lower <= grid.value + 1e-9 && grid.value - grid.error_bound <= out.upper + 1e-9);
}
