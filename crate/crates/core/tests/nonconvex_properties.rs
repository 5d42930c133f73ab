use std::sync::Arc;

use levelcg_core::geometry::FeasibleSet;
use levelcg_core::level::{lcg_solve, LevelConfig};
use levelcg_core::nonconvex::{
    build_prox_subproblem, dncg, dncg_violation_bound, ipp_lcg, DncgConfig, DncgSchedule, IppConfig, NonconvexProblem,
    SmoothedLagrangian,
};
use levelcg_core::oracle::{Constants, FnOracle, Linear, Quadratic, SharedOracle};
use levelcg_core::verify::{grid_minimize, GridSpec};
use proptest::prelude::*;

/// `a (x - center)^2` (concave for `a < 0`) subject to `s x - r <= 0` on `[0, 1]`.
fn one_d(a: f64, center: f64, s: f64, r: f64) -> NonconvexProblem {
    let f = FnOracle::new(1, Constants::new(2.0 * a.abs(), 2.0 * a.abs() * (1.0 + center.abs())), move |x, g| {
        g[0] = 2.0 * a * (x[0] - center);
        a * (x[0] - center) * (x[0] - center)
    });
    NonconvexProblem::new(
        Arc::new(f),
        (2.0 * -a).max(0.0),
        vec![Arc::new(Linear::new(vec![s], -r))],
        FeasibleSet::interval(0.0, 1.0).unwrap(),
    )
    .unwrap()
}

fn benchmark() -> NonconvexProblem {
    one_d(1.0, 0.8, 1.0, 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multipliers_solve_the_inner_maximization(h in -2.0f64..2.0, c in 0.01f64..2.0) {
        let lag = SmoothedLagrangian::new(benchmark(), c).unwrap();
        let y = lag.multipliers(&[h])[0];
        let obj = |y: f64| h * y - 0.5 * c * y * y;
        let best = obj(y);
        prop_assert!(y >= 0.0);
        for i in 0..=2000 {
            let t = i as f64 * 1e-3 * (y + 1.0) * 2.0;
            prop_assert!(obj(t) <= best + 1e-8);
        }
    }

    #[test]
    fn dncg_output_respects_the_violation_bound(
        a in -1.0f64..1.0,
        center in 0.0f64..1.0,
        s in 0.2f64..1.5,
        r in 0.05f64..0.8,
        k in 16u64..600,
    ) {
        let p = one_d(if a.abs() < 0.05 { 0.05 } else { a }, center, s, r);
        let out = dncg(&p, &DncgConfig::new(k)).unwrap();
        let bound = dncg_violation_bound(&p, out.c, out.wolfe_gap);
        prop_assert!(out.infeasibility_sq_exact <= bound + 1e-12, "{} > {bound}", out.infeasibility_sq_exact);
        prop_assert!(p.x_set().contains(&out.x_hat, 1e-12));
    }
}

#[test]
fn min_gap_is_monotone_over_nested_fixed_runs() {
    let p = benchmark();
    let schedule = DncgSchedule::Fixed { c: 0.1, alpha: 0.02 };
    let mut prev = f64::INFINITY;
    for k in [16, 64, 256, 1024, 4096] {
        let out = dncg(&p, &DncgConfig { horizon: k, schedule, x0: Some(vec![0.0]) }).unwrap();
        assert!(out.wolfe_gap <= prev, "K {k}: {} > {prev}", out.wolfe_gap);
        prev = out.wolfe_gap;
    }
}

#[test]
fn mean_gap_and_certificate_shrink_with_the_horizon() {
    let p = benchmark();
    let a = dncg(&p, &DncgConfig::new(256)).unwrap();
    let b = dncg(&p, &DncgConfig::new(4096)).unwrap();
    assert!(b.mean_gap <= a.mean_gap / 1.5);
    assert!(b.gap_certificate.unwrap() <= a.gap_certificate.unwrap() / 1.5);
    assert!(a.wolfe_gap <= a.mean_gap && a.mean_gap <= a.gap_certificate.unwrap());
    assert!(b.wolfe_gap <= b.mean_gap && b.mean_gap <= b.gap_certificate.unwrap());
}

#[test]
fn ipp_steps_solve_their_subproblems_to_delta() {
    let (df, dh) = (1e-2, 1e-2);
    let p = one_d(1.0, 0.8, 1.0, 0.5);
    let p = NonconvexProblem::new(p.objective().clone(), 1.0, p.constraints().to_vec(), p.x_set().clone()).unwrap();
    let grid = GridSpec::covering(p.x_set(), 100_001).unwrap();
    let mut center = vec![0.0];
    for _ in 0..4 {
        let cfg = IppConfig { outer: 1, x0: Some(center.clone()), delta_f: df, delta_h: dh, ..IppConfig::new(df, 0.9) };
        let out = ipp_lcg(&p, &cfg).unwrap();
        let sub = build_prox_subproblem(&p, &center).unwrap();
        let best = grid_minimize(sub.objective().as_ref(), sub.x_set(), sub.constraints(), &grid).unwrap();
        let fx = sub.objective().value(&out.x);
        assert!(fx - best.value <= df + 1e-4, "{fx} vs {}", best.value);
        assert!(sub.infeasibility(&out.x) <= dh);
        center = out.x;
    }
}

#[test]
fn ipp_on_a_convex_problem_tracks_lcg() {
    let p = NonconvexProblem::new(
        Arc::new(Quadratic::new(1.0, vec![0.8], 0.0, 1.0)) as SharedOracle,
        1.0,
        vec![Arc::new(Linear::new(vec![1.0], -0.5))],
        FeasibleSet::interval(0.0, 1.0).unwrap(),
    )
    .unwrap();
    let eps = 1e-2;
    let ipp = ipp_lcg(&p, &IppConfig { outer: 10, x0: Some(vec![0.0]), ..IppConfig::new(eps, 0.9) }).unwrap();
    let lcg = lcg_solve(&p.as_convex().unwrap(), &LevelConfig::new(eps, 0.9)).unwrap();
    assert!((ipp.f_value - lcg.f_value).abs() <= 2.0 * eps);
    assert!(ipp.kkt.infeasibility <= eps);
}
