//! Brute-force reference oracles for tiny instances.
//!
//! These are slow on purpose: dense grids over sets of dimension at most
//! three and an exact order-statistic scan for CVaR. Tests use them as the
//! independent source of expected values.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::cgo::SaddleProblem;
use crate::geometry::FeasibleSet;
use crate::oracle::{Oracle, SharedOracle};
use crate::{Error, Result};

/// Cap on the number of grid points.
pub const MAX_GRID_POINTS: u128 = 10_000_000;
/// Largest dimension the grid oracles accept.
pub const MAX_GRID_DIM: usize = 3;

/// Tensor grid, one `(lo, hi, points)` triple per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<(f64, f64, usize)>,
}

impl GridSpec {
    pub fn new(axes: Vec<(f64, f64, usize)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis"));
        }
        let mut total: u128 = 1;
        for &(lo, hi, n) in &axes {
            if n < 2 {
                return Err(Error::InvalidArgument("grid needs at least 2 points per axis"));
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument("grid axis needs finite lo < hi"));
            }
            total = total.saturating_mul(n as u128);
        }
        if total > MAX_GRID_POINTS {
            return Err(Error::GridTooLarge(total));
        }
        Ok(Self { axes })
    }

    /// Grid over the bounding box of `set` with `points` per axis.
    pub fn covering(set: &FeasibleSet, points: usize) -> Result<Self> {
        let (lo, hi) = bounding_box(set);
        Self::new(lo.into_iter().zip(hi).map(|(l, h)| (l, if h > l { h } else { l + 1.0 }, points)).collect())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn n_points(&self) -> u128 {
        self.axes.iter().map(|a| a.2 as u128).product()
    }

    /// Spacing per axis.
    pub fn steps(&self) -> Vec<f64> {
        self.axes.iter().map(|&(lo, hi, n)| (hi - lo) / (n - 1) as f64).collect()
    }

    /// Length of a cell diagonal.
    pub fn diagonal(&self) -> f64 {
        self.steps().iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Same box with `points -> 2 points - 1`, so the old grid is a subgrid.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.axes.iter().map(|&(lo, hi, n)| (lo, hi, 2 * n - 1)).collect())
    }

    /// Calls `f` on every grid point in lexicographic order.
    pub fn for_each(&self, mut f: impl FnMut(&[f64])) {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        loop {
            for (i, &(lo, hi, n)) in self.axes.iter().enumerate() {
                x[i] = if idx[i] + 1 == n { hi } else { lo + (hi - lo) * idx[i] as f64 / (n - 1) as f64 };
            }
            f(&x);
            let mut i = d;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < self.axes[i].2 {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}

fn bounding_box(set: &FeasibleSet) -> (Vec<f64>, Vec<f64>) {
    match set {
        FeasibleSet::SimplexLeq(s) => (vec![0.0; s.dim()], vec![s.radius(); s.dim()]),
        FeasibleSet::Simplex(s) => (vec![0.0; s.dim()], vec![1.0; s.dim()]),
        FeasibleSet::Box(b) => (b.lower().to_vec(), b.upper().to_vec()),
        FeasibleSet::Product(p) => {
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            for f in p.factors() {
                let (l, h) = bounding_box(f);
                lo.extend(l);
                hi.extend(h);
            }
            (lo, hi)
        }
    }
}

fn check_grid(set: &FeasibleSet, grid: &GridSpec) -> Result<()> {
    if set.dim() > MAX_GRID_DIM {
        return Err(Error::InvalidArgument("grid oracles support dimension <= 3"));
    }
    Error::check_dim(set.dim(), grid.dim())
}

/// Membership slack for grid points; simplex grids land on the boundary
/// only up to rounding.
const GRID_TOL: f64 = 1e-9;

/// Grid estimate of a saddle value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSaddle {
    /// Smallest `f(x) + max_i h_i(x)` over the feasible grid points.
    pub value: f64,
    pub x: Vec<f64>,
    /// The true value lies in `[value - error_bound, value]`.
    pub error_bound: f64,
    pub points: u64,
}

/// `min_{x in X} max_{z in simplex} f(x) + <h(x), z>` on a grid.
///
/// The inner maximum is exact (largest row). The error bound is the
/// value-Lipschitz constant of `f + max_i h_i` times a cell diagonal.
pub fn grid_saddle(problem: &SaddleProblem, grid: &GridSpec) -> Result<GridSaddle> {
    let set = problem.x_set();
    check_grid(set, grid)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut points = 0u64;
    grid.for_each(|x| {
        if !set.contains(x, GRID_TOL) {
            return;
        }
        points += 1;
        let f = problem.objective().map_or(0.0, |o| o.value(x));
        let inner = problem.rows().iter().map(|r| r.value(x)).fold(f64::NEG_INFINITY, f64::max);
        let v = f + inner;
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, x.to_vec()));
        }
    });
    let (value, x) = best.ok_or(Error::InvalidArgument("no grid point inside the set"))?;
    let m_obj = problem.objective().map_or(0.0, |o| o.constants().value_lipschitz);
    let m_rows = problem.rows().iter().map(|r| r.constants().value_lipschitz).fold(0.0, f64::max);
    ensure_value(value)?;
    Ok(GridSaddle { value, x, error_bound: (m_obj + m_rows) * grid.diagonal(), points })
}

fn ensure_value(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteInput)
    }
}

/// Grid minimizer of `f` over `X` intersected with `{h <= 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMin {
    pub x: Vec<f64>,
    pub value: f64,
    pub points: u64,
}

/// Minimizes over feasible grid points; infeasible points are skipped.
pub fn grid_minimize(
    objective: &dyn Oracle,
    set: &FeasibleSet,
    constraints: &[SharedOracle],
    grid: &GridSpec,
) -> Result<GridMin> {
    check_grid(set, grid)?;
    Error::check_dim(set.dim(), objective.dim())?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut points = 0u64;
    grid.for_each(|x| {
        if !set.contains(x, GRID_TOL) || constraints.iter().any(|h| h.value(x) > 0.0) {
            return;
        }
        points += 1;
        let v = objective.value(x);
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, x.to_vec()));
        }
    });
    let (value, x) = best.ok_or(Error::InvalidArgument("no feasible grid point"))?;
    ensure_value(value)?;
    Ok(GridMin { x, value, points })
}

/// `min_u u + (1/(alpha K)) sum_k [v_k - u]_+`, scanning the order statistics.
pub fn exact_cvar(values: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("cvar needs at least one sample"));
    }
    crate::vecops::ensure_finite(values)?;
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    let scale = 1.0 / (alpha * k as f64);
    // the objective is piecewise linear in u with kinks at the samples
    let mut tail: f64 = v.iter().sum();
    let mut best = f64::INFINITY;
    for (j, &u) in v.iter().enumerate() {
        // samples j.. are >= u
        let above = (k - j) as f64;
        best = best.min(u + scale * (tail - above * u));
        tail -= u;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ProxKind;
    use crate::oracle::{HingeSum, Linear, Quadratic, Rows};
    use alloc::sync::Arc;
    use approx::assert_abs_diff_eq;

    fn lin(c: Vec<f64>, c0: f64) -> SharedOracle {
        Arc::new(Linear::new(c, c0))
    }

    #[test]
    fn minimax_of_two_lines() {
        let p = SaddleProblem::new(
            None,
            vec![lin(vec![1.0], 0.0), lin(vec![-1.0], 0.3)],
            FeasibleSet::interval(0.0, 1.0).unwrap(),
            ProxKind::Entropy,
        )
        .unwrap();
        let g = grid_saddle(&p, &GridSpec::covering(p.x_set(), 1001).unwrap()).unwrap();
        assert_abs_diff_eq!(g.value, 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(g.x[0], 0.15, epsilon = 1e-12);
        assert!(g.error_bound <= 1e-3 + 1e-12);
    }

    #[test]
    fn constant_rows_give_their_max() {
        let p = SaddleProblem::new(
            None,
            vec![lin(vec![0.0, 0.0], 0.2), lin(vec![0.0, 0.0], 0.7), lin(vec![0.0, 0.0], -1.0)],
            FeasibleSet::simplex_leq(2, 1.0).unwrap(),
            ProxKind::Entropy,
        );
        // all-zero rows have no Lipschitz scale, so tilt them slightly
        assert!(p.is_err());
        let p = SaddleProblem::new(
            Some(lin(vec![0.0, 0.0], 0.0)),
            vec![lin(vec![1e-9, 0.0], 0.2), lin(vec![0.0, 1e-9], 0.7)],
            FeasibleSet::simplex_leq(2, 1.0).unwrap(),
            ProxKind::Entropy,
        )
        .unwrap();
        let g = grid_saddle(&p, &GridSpec::covering(p.x_set(), 11).unwrap()).unwrap();
        assert_abs_diff_eq!(g.value, 0.7, epsilon = 1e-8);
    }

    #[test]
    fn refinement_stays_within_bound() {
        // max(x + 2y - 0.5, 0.4 - x, y - x) over the unit box
        let p = SaddleProblem::new(
            None,
            vec![lin(vec![1.0, 2.0], -0.5), lin(vec![-1.0, 0.0], 0.4), lin(vec![-1.0, 1.0], 0.0)],
            FeasibleSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            ProxKind::Entropy,
        )
        .unwrap();
        let mut grid = GridSpec::covering(p.x_set(), 6).unwrap();
        let mut prev = grid_saddle(&p, &grid).unwrap();
        for _ in 0..5 {
            grid = grid.refined().unwrap();
            let next = grid_saddle(&p, &grid).unwrap();
            assert!(next.value <= prev.value + 1e-12);
            assert!(next.value >= prev.value - prev.error_bound - 1e-12);
            prev = next;
        }
        // analytic optimum: x = 0.4 - ... at y = 0: max(x - 0.5, 0.4 - x, -x) -> x = 0.45
        assert_abs_diff_eq!(prev.value, -0.05, epsilon = prev.error_bound);
    }

    #[test]
    fn grid_minimize_examples() {
        let set = FeasibleSet::interval(0.0, 1.0).unwrap();
        let q = Quadratic::new(2.0, vec![0.8], 0.0, 1.0);
        let g = GridSpec::covering(&set, 101).unwrap();
        let m = grid_minimize(&q, &set, &[], &g).unwrap();
        assert_abs_diff_eq!(m.x[0], 0.8, epsilon = 1e-12);

        let simplex = FeasibleSet::simplex(3).unwrap();
        let l = Linear::new(vec![0.3, -0.2, 0.1], 0.0);
        let m = grid_minimize(&l, &simplex, &[], &GridSpec::covering(&simplex, 21).unwrap()).unwrap();
        assert_abs_diff_eq!(m.value, -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(m.x[1], 1.0, epsilon = 1e-9);

        // f = x s.t. 0.3 - x <= 0
        let f = Linear::new(vec![1.0], 0.0);
        let m = grid_minimize(&f, &set, &[lin(vec![-1.0], 0.3)], &GridSpec::covering(&set, 97).unwrap()).unwrap();
        assert!(m.value >= 0.3 && m.value <= 0.3 + 1.0 / 96.0);
    }

    #[test]
    fn grid_limits() {
        assert!(matches!(
            GridSpec::new(vec![(0.0, 1.0, 1000), (0.0, 1.0, 1000), (0.0, 1.0, 1000)]),
            Err(Error::GridTooLarge(1_000_000_000))
        ));
        assert!(GridSpec::new(vec![(0.0, 1.0, 1)]).is_err());
        let set = FeasibleSet::simplex_leq(4, 1.0).unwrap();
        let g = GridSpec::new(vec![(0.0, 1.0, 3); 4]).unwrap();
        let f = Linear::new(vec![1.0; 4], 0.0);
        assert!(grid_minimize(&f, &set, &[], &g).is_err());
    }

    #[test]
    fn cvar_examples() {
        assert_abs_diff_eq!(exact_cvar(&[0.7; 5], 0.2).unwrap(), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(exact_cvar(&[0.0, 1.0], 0.5).unwrap(), 1.0, epsilon = 1e-15);
        let v = [0.3, -1.2, 2.0, 0.5, 0.1];
        let mean = v.iter().sum::<f64>() / 5.0;
        assert_abs_diff_eq!(exact_cvar(&v, 0.999).unwrap(), mean, epsilon = 1e-2);
        // mean of the worst fifth
        assert_abs_diff_eq!(exact_cvar(&v, 0.2).unwrap(), 2.0, epsilon = 1e-12);
        assert!(matches!(exact_cvar(&v, 1.0), Err(Error::BadAlpha(_))));
        assert!(matches!(exact_cvar(&v, 0.0), Err(Error::BadAlpha(_))));
    }

    #[test]
    fn cvar_matches_smoothed_hinge_within_slack() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let k = rng.random_range(3..40);
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let alpha = rng.random_range(0.05..0.95);
            let exact = exact_cvar(&v, alpha).unwrap();
            // u + sum_k (1/(alpha K)) [v_k - u]_+ as an oracle in u
            let h = HingeSum::new(
                vec![1.0],
                0.0,
                Rows::new(k, 1, vec![-1.0; k]).unwrap(),
                v.clone(),
                vec![1.0 / (alpha * k as f64); k],
            )
            .unwrap();
            let eta = 1e-3;
            let d_u = h.smoothing().unwrap().d_u;
            let set = FeasibleSet::interval(-1.0, 1.0).unwrap();
            let grid = GridSpec::covering(&set, 20001).unwrap();
            let mut smooth_min = f64::INFINITY;
            let mut g = [0.0];
            grid.for_each(|u| smooth_min = smooth_min.min(h.eval_smoothed(u, eta, &mut g)));
            let exact_grid = grid_minimize(&h, &set, &[], &grid).unwrap().value;
            assert_abs_diff_eq!(exact_grid, exact, epsilon = 1e-3);
            assert!(smooth_min <= exact + 1e-12);
            assert!(smooth_min >= exact - eta * d_u * d_u - 1e-3);
        }
    }
}
