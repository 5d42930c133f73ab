//! Portfolio selection against a target index.
//!
//! Variables are laid out as `(x_1..x_N, [u], [v])`: asset weights on
//! `{x >= 0, sum x <= 1}`, then the CVaR threshold `u` and the cardinality
//! auxiliary `v` when the model has them.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::ModelProblem;
use crate::geometry::FeasibleSet;
use crate::level::ConstrainedProblem;
use crate::nonconvex::NonconvexProblem;
use crate::oracle::{HingeSum, Rows, SharedOracle, SigmoidSum, Sum};
use crate::vecops::dot;
use crate::{Error, Result};

/// `K` weekly samples of `N` asset returns and of the index return.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsData {
    /// `K x N`, row `k` holds `r_{1k}..r_{Nk}`.
    pub asset_returns: Rows,
    /// `R_1..R_K`.
    pub index_returns: Vec<f64>,
    pub asset_names: Vec<String>,
}

impl ReturnsData {
    pub fn new(asset_returns: Rows, index_returns: Vec<f64>, asset_names: Vec<String>) -> Result<Self> {
        if asset_returns.n_rows() == 0 || asset_returns.dim() == 0 {
            return Err(Error::InvalidArgument("returns data needs K >= 1 and N >= 1"));
        }
        Error::check_dim(asset_returns.n_rows(), index_returns.len())?;
        Error::check_dim(asset_returns.dim(), asset_names.len())?;
        for k in 0..asset_returns.n_rows() {
            crate::vecops::ensure_finite(asset_returns.row(k))?;
        }
        crate::vecops::ensure_finite(&index_returns)?;
        Ok(Self { asset_returns, index_returns, asset_names })
    }

    pub fn n_assets(&self) -> usize {
        self.asset_returns.dim()
    }

    pub fn n_samples(&self) -> usize {
        self.asset_returns.n_rows()
    }

    /// `R_k - sum_i r_ik x_i`.
    pub fn shortfall(&self, k: usize, x: &[f64]) -> f64 {
        self.index_returns[k] - dot(self.asset_returns.row(k), x)
    }

    /// Default CVaR threshold bounds: `[min_k (R_k - max_i r_ik), max_k R_k]`.
    pub fn default_u_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..self.n_samples() {
            let best = self.asset_returns.row(k).iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            lo = lo.min(self.index_returns[k] - best);
            hi = hi.max(self.index_returns[k]);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortfolioKind {
    CardFreeConvex,
    CardFreeNonconvex,
    CardConvex,
    CardNonconvex1,
    CardNonconvex2,
}

impl PortfolioKind {
    pub const ALL: [PortfolioKind; 5] = [
        PortfolioKind::CardFreeConvex,
        PortfolioKind::CardFreeNonconvex,
        PortfolioKind::CardConvex,
        PortfolioKind::CardNonconvex1,
        PortfolioKind::CardNonconvex2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PortfolioKind::CardFreeConvex => "card-free-convex",
            PortfolioKind::CardFreeNonconvex => "card-free-nonconvex",
            PortfolioKind::CardConvex => "card-convex",
            PortfolioKind::CardNonconvex1 => "card-nonconvex-1",
            PortfolioKind::CardNonconvex2 => "card-nonconvex-2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_convex(self) -> bool {
        matches!(self, PortfolioKind::CardFreeConvex | PortfolioKind::CardConvex)
    }

    pub fn has_cardinality(self) -> bool {
        !matches!(self, PortfolioKind::CardFreeConvex | PortfolioKind::CardFreeNonconvex)
    }
}

/// Model parameters; unused ones are ignored by each builder.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioParams {
    pub alpha: f64,
    pub theta: f64,
    pub psi: f64,
    pub u_bounds: Option<(f64, f64)>,
    pub v_bounds: (f64, f64),
}

impl Default for PortfolioParams {
    fn default() -> Self {
        Self { alpha: 0.05, theta: 1e-2, psi: 1.0, u_bounds: None, v_bounds: DEFAULT_V_BOUNDS }
    }
}

/// Bounds on the cardinality auxiliary `v`.
pub const DEFAULT_V_BOUNDS: (f64, f64) = (-1.0, 1.0);

/// Threshold above which a weight counts as a selected asset.
pub const ASSET_TOL: f64 = 1e-6;

#[derive(Clone)]
pub struct PortfolioModel {
    pub kind: PortfolioKind,
    pub problem: ModelProblem,
    pub n_assets: usize,
    pub u_index: Option<usize>,
    pub v_index: Option<usize>,
    pub params: PortfolioParams,
}

impl PortfolioModel {
    /// Asset-weight block of a full decision vector.
    pub fn weights<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.n_assets]
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::BadAlpha(alpha))
    }
}

fn check_psi(psi: f64) -> Result<()> {
    if psi >= 1.0 && psi.is_finite() {
        Ok(())
    } else {
        Err(Error::BadPsi(psi))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::BadTheta(theta))
    }
}

fn check_bounds(name: &'static str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidConstant { name, value: hi - lo })
    }
}

/// `u + (1/(alpha K)) sum_k [-u + R_k - <r_k, x>]_+` over `dim` variables.
fn cvar_objective(data: &ReturnsData, alpha: f64, dim: usize, u: usize) -> Result<HingeSum> {
    let (k, n) = (data.n_samples(), data.n_assets());
    let mut rows = vec![0.0; k * dim];
    for s in 0..k {
        let row = &mut rows[s * dim..(s + 1) * dim];
        for (a, r) in row.iter_mut().zip(data.asset_returns.row(s)) {
            *a = -r;
        }
        row[u] = -1.0;
        debug_assert!(u >= n);
    }
    let mut lin = vec![0.0; dim];
    lin[u] = 1.0;
    let w = 1.0 / (alpha * k as f64);
    HingeSum::new(lin, 0.0, Rows::new(k, dim, rows)?, data.index_returns.clone(), vec![w; k])
}

/// `N v + (1/Psi) sum_i [x_i - v]_+` over `dim` variables.
pub fn cardinality_constraint(n: usize, dim: usize, v: usize, psi: f64) -> Result<HingeSum> {
    check_psi(psi)?;
    let mut rows = vec![0.0; n * dim];
    for i in 0..n {
        rows[i * dim + i] = 1.0;
        rows[i * dim + v] = -1.0;
    }
    let mut lin = vec![0.0; dim];
    lin[v] = n as f64;
    HingeSum::new(lin, 0.0, Rows::new(n, dim, rows)?, vec![0.0; n], vec![1.0 / psi; n])
}

/// Sigmoid-smoothed sample risk `(1/K) sum_k sigmoid((R_k - <r_k, x>) / theta)`.
fn sigmoid_risk(data: &ReturnsData, theta: f64, dim: usize) -> Result<SigmoidSum> {
    let (k, n) = (data.n_samples(), data.n_assets());
    let mut rows = vec![0.0; k * dim];
    for s in 0..k {
        for (a, r) in rows[s * dim..s * dim + n].iter_mut().zip(data.asset_returns.row(s)) {
            *a = -r;
        }
    }
    SigmoidSum::new(Rows::new(k, dim, rows)?, data.index_returns.clone(), vec![1.0 / k as f64; k], theta)
}

fn weight_set(n: usize) -> Result<FeasibleSet> {
    FeasibleSet::simplex_leq(n, 1.0)
}

pub fn build_card_free_convex(data: &ReturnsData, alpha: f64, u_bounds: Option<(f64, f64)>) -> Result<PortfolioModel> {
    check_alpha(alpha)?;
    let n = data.n_assets();
    let ub = u_bounds.unwrap_or_else(|| data.default_u_bounds());
    check_bounds("u_bounds", ub)?;
    let set = FeasibleSet::product(vec![weight_set(n)?, FeasibleSet::interval(ub.0, ub.1)?])?;
    let f = cvar_objective(data, alpha, n + 1, n)?;
    let problem = ConstrainedProblem::new(Arc::new(f), vec![], set)?;
    Ok(PortfolioModel {
        kind: PortfolioKind::CardFreeConvex,
        problem: ModelProblem::Convex(problem),
        n_assets: n,
        u_index: Some(n),
        v_index: None,
        params: PortfolioParams { alpha, u_bounds: Some(ub), ..PortfolioParams::default() },
    })
}

pub fn build_card_free_nonconvex(data: &ReturnsData, theta: f64) -> Result<PortfolioModel> {
    check_theta(theta)?;
    let n = data.n_assets();
    let f = sigmoid_risk(data, theta, n)?;
    let lc = f.lower_curvature();
    let problem = NonconvexProblem::new(Arc::new(f), lc, vec![], weight_set(n)?)?;
    Ok(PortfolioModel {
        kind: PortfolioKind::CardFreeNonconvex,
        problem: ModelProblem::Nonconvex(problem),
        n_assets: n,
        u_index: None,
        v_index: None,
        params: PortfolioParams { theta, ..PortfolioParams::default() },
    })
}

pub fn build_card_convex(
    data: &ReturnsData,
    alpha: f64,
    psi: f64,
    u_bounds: Option<(f64, f64)>,
    v_bounds: (f64, f64),
) -> Result<PortfolioModel> {
    check_alpha(alpha)?;
    check_psi(psi)?;
    check_bounds("v_bounds", v_bounds)?;
    let n = data.n_assets();
    let ub = u_bounds.unwrap_or_else(|| data.default_u_bounds());
    check_bounds("u_bounds", ub)?;
    let set = FeasibleSet::product(vec![
        weight_set(n)?,
        FeasibleSet::interval(ub.0, ub.1)?,
        FeasibleSet::interval(v_bounds.0, v_bounds.1)?,
    ])?;
    let f = cvar_objective(data, alpha, n + 2, n)?;
    let h = cardinality_constraint(n, n + 2, n + 1, psi)?;
    let problem = ConstrainedProblem::new(Arc::new(f), vec![Arc::new(h)], set)?;
    Ok(PortfolioModel {
        kind: PortfolioKind::CardConvex,
        problem: ModelProblem::Convex(problem),
        n_assets: n,
        u_index: Some(n),
        v_index: Some(n + 1),
        params: PortfolioParams { alpha, psi, u_bounds: Some(ub), v_bounds, ..PortfolioParams::default() },
    })
}

pub fn build_card_nonconvex_1(data: &ReturnsData, theta: f64, psi: f64, v_bounds: (f64, f64)) -> Result<PortfolioModel> {
    check_theta(theta)?;
    check_psi(psi)?;
    check_bounds("v_bounds", v_bounds)?;
    let n = data.n_assets();
    let set = FeasibleSet::product(vec![weight_set(n)?, FeasibleSet::interval(v_bounds.0, v_bounds.1)?])?;
    let f = sigmoid_risk(data, theta, n + 1)?;
    let lc = f.lower_curvature();
    let h = cardinality_constraint(n, n + 1, n, psi)?;
    let problem = NonconvexProblem::new(Arc::new(f), lc, vec![Arc::new(h)], set)?;
    Ok(PortfolioModel {
        kind: PortfolioKind::CardNonconvex1,
        problem: ModelProblem::Nonconvex(problem),
        n_assets: n,
        u_index: None,
        v_index: Some(n),
        params: PortfolioParams { theta, psi, v_bounds, ..PortfolioParams::default() },
    })
}

pub fn build_card_nonconvex_2(data: &ReturnsData, theta: f64, psi: f64) -> Result<PortfolioModel> {
    check_theta(theta)?;
    check_psi(psi)?;
    let n = data.n_assets();
    let risk = sigmoid_risk(data, theta, n)?;
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    let penalty = SigmoidSum::new(Rows::new(n, n, eye)?, vec![0.0; n], vec![1.0 / psi; n], theta)?;
    let lc = risk.lower_curvature() + penalty.lower_curvature();
    let f = Sum::new(vec![Arc::new(risk) as SharedOracle, Arc::new(penalty)])?;
    let problem = NonconvexProblem::new(Arc::new(f), lc, vec![], weight_set(n)?)?;
    Ok(PortfolioModel {
        kind: PortfolioKind::CardNonconvex2,
        problem: ModelProblem::Nonconvex(problem),
        n_assets: n,
        u_index: None,
        v_index: None,
        params: PortfolioParams { theta, psi, ..PortfolioParams::default() },
    })
}

/// Builds any of the five models from one parameter set.
pub fn build_portfolio(kind: PortfolioKind, data: &ReturnsData, p: &PortfolioParams) -> Result<PortfolioModel> {
    match kind {
        PortfolioKind::CardFreeConvex => build_card_free_convex(data, p.alpha, p.u_bounds),
        PortfolioKind::CardFreeNonconvex => build_card_free_nonconvex(data, p.theta),
        PortfolioKind::CardConvex => build_card_convex(data, p.alpha, p.psi, p.u_bounds, p.v_bounds),
        PortfolioKind::CardNonconvex1 => build_card_nonconvex_1(data, p.theta, p.psi, p.v_bounds),
        PortfolioKind::CardNonconvex2 => build_card_nonconvex_2(data, p.theta, p.psi),
    }
}

/// Fraction of samples where the portfolio trails the index:
/// `(1/K) #{k : R_k - <r_k, x> > 0}`.
pub fn risk(x: &[f64], data: &ReturnsData) -> Result<f64> {
    Error::check_dim(data.n_assets(), x.len())?;
    let hits = (0..data.n_samples()).filter(|&k| data.shortfall(k, x) > 0.0).count();
    Ok(hits as f64 / data.n_samples() as f64)
}

pub fn count_assets(x: &[f64], tol: f64) -> usize {
    x.iter().filter(|v| **v > tol).count()
}

pub fn card_violation(x: &[f64], psi: usize, tol: f64) -> usize {
    count_assets(x, tol).saturating_sub(psi)
}

/// Cardinality budget: `floor(0.2 N)` up to 100 assets, `floor(0.05 N)`
/// beyond; never below 1.
pub fn psi_rule(n_assets: usize) -> usize {
    let psi = if n_assets <= 100 { n_assets / 5 } else { n_assets / 20 };
    psi.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{fd_check, Oracle};
    use alloc::string::ToString;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(r: &[Vec<f64>], big_r: &[f64]) -> ReturnsData {
        let n = r[0].len();
        ReturnsData::new(
            Rows::from_rows(n, r).unwrap(),
            big_r.to_vec(),
            (0..n).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    fn random_data(k: usize, n: usize, seed: u64) -> ReturnsData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.random_range(-0.05..0.06)).collect())
            .collect();
        let big: Vec<f64> = (0..k).map(|_| rng.random_range(-0.03..0.04)).collect();
        data(&r, &big)
    }

    fn convex(m: &PortfolioModel) -> &ConstrainedProblem {
        match &m.problem {
            ModelProblem::Convex(p) => p,
            ModelProblem::Nonconvex(_) => panic!("expected a convex model"),
        }
    }

    fn nonconvex(m: &PortfolioModel) -> &NonconvexProblem {
        match &m.problem {
            ModelProblem::Nonconvex(p) => p,
            ModelProblem::Convex(_) => panic!("expected a nonconvex model"),
        }
    }

    #[test]
    fn card_free_convex_examples() {
        let d = data(&[vec![0.1]], &[0.05]);
        let m = build_card_free_convex(&d, 0.5, Some((-1.0, 1.0))).unwrap();
        let f = convex(&m).objective();
        assert_abs_diff_eq!(f.value(&[1.0, -0.05]), -0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(f.value(&[0.0, 0.0]), 2.0 * 0.05, epsilon = 1e-15);
        assert!(matches!(build_card_free_convex(&d, 1.0, None), Err(Error::BadAlpha(_))));
    }

    #[test]
    fn sigmoid_risk_examples() {
        let d = random_data(30, 4, 1);
        let m = build_card_free_nonconvex(&d, 0.01).unwrap();
        let f = nonconvex(&m).objective();
        let at0: f64 = d.index_returns.iter().map(|r| crate::oracle::sigmoid(r / 0.01)).sum::<f64>() / 30.0;
        assert_abs_diff_eq!(f.value(&[0.0; 4]), at0, epsilon = 1e-14);
        // tiny theta recovers the indicator average away from zero margins
        let sharp = build_card_free_nonconvex(&d, 1e-9).unwrap();
        let x = [0.25, 0.25, 0.25, 0.25];
        assert_abs_diff_eq!(nonconvex(&sharp).objective().value(&x), risk(&x, &d).unwrap(), epsilon = 1e-9);
        assert!(matches!(build_card_free_nonconvex(&d, 0.0), Err(Error::BadTheta(_))));
    }

    #[test]
    fn cardinality_constraint_examples() {
        let n = 4;
        let psi = 2.0;
        let h = cardinality_constraint(n, n + 1, n, psi).unwrap();
        assert_eq!(h.value(&[0.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
        // x = e_1, v = -delta: N(-delta) + (1 + N delta) / psi
        for delta in [0.01, 0.1, 0.5] {
            let v = h.value(&[1.0, 0.0, 0.0, 0.0, -delta]);
            assert_abs_diff_eq!(v, -(n as f64) * delta + (1.0 + n as f64 * delta) / psi, epsilon = 1e-14);
        }
        let uniform = [0.25, 0.25, 0.25, 0.25, 0.0];
        let h = cardinality_constraint(n, n + 1, n, n as f64).unwrap();
        assert_abs_diff_eq!(h.value(&uniform), 0.25, epsilon = 1e-15);
        assert!(matches!(cardinality_constraint(n, n + 1, n, 0.5), Err(Error::BadPsi(_))));
    }

    #[test]
    fn nonconvex_1_shares_the_constraint() {
        let d = random_data(20, 3, 2);
        let a = build_card_convex(&d, 0.1, 2.0, None, DEFAULT_V_BOUNDS).unwrap();
        let b = build_card_nonconvex_1(&d, 0.01, 2.0, DEFAULT_V_BOUNDS).unwrap();
        let ha = &convex(&a).constraints()[0];
        let hb = &nonconvex(&b).constraints()[0];
        let (x, v) = ([0.2, 0.5, 0.1], -0.3);
        assert_eq!(ha.value(&[x[0], x[1], x[2], 0.0, v]), hb.value(&[x[0], x[1], x[2], v]));
    }

    #[test]
    fn card_nonconvex_2_penalty() {
        let d = random_data(10, 5, 3);
        let m = build_card_nonconvex_2(&d, 0.01, 2.0).unwrap();
        let free = build_card_free_nonconvex(&d, 0.01).unwrap();
        let f = nonconvex(&m).objective();
        let g = nonconvex(&free).objective();
        let zero = [0.0; 5];
        assert_abs_diff_eq!(f.value(&zero) - g.value(&zero), 5.0 / 4.0, epsilon = 1e-14);
        let x = [0.9, 0.0, 0.0, 0.0, 0.0];
        assert_abs_diff_eq!(f.value(&x) - g.value(&x), 0.5 + 4.0 * 0.25, epsilon = 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = random_data(25, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in PortfolioKind::ALL {
            let p = PortfolioParams { alpha: 0.1, theta: 0.05, psi: 2.0, ..PortfolioParams::default() };
            let m = build_portfolio(kind, &d, &p).unwrap();
            let (set, f): (&FeasibleSet, &SharedOracle) = match &m.problem {
                ModelProblem::Convex(c) => (c.x_set(), c.objective()),
                ModelProblem::Nonconvex(c) => (c.x_set(), c.objective()),
            };
            if kind.is_convex() {
                continue; // hinge objectives are nonsmooth
            }
            let pts: Vec<Vec<f64>> = (0..20).map(|_| set.sample(&mut rng)).collect();
            assert!(fd_check(f.as_ref(), &pts) < 1e-4, "{kind:?}");
        }
    }

    #[test]
    fn risk_examples() {
        let d = data(&[vec![0.1], vec![0.0]], &[0.05, 0.02]);
        assert_eq!(risk(&[1.0], &d).unwrap(), 0.5);
        assert_eq!(risk(&[0.0], &d).unwrap(), 1.0);
        let d2 = data(&[vec![0.1], vec![0.1]], &[0.05, 0.02]);
        assert_eq!(risk(&[1.0], &d2).unwrap(), 0.0);
        assert!(risk(&[1.0, 0.0], &d).is_err());
    }

    #[test]
    fn counting() {
        assert_eq!(count_assets(&[0.5, 1e-9, 0.2], 1e-6), 2);
        assert_eq!(count_assets(&[0.0; 3], 1e-6), 0);
        let x = [0.1; 7];
        assert_eq!(card_violation(&x, 5, 1e-6), 2);
        assert_eq!(card_violation(&x, 9, 1e-6), 0);
    }

    #[test]
    fn psi_rule_table_values() {
        for (n, psi) in [(28, 5), (49, 9), (82, 16), (83, 16), (442, 22), (1203, 60)] {
            assert_eq!(psi_rule(n), psi);
        }
        assert_eq!(psi_rule(3), 1);
    }

    #[test]
    fn u_bounds_default() {
        let d = data(&[vec![0.1, -0.2], vec![0.0, 0.3]], &[0.05, 0.02]);
        let (lo, hi) = d.default_u_bounds();
        assert_abs_diff_eq!(lo, 0.02 - 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.05, epsilon = 1e-15);
    }
}
