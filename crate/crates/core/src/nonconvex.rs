//! Nonconvex objectives under convex constraints.
//!
//! `f` is smooth with lower curvature `lc`:
//! `f(x) - f(y) - <grad f(y), x - y> >= -(lc / 2) |x - y|^2`.
//!
//! * [`ipp_lcg`] runs inexact proximal-point steps, each a convex problem
//!   `f + lc |x - x_prev|^2` solved by LCG.
//! * [`dncg`] runs conditional gradient on the smoothed Lagrangian
//!   `F(x) = f(x) + <y(x), h(x)> - (c/2)|y(x)|^2`, `y(x) = max(h(x)/c, 0)`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::geometry::FeasibleSet;
use crate::level::{lcg_solve, ConstrainedProblem, LevelConfig, Termination};
use crate::oracle::{eval_checked, FixedSmoothing, Quadratic, SharedOracle, Sum};
use crate::vecops::{argmin, axpy, dist2, dot, ensure_finite, lerp_into, positive_part_norm};
use crate::{Error, Result};

#[derive(Clone)]
pub struct NonconvexProblem {
    objective: SharedOracle,
    lower_curvature: f64,
    constraints: Vec<SharedOracle>,
    x_set: FeasibleSet,
}

impl NonconvexProblem {
    pub fn new(
        objective: SharedOracle,
        lower_curvature: f64,
        constraints: Vec<SharedOracle>,
        x_set: FeasibleSet,
    ) -> Result<Self> {
        if !(lower_curvature >= 0.0 && lower_curvature.is_finite()) {
            return Err(Error::InvalidConstant { name: "lower_curvature", value: lower_curvature });
        }
        let n = x_set.dim();
        Error::check_dim(n, objective.dim())?;
        for c in &constraints {
            Error::check_dim(n, c.dim())?;
        }
        Ok(Self { objective, lower_curvature, constraints, x_set })
    }

    pub fn dim(&self) -> usize {
        self.x_set.dim()
    }

    pub fn objective(&self) -> &SharedOracle {
        &self.objective
    }

    pub fn lower_curvature(&self) -> f64 {
        self.lower_curvature
    }

    pub fn constraints(&self) -> &[SharedOracle] {
        &self.constraints
    }

    pub fn x_set(&self) -> &FeasibleSet {
        &self.x_set
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x)).collect()
    }

    /// `|[h(x)]_+|` (Euclidean).
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        positive_part_norm(&self.constraint_values(x))
    }

    /// `(|M_h|, |L_h|)` over the constraint list.
    pub fn constraint_norms(&self) -> (f64, f64) {
        let (mut m2, mut l2) = (0.0, 0.0);
        for c in &self.constraints {
            let k = c.constants();
            m2 += k.value_lipschitz * k.value_lipschitz;
            l2 += k.grad_lipschitz * k.grad_lipschitz;
        }
        (m2.sqrt(), l2.sqrt())
    }

    /// Same problem with `f` treated as convex, for LCG.
    pub fn as_convex(&self) -> Result<ConstrainedProblem> {
        ConstrainedProblem::new(self.objective.clone(), self.constraints.clone(), self.x_set.clone())
    }

    /// Largest violation of the lower-curvature inequality over random pairs
    /// of feasible points; zero when the declared constant holds.
    pub fn lower_curvature_violation<R: Rng + ?Sized>(&self, rng: &mut R, pairs: usize) -> f64 {
        let n = self.dim();
        let mut gy = vec![0.0; n];
        let mut gx = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let x = self.x_set.sample(rng);
            let y = self.x_set.sample(rng);
            let fy = self.objective.eval(&y, &mut gy);
            let fx = self.objective.eval(&x, &mut gx);
            let d = dist2(&x, &y);
            let mut lin = fy;
            for i in 0..n {
                lin += gy[i] * (x[i] - y[i]);
            }
            let slack = fx - lin + 0.5 * self.lower_curvature * d * d;
            worst = worst.max(-slack);
        }
        worst
    }

    /// Replaces nonsmooth smoothable constraints by their `eta`-smoothed
    /// versions with `eta = |M_h| D^3 / K^(1/8)`; returns the `eta` used.
    pub fn smoothed_for_horizon(&self, horizon: u64) -> Result<(NonconvexProblem, Option<f64>)> {
        let nonsmooth = |c: &SharedOracle| c.constants().grad_lipschitz.is_infinite();
        if !self.constraints.iter().any(nonsmooth) {
            return Ok((self.clone(), None));
        }
        let (m_h, _) = self.constraint_norms();
        let d = self.x_set.diameter();
        let eta = Error::positive("eta", m_h * d * d * d / (horizon.max(1) as f64).powf(0.125))?;
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            if !nonsmooth(c) {
                constraints.push(c.clone());
            } else if c.smoothing().is_some() {
                constraints.push(Arc::new(FixedSmoothing { inner: c.clone(), eta }) as SharedOracle);
            } else {
                return Err(Error::InvalidArgument("nonsmooth constraint has no smoothing structure"));
            }
        }
        let p = NonconvexProblem { constraints, ..self.clone() };
        Ok((p, Some(eta)))
    }
}

/// `Q(x) = <g, x> - min_{v in X} <g, v>` for the gradient `g` taken at `x`.
pub fn wolfe_gap(set: &FeasibleSet, grad: &[f64], x: &[f64]) -> Result<f64> {
    Error::check_dim(set.dim(), x.len())?;
    let m = set.support_min(grad)?;
    Ok((dot(grad, x) - m).max(0.0))
}

/// Problem paired with a dual smoothing parameter `c`.
#[derive(Clone)]
pub struct SmoothedLagrangian {
    pub base: NonconvexProblem,
    c: f64,
}

/// Value, gradient and multipliers of the smoothed Lagrangian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianPoint {
    pub value: f64,
    pub f_value: f64,
    pub h_values: Vec<f64>,
    pub y: Vec<f64>,
    pub grad: Vec<f64>,
}

impl SmoothedLagrangian {
    pub fn new(base: NonconvexProblem, c: f64) -> Result<Self> {
        let c = Error::positive("c", c)?;
        Ok(Self { base, c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `y(x) = max(h(x)/c, 0)`.
    pub fn multipliers(&self, h_values: &[f64]) -> Vec<f64> {
        h_values.iter().map(|h| (h / self.c).max(0.0)).collect()
    }

    pub fn eval(&self, x: &[f64]) -> Result<LagrangianPoint> {
        let n = self.base.dim();
        let mut grad = vec![0.0; n];
        let f_value = eval_checked(self.base.objective.as_ref(), x, &mut grad)?;
        let mut gh = vec![0.0; n];
        let mut h_values = Vec::with_capacity(self.base.constraints.len());
        let mut y = Vec::with_capacity(self.base.constraints.len());
        let mut value = f_value;
        for c in &self.base.constraints {
            let h = eval_checked(c.as_ref(), x, &mut gh)?;
            let yi = (h / self.c).max(0.0);
            if yi > 0.0 {
                axpy(yi, &gh, &mut grad);
            }
            value += yi * h - 0.5 * self.c * yi * yi;
            h_values.push(h);
            y.push(yi);
        }
        Ok(LagrangianPoint { value, f_value, h_values, y, grad })
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?.value)
    }

    pub fn wolfe_gap(&self, x: &[f64]) -> Result<f64> {
        let p = self.eval(x)?;
        wolfe_gap(&self.base.x_set, &p.grad, x)
    }

    /// `L_c = L_f + |M_h||L_h| D / c + |M_h|^2 / c`.
    pub fn lipschitz(&self) -> f64 {
        let l_f = self.base.objective.constants().grad_lipschitz;
        let (m_h, l_h) = self.base.constraint_norms();
        let d = self.base.x_set.diameter();
        l_f + m_h * l_h * d / self.c + m_h * m_h / self.c
    }
}

/// Step size and dual smoothing rules for DNCG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DncgSchedule {
    /// `c = K^(-1/4)`, `alpha = K^(-1/2)` from the known horizon `K`.
    Horizon,
    /// `c_k = k^(-1/4)`, `alpha_k = k^(-1/2)`; no horizon needed, not covered
    /// by the horizon-based rate.
    Anytime,
    Fixed { c: f64, alpha: f64 },
}

impl DncgSchedule {
    /// `(c_k, alpha_k)` for step `k` of a `horizon`-step run.
    pub fn at(&self, k: u64, horizon: u64) -> (f64, f64) {
        match *self {
            DncgSchedule::Horizon => {
                let kk = horizon as f64;
                (kk.powf(-0.25), kk.powf(-0.5))
            }
            DncgSchedule::Anytime => {
                let kk = k.max(1) as f64;
                (kk.powf(-0.25), kk.powf(-0.5))
            }
            DncgSchedule::Fixed { c, alpha } => (c, alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DncgConfig {
    pub horizon: u64,
    pub schedule: DncgSchedule,
    /// Defaults to the zero-cost LMO vertex.
    pub x0: Option<Vec<f64>>,
}

impl DncgConfig {
    pub fn new(horizon: u64) -> Self {
        Self { horizon, schedule: DncgSchedule::Horizon, x0: None }
    }
}

/// Measures at iterate `x_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DncgRecord {
    pub k: u64,
    pub wolfe_gap: f64,
    /// `|[h(x_k)]_+|^2` on the (possibly smoothed) constraints.
    pub infeasibility_sq: f64,
    pub f_value: f64,
    /// Smoothed Lagrangian value at `x_k`.
    pub lagrangian: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DncgOutput {
    /// Iterate with the smallest Wolfe gap.
    pub x_hat: Vec<f64>,
    pub k_hat: u64,
    pub wolfe_gap: f64,
    pub infeasibility_sq: f64,
    /// Same, on the unsmoothed constraints.
    pub infeasibility_sq_exact: f64,
    pub f_value: f64,
    /// Step-weighted mean of `Q(x_{k-1})` over `k = 1..K`.
    pub mean_gap: f64,
    /// Run-data bound on `min_k Q(x_k)` from the summed descent inequality,
    /// `(F(x_0) - F(x_K) + L_c D^2 sum alpha_k^2) / sum alpha_k`; only for
    /// schedules with a fixed `c`.
    pub gap_certificate: Option<f64>,
    /// `c` at `x_hat`.
    pub c: f64,
    pub lipschitz: f64,
    pub eta: Option<f64>,
    pub x_last: Vec<f64>,
    pub conforming: bool,
    pub trace: Vec<DncgRecord>,
}

/// Right-hand side of `|[h(x)]_+|^2 <= c (Q(x) + (lc/2) D^2 + M_f D)`.
pub fn dncg_violation_bound(problem: &NonconvexProblem, c: f64, wolfe_gap: f64) -> f64 {
    let d = problem.x_set.diameter();
    let m_f = problem.objective.constants().value_lipschitz;
    c * (wolfe_gap + 0.5 * problem.lower_curvature * d * d + m_f * d)
}

/// Direct nonconvex conditional gradient on the smoothed Lagrangian.
pub fn dncg(problem: &NonconvexProblem, cfg: &DncgConfig) -> Result<DncgOutput> {
    if cfg.horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive"));
    }
    if let DncgSchedule::Fixed { c, alpha } = cfg.schedule {
        Error::positive("c", c)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidConstant { name: "alpha", value: alpha });
        }
    }
    let (smoothed, eta) = problem.smoothed_for_horizon(cfg.horizon)?;
    let set = smoothed.x_set.clone();
    let mut x = match &cfg.x0 {
        Some(x0) => {
            Error::check_dim(problem.dim(), x0.len())?;
            ensure_finite(x0)?;
            if !set.contains(x0, 1e-9) {
                return Err(Error::InvalidArgument("start point outside the feasible set"));
            }
            x0.clone()
        }
        None => set.zero_vertex(),
    };
    let k_max = cfg.horizon;
    let mut lag = SmoothedLagrangian::new(smoothed, cfg.schedule.at(1, k_max).0)?;
    let mut p = vec![0.0; x.len()];
    let mut trace = Vec::with_capacity(k_max as usize + 1);
    let mut best: Option<(u64, f64, Vec<f64>)> = None;

    let mut record = |k: u64, x: &[f64], lag: &SmoothedLagrangian, p: &mut [f64]| -> Result<f64> {
        let pt = lag.eval(x)?;
        set.lmo_into(&pt.grad, p)?;
        let q = (dot(&pt.grad, x) - dot(&pt.grad, p)).max(0.0);
        let infeas = positive_part_norm(&pt.h_values);
        trace.push(DncgRecord {
            k,
            wolfe_gap: q,
            infeasibility_sq: infeas * infeas,
            f_value: pt.f_value,
            lagrangian: pt.value,
            c: lag.c,
        });
        if best.as_ref().is_none_or(|b| q < b.1) {
            best = Some((k, q, x.to_vec()));
        }
        Ok(q)
    };

    let (mut sum_a, mut sum_a2, mut sum_aq) = (0.0, 0.0, 0.0);
    for k in 1..=k_max {
        let (c, alpha) = cfg.schedule.at(k, k_max);
        lag.c = c;
        // the gap at x_{k-1} comes with the LMO vertex p_k for free
        let q = record(k - 1, &x, &lag, &mut p)?;
        sum_a += alpha;
        sum_a2 += alpha * alpha;
        sum_aq += alpha * q;
        lerp_into(&mut x, &p, alpha);
    }
    lag.c = cfg.schedule.at(k_max, k_max).0;
    record(k_max, &x, &lag, &mut p)?;

    let gap_certificate = match cfg.schedule {
        DncgSchedule::Anytime => None,
        _ => {
            let d = set.diameter();
            let drop = trace[0].lagrangian - trace[k_max as usize].lagrangian;
            Some((drop + lag.lipschitz() * d * d * sum_a2) / sum_a)
        }
    };
    let (k_hat, _, x_hat) = best.expect("at least one record");
    let rec = trace[k_hat as usize];
    let exact = problem.infeasibility(&x_hat);
    lag.c = rec.c;
    Ok(DncgOutput {
        mean_gap: sum_aq / sum_a,
        gap_certificate,
        k_hat,
        wolfe_gap: rec.wolfe_gap,
        infeasibility_sq: rec.infeasibility_sq,
        infeasibility_sq_exact: exact * exact,
        f_value: rec.f_value,
        c: rec.c,
        lipschitz: lag.lipschitz(),
        eta,
        x_last: x,
        conforming: matches!(cfg.schedule, DncgSchedule::Horizon),
        trace,
        x_hat,
    })
}

/// Approximate KKT measures of a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `sum_i |y_i h_i(x)|`.
    pub complementarity: f64,
    /// Wolfe gap of `grad f + sum_i y_i grad h_i` at `x`, standing in for the
    /// normal-cone distance.
    pub stationarity: f64,
    /// `|x - x_prev|^2`; zero when no previous point applies.
    pub proximity: f64,
    /// `|[h(x)]_+|`.
    pub infeasibility: f64,
}

pub fn kkt_measures(problem: &NonconvexProblem, x: &[f64], y: &[f64]) -> Result<KktReport> {
    Error::check_dim(problem.constraints.len(), y.len())?;
    if y.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("multipliers must be nonnegative"));
    }
    let n = problem.dim();
    let mut grad = vec![0.0; n];
    eval_checked(problem.objective.as_ref(), x, &mut grad)?;
    let mut gh = vec![0.0; n];
    let mut h_values = Vec::with_capacity(y.len());
    let mut complementarity = 0.0;
    for (c, yi) in problem.constraints.iter().zip(y) {
        let h = eval_checked(c.as_ref(), x, &mut gh)?;
        axpy(*yi, &gh, &mut grad);
        complementarity += (yi * h).abs();
        h_values.push(h);
    }
    Ok(KktReport {
        complementarity,
        stationarity: wolfe_gap(&problem.x_set, &grad, x)?,
        proximity: 0.0,
        infeasibility: positive_part_norm(&h_values),
    })
}

/// `f + lc |x - center|^2` under the original constraints.
pub fn build_prox_subproblem(problem: &NonconvexProblem, center: &[f64]) -> Result<ConstrainedProblem> {
    Error::check_dim(problem.dim(), center.len())?;
    ensure_finite(center)?;
    if !problem.x_set.contains(center, 1e-9) {
        return Err(Error::InvalidArgument("prox center outside the feasible set"));
    }
    let reach = problem.x_set.diameter();
    let prox: SharedOracle = Arc::new(Quadratic::new(problem.lower_curvature, center.to_vec(), 0.0, reach));
    let objective: SharedOracle = Arc::new(Sum::new(vec![problem.objective.clone(), prox])?);
    ConstrainedProblem::new(objective, problem.constraints.clone(), problem.x_set.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IppConfig {
    /// Number of proximal steps `J`.
    pub outer: u64,
    pub delta_f: f64,
    pub delta_h: f64,
    pub mu: f64,
    /// Per-subproblem LCG budgets and prox; `epsilon`, `mu` and `x0` are
    /// overwritten.
    pub level: LevelConfig,
    /// CGO iterations over the whole run.
    pub max_total_inner: Option<u64>,
    /// Defaults to the zero-cost LMO vertex.
    pub x0: Option<Vec<f64>>,
}

impl IppConfig {
    /// `delta_f = delta_h = epsilon`, `J = ceil(1 / epsilon)`.
    pub fn new(epsilon: f64, mu: f64) -> Self {
        let outer = if epsilon > 0.0 { (1.0 / epsilon).ceil().max(1.0) as u64 } else { 1 };
        Self {
            outer,
            delta_f: epsilon,
            delta_h: epsilon,
            mu,
            level: LevelConfig::default(),
            max_total_inner: None,
            x0: None,
        }
    }
}

/// One proximal step `x_{j-1} -> x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct IppStep {
    pub j: u64,
    pub f_prev: f64,
    pub f_value: f64,
    /// `f(x_{j-1}) - f(x_j)`.
    pub decrease: f64,
    /// LCG's bound on the subproblem optimality gap.
    pub sub_gap_bound: f64,
    pub termination: Termination,
    pub inner_iters: u64,
    pub kkt: KktReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IppOutput {
    /// `x_j` at the step with the smallest decrease.
    pub x: Vec<f64>,
    pub j_hat: u64,
    pub f_value: f64,
    pub kkt: KktReport,
    pub x_last: Vec<f64>,
    pub f0: f64,
    pub steps: Vec<IppStep>,
    pub inner_iters_total: u64,
    /// Subproblems whose LCG run ended on a budget.
    pub budget_hits: u64,
    /// The total CGO budget ran out before `J` steps.
    pub stopped_early: bool,
}

/// Inexact proximal point method with LCG subproblem solves.
pub fn ipp_lcg(problem: &NonconvexProblem, cfg: &IppConfig) -> Result<IppOutput> {
    if cfg.outer == 0 {
        return Err(Error::InvalidArgument("outer count must be positive"));
    }
    Error::positive("delta_f", cfg.delta_f)?;
    Error::positive("delta_h", cfg.delta_h)?;
    let mut x = match &cfg.x0 {
        Some(x0) => x0.clone(),
        None => problem.x_set.zero_vertex(),
    };
    let mut g = vec![0.0; problem.dim()];
    let f0 = eval_checked(problem.objective.as_ref(), &x, &mut g)?;
    let mut f_prev = f0;
    let mut left = cfg.max_total_inner;
    let mut steps: Vec<IppStep> = Vec::new();
    let mut iterates: Vec<Vec<f64>> = Vec::new();
    let mut inner_total = 0;
    let mut budget_hits = 0;
    let mut stopped_early = false;
    for j in 1..=cfg.outer {
        if left == Some(0) {
            stopped_early = true;
            break;
        }
        let sub = build_prox_subproblem(problem, &x)?;
        let lcfg = LevelConfig {
            epsilon: cfg.delta_f.min(cfg.delta_h),
            mu: cfg.mu,
            x0: Some(x.clone()),
            max_total_inner: match (left, cfg.level.max_total_inner) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
            ..cfg.level.clone()
        };
        let sol = lcg_solve(&sub, &lcfg)?;
        inner_total += sol.inner_iters_total;
        if let Some(l) = left.as_mut() {
            *l = l.saturating_sub(sol.inner_iters_total);
        }
        if sol.termination == Termination::BudgetExhausted {
            budget_hits += 1;
        }
        let f_value = eval_checked(problem.objective.as_ref(), &sol.x, &mut g)?;
        let y: Vec<f64> = if sol.gamma > crate::level::GAMMA_FLOOR {
            sol.z[1..].iter().map(|z| z / sol.gamma).collect()
        } else {
            vec![0.0; problem.constraints.len()]
        };
        let mut kkt = kkt_measures(problem, &sol.x, &y)?;
        let d = dist2(&sol.x, &x);
        kkt.proximity = d * d;
        steps.push(IppStep {
            j,
            f_prev,
            f_value,
            decrease: f_prev - f_value,
            sub_gap_bound: sol.f_gap_bound,
            termination: sol.termination,
            inner_iters: sol.inner_iters_total,
            kkt,
        });
        f_prev = f_value;
        x = sol.x;
        iterates.push(x.clone());
    }
    let decreases: Vec<f64> = steps.iter().map(|s| s.decrease).collect();
    let i = argmin(&decreases).ok_or(Error::InvalidArgument("no proximal step completed"))?;
    let step = &steps[i];
    Ok(IppOutput {
        x: iterates[i].clone(),
        j_hat: step.j,
        f_value: step.f_value,
        kkt: step.kkt,
        x_last: x,
        f0,
        inner_iters_total: inner_total,
        budget_hits,
        stopped_early,
        steps,
    })
}

/// Accuracy pair `(eps_J, eps'_J)` guaranteed for the IPP-LCG output, given
/// a strictly feasible point `slater` and a lower bound `f_lower` on the
/// optimal value. `None` when the constants make the bound vacuous.
pub fn ipp_kkt_bounds(
    problem: &NonconvexProblem,
    out: &IppOutput,
    cfg: &IppConfig,
    slater: &[f64],
    f_lower: f64,
) -> Result<Option<(f64, f64)>> {
    let h = problem.constraint_values(slater);
    ensure_finite(&h)?;
    let margin = -h.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let lc = problem.lower_curvature;
    if !(margin > 0.0) || !(lc > 0.0) {
        return Ok(None);
    }
    let d = problem.x_set.diameter();
    let f_slater = problem.objective.value(slater);
    let b = (f_slater - f_lower + lc * 0.5 * d * d) / margin;
    let tail = cfg.delta_f + b * cfg.delta_h;
    let j = out.steps.len().max(1) as f64;
    let f_last = out.steps.last().map_or(out.f0, |s| s.f_value);
    let eps = 2.0 / lc * tail;
    let eps_prime = 8.0 * lc / j * (out.f0 - f_last) + tail;
    Ok(Some((eps, eps_prime)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Constants, FnOracle, HingeSum, Linear};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn concave_toy() -> NonconvexProblem {
        // f = -(x - 0.2)^2, h = x - 0.6 on [0, 1]
        let f = FnOracle::new(1, Constants::new(2.0, 1.6), |x, g| {
            g[0] = -2.0 * (x[0] - 0.2);
            -(x[0] - 0.2) * (x[0] - 0.2)
        });
        NonconvexProblem::new(
            Arc::new(f),
            2.0,
            vec![Arc::new(Linear::new(vec![1.0], -0.6))],
            FeasibleSet::interval(0.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn convex_toy(lc: f64) -> NonconvexProblem {
        // f = (x - 0.8)^2, h = x - 0.5 on [0, 1]; optimum 0.5
        NonconvexProblem::new(
            Arc::new(Quadratic::new(1.0, vec![0.8], 0.0, 1.0)),
            lc,
            vec![Arc::new(Linear::new(vec![1.0], -0.5))],
            FeasibleSet::interval(0.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn wolfe_gap_examples() {
        let s = FeasibleSet::simplex(2).unwrap();
        assert_eq!(wolfe_gap(&s, &[1.0, 2.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(wolfe_gap(&s, &[1.0, 2.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(wolfe_gap(&s, &[3.0, 3.0], &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn prox_subproblem_examples() {
        let f = FnOracle::new(1, Constants::new(2.0, 2.0), |x, g| {
            g[0] = -2.0 * x[0];
            -x[0] * x[0]
        });
        let p = NonconvexProblem::new(Arc::new(f), 2.0, vec![], FeasibleSet::interval(0.0, 1.0).unwrap()).unwrap();
        let sub = build_prox_subproblem(&p, &[0.0]).unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(sub.objective().value(&[x]), x * x, epsilon = 1e-15);
        }
        let sub = build_prox_subproblem(&p, &[0.4]).unwrap();
        assert_abs_diff_eq!(sub.objective().value(&[0.4]), -0.16, epsilon = 1e-15);
        assert!(build_prox_subproblem(&p, &[1.5]).is_err());
    }

    #[test]
    fn multipliers_maximize_the_inner_concave_problem() {
        let lag = SmoothedLagrangian::new(convex_toy(0.0), 0.3).unwrap();
        for h in [-1.0, -0.1, 0.0, 0.05, 0.7] {
            let y = lag.multipliers(&[h])[0];
            // max_{y >= 0} h y - c y^2 / 2
            let obj = |v: f64| h * v - 0.15 * v * v;
            let grid_best = (0..=100_000).map(|i| obj(i as f64 * 5e-5)).fold(f64::NEG_INFINITY, f64::max);
            assert!(obj(y) >= grid_best - 1e-8);
        }
    }

    #[test]
    fn lagrangian_gradient_ratio_below_lc() {
        let lag = SmoothedLagrangian::new(convex_toy(0.0), 0.25).unwrap();
        let lc = lag.lipschitz();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = rng.random::<f64>();
            let b = rng.random::<f64>();
            let ga = lag.eval(&[a]).unwrap().grad[0];
            let gb = lag.eval(&[b]).unwrap().grad[0];
            if (a - b).abs() > 1e-12 {
                assert!((ga - gb).abs() / (a - b).abs() <= lc + 1e-9);
            }
        }
    }

    #[test]
    fn dncg_reaches_the_constrained_optimum() {
        let p = convex_toy(0.0);
        let out = dncg(&p, &DncgConfig::new(4096)).unwrap();
        assert!((out.x_hat[0] - 0.5).abs() < 0.1, "{:?}", out.x_hat);
        let bound = dncg_violation_bound(&p, out.c, out.wolfe_gap);
        assert!(out.infeasibility_sq <= bound);
        assert!(out.conforming);
        assert_eq!(out.trace.len(), 4097);
        assert!(out.wolfe_gap <= out.gap_certificate.unwrap());
        assert!(out.mean_gap <= out.gap_certificate.unwrap());
    }

    #[test]
    fn nested_fixed_runs_share_a_prefix() {
        let p = concave_toy();
        let sched = DncgSchedule::Fixed { c: 0.2, alpha: 0.05 };
        let short = dncg(&p, &DncgConfig { horizon: 100, schedule: sched, x0: Some(vec![0.9]) }).unwrap();
        let long = dncg(&p, &DncgConfig { horizon: 400, schedule: sched, x0: Some(vec![0.9]) }).unwrap();
        assert_eq!(short.trace[..], long.trace[..101]);
        assert!(long.wolfe_gap <= short.wolfe_gap);
        assert!(!long.conforming);
    }

    #[test]
    fn dncg_single_step() {
        let p = convex_toy(0.0);
        let cfg = DncgConfig { x0: Some(vec![0.2]), ..DncgConfig::new(1) };
        let out = dncg(&p, &cfg).unwrap();
        // c = alpha = 1; gradient at 0.2 is negative so the LMO picks 1
        assert_eq!(out.x_last, vec![1.0]);
    }

    #[test]
    fn dncg_without_active_constraints_is_plain_cg() {
        let p = NonconvexProblem::new(
            Arc::new(Quadratic::new(1.0, vec![0.3], 0.0, 1.0)),
            0.0,
            vec![Arc::new(Linear::new(vec![1.0], -2.0))],
            FeasibleSet::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let plain = NonconvexProblem::new(
            Arc::new(Quadratic::new(1.0, vec![0.3], 0.0, 1.0)),
            0.0,
            vec![],
            FeasibleSet::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let a = dncg(&p, &DncgConfig::new(300)).unwrap();
        let b = dncg(&plain, &DncgConfig::new(300)).unwrap();
        assert_eq!(a.x_last, b.x_last);
    }

    #[test]
    fn nonsmooth_constraints_are_smoothed() {
        let h = HingeSum::single(vec![1.0], -0.5).unwrap();
        let p = NonconvexProblem::new(
            Arc::new(Quadratic::new(1.0, vec![0.8], 0.0, 1.0)),
            0.0,
            vec![Arc::new(h)],
            FeasibleSet::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let out = dncg(&p, &DncgConfig::new(256)).unwrap();
        let eta = out.eta.unwrap();
        assert_abs_diff_eq!(eta, 1.0 / 256f64.powf(0.125), epsilon = 1e-12);
        assert!(out.lipschitz.is_finite());
    }

    #[test]
    fn kkt_measures_examples() {
        let p = convex_toy(0.0);
        let r = kkt_measures(&p, &[0.2], &[0.0]).unwrap();
        assert_eq!(r.complementarity, 0.0);
        assert_eq!(r.infeasibility, 0.0);
        // grad f(0.2) = -1.2, LMO at 1: Q = 1.2 * 0.8
        assert_abs_diff_eq!(r.stationarity, 0.96, epsilon = 1e-12);
        let r = kkt_measures(&p, &[0.5], &[0.6]).unwrap();
        assert_eq!(r.complementarity, 0.0);
        assert_abs_diff_eq!(r.stationarity, 0.0, epsilon = 1e-12);
        assert!(kkt_measures(&p, &[0.5], &[-1.0]).is_err());
    }

    #[test]
    fn ipp_single_step_returns_it() {
        let p = convex_toy(1.0);
        let cfg = IppConfig { outer: 1, x0: Some(vec![0.0]), ..IppConfig::new(1e-3, 0.9) };
        let out = ipp_lcg(&p, &cfg).unwrap();
        assert_eq!(out.steps.len(), 1);
        assert_eq!(out.j_hat, 1);
        assert_eq!(out.x, out.x_last);
        // argmin (x-0.8)^2 + x^2 on [0, 0.5] is 0.4
        assert!((out.x[0] - 0.4).abs() < 2e-2, "{:?}", out.x);
    }

    #[test]
    fn ipp_concave_toy_settles_on_the_boundary() {
        let p = concave_toy();
        let cfg = IppConfig { outer: 5, x0: Some(vec![1.0]), ..IppConfig::new(1e-3, 0.9) };
        let out = ipp_lcg(&p, &cfg).unwrap();
        assert!((out.x[0] - 0.6).abs() < 1e-2, "{:?}", out.x);
        let bounds = ipp_kkt_bounds(&p, &out, &cfg, &[0.3], -1.0).unwrap();
        assert!(bounds.is_some());
    }

    #[test]
    fn lower_curvature_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // curvature is exactly -2, so only rounding remains
        assert!(concave_toy().lower_curvature_violation(&mut rng, 500) < 1e-12);
        let f = FnOracle::new(1, Constants::new(2.0, 1.6), |x, g| {
            g[0] = -2.0 * x[0];
            -x[0] * x[0]
        });
        let bad = NonconvexProblem::new(Arc::new(f), 1.0, vec![], FeasibleSet::interval(0.0, 1.0).unwrap()).unwrap();
        assert!(bad.lower_curvature_violation(&mut rng, 500) > 0.0);
    }
}
