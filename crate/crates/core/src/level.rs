//! Level-set outer loops for `min f(x) s.t. h(x) <= 0, x in X`.
//!
//! Both loops solve the saddle subproblem
//! `phi(l) = min_x max{f(x) - l, h_1(x), ..., h_m(x)}` with CGO.
//! [`lcg_solve`] raises the level from below with the Newton-type update
//! `l += L_k / gamma_k`; [`mlcg_solve`] lowers it from a feasible start with
//! `l += U_k`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::cgo::{cgo_run_until, CgoConfig, CgoObserver, CgoOutput, CgoStatus, IterRecord, SaddleProblem};
use crate::geometry::{FeasibleSet, ProxKind};
use crate::oracle::{eval_checked, linearize, SharedOracle, Shifted};
use crate::vecops::{ensure_finite, norm2, positive_part_max, positive_part_norm};
use crate::{Error, Result};

/// `min f(x) s.t. h_i(x) <= 0, x in X` with convex `f`, `h_i`.
#[derive(Clone)]
pub struct ConstrainedProblem {
    objective: SharedOracle,
    constraints: Vec<SharedOracle>,
    x_set: FeasibleSet,
}

impl ConstrainedProblem {
    /// `constraints` may be empty (plain minimization over `X`).
    pub fn new(objective: SharedOracle, constraints: Vec<SharedOracle>, x_set: FeasibleSet) -> Result<Self> {
        let n = x_set.dim();
        Error::check_dim(n, objective.dim())?;
        for c in &constraints {
            Error::check_dim(n, c.dim())?;
        }
        Ok(Self { objective, constraints, x_set })
    }

    pub fn dim(&self) -> usize {
        self.x_set.dim()
    }

    pub fn objective(&self) -> &SharedOracle {
        &self.objective
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

    /// `|[h(x)]_+|_inf`.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        positive_part_max(&self.constraint_values(x))
    }
}

/// `l_1 = min_{x in X} f(x0) + <grad f(x0), x - x0>`.
pub fn init_level(problem: &ConstrainedProblem, x0: &[f64]) -> Result<f64> {
    let m = linearize(problem.objective.as_ref(), x0)?;
    let v = problem.x_set.lmo(&m.slope)?;
    Ok(m.eval(&v))
}

/// Saddle subproblem at level `l`: no objective, rows `(f - l, h_1, ..., h_m)`;
/// dual component 0 is the objective weight `gamma`.
pub fn build_level_subproblem(problem: &ConstrainedProblem, level: f64, prox: ProxKind) -> Result<SaddleProblem> {
    if !level.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let mut rows: Vec<SharedOracle> = Vec::with_capacity(problem.constraints.len() + 1);
    rows.push(Arc::new(Shifted::new(problem.objective.clone(), level)));
    rows.extend(problem.constraints.iter().cloned());
    SaddleProblem::new(None, rows, problem.x_set.clone(), prox)
}

/// Smallest admissible `gamma` for the level update.
pub const GAMMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelConfig {
    pub epsilon: f64,
    pub mu: f64,
    pub max_outer: u64,
    /// CGO iterations per outer step.
    pub max_inner: u64,
    /// Total CGO iterations over the whole run.
    pub max_total_inner: Option<u64>,
    pub tau_scale: f64,
    pub prox: ProxKind,
    /// Primal start; defaults to the zero-cost LMO vertex.
    pub x0: Option<Vec<f64>>,
    /// Start each CGO call from the previous outer iterate.
    pub warm_start: bool,
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            mu: 0.9,
            max_outer: 200,
            max_inner: 100_000,
            max_total_inner: None,
            tau_scale: 1.0,
            prox: ProxKind::Entropy,
            x0: None,
            warm_start: true,
        }
    }
}

impl LevelConfig {
    pub fn new(epsilon: f64, mu: f64) -> Self {
        Self { epsilon, mu, ..Self::default() }
    }

    fn validate(&self, lower_mu: f64) -> Result<()> {
        Error::positive("epsilon", self.epsilon)?;
        if !(self.mu > lower_mu && self.mu < 1.0) {
            return Err(Error::InvalidConstant { name: "mu", value: self.mu });
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidArgument("budgets must be positive"));
        }
        Ok(())
    }

    fn start(&self, problem: &ConstrainedProblem) -> Result<Vec<f64>> {
        match &self.x0 {
            Some(x) => {
                Error::check_dim(problem.dim(), x.len())?;
                ensure_finite(x)?;
                Ok(x.clone())
            }
            None => Ok(problem.x_set.zero_vertex()),
        }
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub k: u64,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub gamma: f64,
    pub inner_iters: u64,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    /// Outer, inner or total budget ran out; the best iterate is returned.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsSolution {
    pub x: Vec<f64>,
    pub f_value: f64,
    /// Level at the returned iterate.
    pub level: f64,
    /// `U_k` at the returned iterate; bounds `f(x) - level` and `max h(x)`.
    pub f_gap_bound: f64,
    pub lower: f64,
    /// `|[h(x)]_+|_inf`.
    pub infeasibility: f64,
    /// Heuristic lower bound on `f(x) - f*` from the final dual pair.
    pub certificate: Option<f64>,
    pub gamma: f64,
    pub z: Vec<f64>,
    /// Condition estimate used by MLCG.
    pub kappa: Option<f64>,
    pub outer_iters: u64,
    pub inner_iters_total: u64,
    pub termination: Termination,
    pub trace: Vec<LevelRecord>,
}

/// Receives inner CGO records (tagged with the outer index) and outer records.
pub trait LevelObserver {
    fn on_inner(&mut self, _k: u64, _rec: &IterRecord) {}
    fn on_outer(&mut self, _rec: &LevelRecord) {}
}

impl LevelObserver for () {}

struct Tagged<'a, O: ?Sized> {
    k: u64,
    inner: &'a mut O,
}

impl<O: LevelObserver + ?Sized> CgoObserver for Tagged<'_, O> {
    fn on_iter(&mut self, rec: &IterRecord) {
        self.inner.on_inner(self.k, rec);
    }
}

/// `-(|z| / gamma) |[h(x)]_+|` with `z` the constraint part of the dual.
pub fn optimality_certificate(gamma: f64, z_constraints: &[f64], h_values: &[f64]) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::GammaDegenerate(gamma));
    }
    ensure_finite(z_constraints)?;
    ensure_finite(h_values)?;
    let viol = positive_part_norm(h_values);
    if viol == 0.0 {
        return Ok(0.0);
    }
    Ok(-(norm2(z_constraints) / gamma) * viol)
}

/// `kappa = -U_1 / (l_1 - f_tilde)` clipped to `(0, 1]`; falls back to
/// `epsilon` when the ratio is undefined or nonpositive.
pub fn kappa_estimate(u1: f64, l1: f64, f_tilde: f64, epsilon: f64) -> f64 {
    let denom = l1 - f_tilde;
    if !(denom > 0.0) {
        return epsilon;
    }
    let k = -u1 / denom;
    if k > 0.0 {
        k.min(1.0)
    } else {
        epsilon
    }
}

struct Budget {
    total_left: Option<u64>,
    used: u64,
}

impl Budget {
    fn inner_cap(&self, per_call: u64) -> u64 {
        self.total_left.map_or(per_call, |t| t.min(per_call))
    }

    fn spend(&mut self, n: u64) {
        self.used += n;
        if let Some(t) = self.total_left.as_mut() {
            *t = t.saturating_sub(n);
        }
    }

    fn exhausted(&self) -> bool {
        self.total_left == Some(0)
    }
}

struct Ctx<'a> {
    problem: &'a ConstrainedProblem,
    cfg: &'a LevelConfig,
    budget: Budget,
    trace: Vec<LevelRecord>,
    best: Option<(CgoOutput, f64)>,
}

impl<'a> Ctx<'a> {
    fn new(problem: &'a ConstrainedProblem, cfg: &'a LevelConfig) -> Self {
        Self {
            problem,
            cfg,
            budget: Budget { total_left: cfg.max_total_inner, used: 0 },
            trace: Vec::new(),
            best: None,
        }
    }

    fn inner<O: LevelObserver + ?Sized>(
        &mut self,
        k: u64,
        level: f64,
        start: &[f64],
        observer: &mut O,
        stop: impl FnMut(&IterRecord) -> bool,
    ) -> Result<CgoOutput> {
        let sub = build_level_subproblem(self.problem, level, self.cfg.prox)?;
        let cgo = CgoConfig {
            epsilon: self.cfg.epsilon,
            mu: self.cfg.mu,
            max_iter: self.budget.inner_cap(self.cfg.max_inner),
            tau_scale: self.cfg.tau_scale,
            start: Some(start.to_vec()),
            smoothing: true,
        };
        let out = cgo_run_until(&sub, &cgo, &mut Tagged { k, inner: observer }, stop)?;
        self.budget.spend(out.iterations);
        let rec = LevelRecord {
            k,
            level,
            lower: out.lower,
            upper: out.upper,
            gamma: out.gamma,
            inner_iters: out.iterations,
            truncated: out.status == CgoStatus::Truncated,
        };
        observer.on_outer(&rec);
        self.trace.push(rec);
        if self.best.as_ref().is_none_or(|(b, _)| out.upper < b.upper) {
            self.best = Some((out.clone(), level));
        }
        Ok(out)
    }

    fn finish(self, out: &CgoOutput, level: f64, termination: Termination, kappa: Option<f64>) -> Result<EpsSolution> {
        let x = out.x.clone();
        let h = self.problem.constraint_values(&x);
        let mut g = vec![0.0; self.problem.dim()];
        let f_value = eval_checked(self.problem.objective.as_ref(), &x, &mut g)?;
        let certificate = if out.gamma > GAMMA_FLOOR {
            Some(optimality_certificate(out.gamma, &out.z[1..], &h)?)
        } else {
            None
        };
        Ok(EpsSolution {
            f_value,
            level,
            f_gap_bound: out.upper,
            lower: out.lower,
            infeasibility: positive_part_max(&h),
            certificate,
            gamma: out.gamma,
            z: out.z.clone(),
            kappa,
            outer_iters: self.trace.len() as u64,
            inner_iters_total: self.budget.used,
            termination,
            trace: self.trace,
            x,
        })
    }

    fn give_up(mut self, kappa: Option<f64>) -> Result<EpsSolution> {
        let (out, level) = self.best.take().expect("at least one outer iteration");
        self.finish(&out, level, Termination::BudgetExhausted, kappa)
    }
}

/// Level conditional gradient method (levels increase from below).
pub fn lcg_solve(problem: &ConstrainedProblem, cfg: &LevelConfig) -> Result<EpsSolution> {
    lcg_solve_observed(problem, cfg, &mut ())
}

pub fn lcg_solve_observed<O: LevelObserver + ?Sized>(
    problem: &ConstrainedProblem,
    cfg: &LevelConfig,
    observer: &mut O,
) -> Result<EpsSolution> {
    cfg.validate(0.5)?;
    let x0 = cfg.start(problem)?;
    let mut level = init_level(problem, &x0)?;
    let mut start = x0;
    let tol = (1.0 - cfg.mu) * cfg.epsilon;
    let mut ctx = Ctx::new(problem, cfg);
    for k in 1..=cfg.max_outer {
        let out = ctx.inner(k, level, &start, observer, |r| r.gap <= tol)?;
        if out.upper <= cfg.epsilon {
            return ctx.finish(&out, level, Termination::Converged, None);
        }
        if out.lower <= 0.0 || ctx.budget.exhausted() {
            // only reachable after truncation: no valid Newton step
            return ctx.give_up(None);
        }
        if out.gamma <= GAMMA_FLOOR {
            return Err(Error::GammaDegenerate(out.gamma));
        }
        level += out.lower / out.gamma;
        if cfg.warm_start {
            start = out.x;
        }
    }
    ctx.give_up(None)
}

/// Modified level method: levels decrease from `f(x0)` with `x0` feasible.
pub fn mlcg_solve(problem: &ConstrainedProblem, cfg: &LevelConfig) -> Result<EpsSolution> {
    mlcg_solve_observed(problem, cfg, &mut ())
}

pub fn mlcg_solve_observed<O: LevelObserver + ?Sized>(
    problem: &ConstrainedProblem,
    cfg: &LevelConfig,
    observer: &mut O,
) -> Result<EpsSolution> {
    cfg.validate(0.0)?;
    let x0 = cfg.start(problem)?;
    if !problem.x_set.contains(&x0, 1e-12) {
        return Err(Error::InvalidArgument("start point outside the feasible set"));
    }
    let viol = problem.infeasibility(&x0);
    if viol > 0.0 {
        return Err(Error::InfeasibleStart(viol));
    }
    let mut g = vec![0.0; problem.dim()];
    let l1 = eval_checked(problem.objective.as_ref(), &x0, &mut g)?;
    let f_tilde = init_level(problem, &x0)?;
    let eps = cfg.epsilon;
    let scale = 1.0 - cfg.mu;
    let mut ctx = Ctx::new(problem, cfg);

    // k = 1: the tolerance tracks the running estimate of kappa
    let out = ctx.inner(1, l1, &x0, observer, |r| {
        r.gap <= scale * kappa_estimate(r.upper, l1, f_tilde, eps) * eps
    })?;
    let kappa = kappa_estimate(out.upper, l1, f_tilde, eps);
    let mut level = l1;
    let mut out = out;
    let mut k = 1;
    loop {
        if out.lower >= -eps * kappa {
            return ctx.finish(&out, level, Termination::Converged, Some(kappa));
        }
        if out.upper >= 0.0 || k >= cfg.max_outer || ctx.budget.exhausted() {
            return ctx.give_up(Some(kappa));
        }
        level += out.upper;
        k += 1;
        let start = if cfg.warm_start { out.x.clone() } else { x0.clone() };
        let tol = scale * kappa * eps;
        out = ctx.inner(k, level, &start, observer, |r| r.gap <= tol)?;
    }
}
