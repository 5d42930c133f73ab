//! Conditional gradient oracle (CGO) for
//! `min_{x in X} max_{z in simplex} f(x) + <h(x), z>`.
//!
//! Each step extrapolates the row linearizations, takes an entropy (or
//! Euclidean) prox step on the dual, one LMO call on the primal, and
//! maintains an aggregated affine minorant. `L_t` (from the minorant) and
//! `U_t` (from exact values at `x_t`) bracket the saddle value.
//!
//! Rows carrying [`Smoothing`](crate::oracle::Smoothing) data are linearized
//! on their smoothed version with `eta^t = |B| D_X / (sqrt(t) D_U)` when the
//! smoothing path is enabled; `U_t` always uses exact values.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{prox_simplex_into, FeasibleSet, ProxKind, SimplexProx};
use crate::oracle::{eta_schedule, SharedOracle};
use crate::vecops::{all_finite, dot, lerp_into};
use crate::{Error, Result};

/// Problem-level constants resolved at build time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleConstants {
    /// `(sum_i M_i^2)^{1/2}` over the rows.
    pub m_bar: f64,
    pub d_x: f64,
    pub v_bar: f64,
    pub l_objective: f64,
    pub l_rows_max: f64,
    /// Any oracle constant came from sampling.
    pub estimated: bool,
}

pub struct SaddleProblem {
    objective: Option<SharedOracle>,
    rows: Vec<SharedOracle>,
    x_set: FeasibleSet,
    prox: SimplexProx,
    constants: SaddleConstants,
}

impl SaddleProblem {
    pub fn new(
        objective: Option<SharedOracle>,
        rows: Vec<SharedOracle>,
        x_set: FeasibleSet,
        prox_kind: ProxKind,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("saddle problem needs at least one row"));
        }
        let n = x_set.dim();
        for o in objective.iter().chain(&rows) {
            Error::check_dim(n, o.dim())?;
        }
        let prox = SimplexProx::new(prox_kind, rows.len())?;
        let mut m2 = 0.0;
        let mut l_rows_max: f64 = 0.0;
        let mut estimated = false;
        for r in &rows {
            let c = r.constants();
            m2 += c.value_lipschitz * c.value_lipschitz;
            l_rows_max = l_rows_max.max(c.grad_lipschitz);
            estimated |= c.estimated;
        }
        let l_objective = match &objective {
            Some(o) => {
                let c = o.constants();
                estimated |= c.estimated;
                c.grad_lipschitz
            }
            None => 0.0,
        };
        let constants = SaddleConstants {
            m_bar: m2.sqrt(),
            d_x: x_set.diameter(),
            v_bar: prox.v_bar(),
            l_objective,
            l_rows_max,
            estimated,
        };
        let scale = constants.m_bar * constants.d_x;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConstant { name: "m_bar * d_x", value: scale });
        }
        Ok(Self { objective, rows, x_set, prox, constants })
    }

    pub fn dim(&self) -> usize {
        self.x_set.dim()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SharedOracle] {
        &self.rows
    }

    pub fn objective(&self) -> Option<&SharedOracle> {
        self.objective.as_ref()
    }

    pub fn x_set(&self) -> &FeasibleSet {
        &self.x_set
    }

    pub fn prox(&self) -> &SimplexProx {
        &self.prox
    }

    pub fn constants(&self) -> &SaddleConstants {
        &self.constants
    }

    /// Whether any oracle exposes a smoothable structure.
    pub fn has_structure(&self) -> bool {
        self.objective
            .iter()
            .chain(&self.rows)
            .any(|o| o.smoothing().is_some_and(|s| s.d_u > 0.0 && s.b_norm > 0.0))
    }

    /// Exact `f(x) + max_i h_i(x)`.
    pub fn upper_value(&self, x: &[f64]) -> f64 {
        let f = self.objective.as_ref().map_or(0.0, |o| o.value(x));
        f + self
            .rows
            .iter()
            .map(|r| r.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Right side of the smooth-case rate bound
    /// `2 (L_f + max_i L_i) D^2 / (t+1) + M D / sqrt(t+1) (18 V + 7/6)`.
    pub fn gap_bound(&self, t: u64) -> f64 {
        let c = &self.constants;
        let t1 = (t + 1) as f64;
        2.0 * (c.l_objective + c.l_rows_max) * c.d_x * c.d_x / t1
            + c.m_bar * c.d_x / t1.sqrt() * (18.0 * c.v_bar + 7.0 / 6.0)
    }
}

/// Step sizes at iteration `t`: `(alpha, lambda, tau)` with
/// `alpha = 2/(t+1)`, `lambda = (t-1)/t`, `tau = 9 sqrt(t) M D`.
pub fn cgo_params(t: u64, m_bar: f64, d_x: f64) -> Result<(f64, f64, f64)> {
    if t == 0 {
        return Err(Error::InvalidArgument("iteration index starts at 1"));
    }
    Error::positive("m_bar", m_bar)?;
    Error::positive("d_x", d_x)?;
    let tf = t as f64;
    Ok((2.0 / (tf + 1.0), (tf - 1.0) / tf, 9.0 * tf.sqrt() * m_bar * d_x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgoConfig {
    pub epsilon: f64,
    pub mu: f64,
    pub max_iter: u64,
    /// Multiplier on the theoretical `tau_t`.
    pub tau_scale: f64,
    /// Primal start; defaults to the zero-cost LMO vertex.
    pub start: Option<Vec<f64>>,
    /// Linearize smoothable rows on their smoothed versions.
    pub smoothing: bool,
}

impl Default for CgoConfig {
    fn default() -> Self {
        Self { epsilon: 1e-3, mu: 0.9, max_iter: 100_000, tau_scale: 1.0, start: None, smoothing: true }
    }
}

impl CgoConfig {
    pub fn new(epsilon: f64, mu: f64) -> Self {
        Self { epsilon, mu, ..Self::default() }
    }

    pub fn tolerance(&self) -> f64 {
        (1.0 - self.mu) * self.epsilon
    }

    fn validate(&self) -> Result<()> {
        Error::positive("epsilon", self.epsilon)?;
        Error::positive("tau_scale", self.tau_scale)?;
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidConstant { name: "mu", value: self.mu });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Per-iteration record passed to observers.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub t: u64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    /// Nonzero coordinates of `x_t`.
    pub support: usize,
    pub gamma: f64,
    /// Largest smoothing parameter used this step (0 when smooth).
    pub eta_max: f64,
}

pub trait CgoObserver {
    fn on_iter(&mut self, rec: &IterRecord);
}

impl CgoObserver for () {
    fn on_iter(&mut self, _: &IterRecord) {}
}

impl<F: FnMut(&IterRecord)> CgoObserver for F {
    fn on_iter(&mut self, rec: &IterRecord) {
        self(rec)
    }
}

/// Iteration state of the oracle.
#[derive(Debug, Clone)]
pub struct CgoState {
    pub t: u64,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Aggregated minorant of `f + <h, z_t>`.
    pub minorant_slope: Vec<f64>,
    pub minorant_intercept: f64,
    /// Row linearizations taken at `x_{t-1}` evaluated at `p_t`, and the
    /// previous such vector.
    ell_curr: Vec<f64>,
    ell_prev: Vec<f64>,
    /// Values and gradients at `x_t` (exact; reused when not smoothing).
    vals: Vec<f64>,
    grads: Vec<f64>,
    f_val: f64,
    f_grad: Vec<f64>,
    etas: Vec<f64>,
    smoothing: bool,
    // scratch
    cost: Vec<f64>,
    p: Vec<f64>,
    htilde: Vec<f64>,
    r_next: Vec<f64>,
}

impl CgoState {
    /// Algorithm initialization: `x_0` given or the zero-cost vertex,
    /// `r_0 = z_0` uniform, minorant = linearization at `x_0`.
    pub fn init(problem: &SaddleProblem, start: Option<&[f64]>, smoothing: bool) -> Result<Self> {
        let n = problem.dim();
        let m = problem.n_rows();
        let x = match start {
            Some(s) => {
                Error::check_dim(n, s.len())?;
                if !all_finite(s) {
                    return Err(Error::NonFiniteInput);
                }
                if !problem.x_set.contains(s, 1e-9) {
                    return Err(Error::InvalidArgument("start point outside the feasible set"));
                }
                s.to_vec()
            }
            None => problem.x_set.zero_vertex(),
        };
        let r = vec![1.0 / m as f64; m];
        let smoothing = smoothing && problem.has_structure();
        let mut st = Self {
            t: 0,
            z: r.clone(),
            r,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            minorant_slope: vec![0.0; n],
            minorant_intercept: 0.0,
            ell_curr: vec![0.0; m],
            ell_prev: vec![0.0; m],
            vals: vec![0.0; m],
            grads: vec![0.0; m * n],
            f_val: 0.0,
            f_grad: vec![0.0; n],
            etas: vec![0.0; m + 1],
            smoothing,
            cost: vec![0.0; n],
            p: vec![0.0; n],
            htilde: vec![0.0; m],
            r_next: vec![0.0; m],
            x,
        };
        st.linearize(problem, 1)?;
        st.ell_curr.copy_from_slice(&st.vals);
        st.ell_prev.copy_from_slice(&st.vals);
        st.cost.copy_from_slice(&st.f_grad);
        let mut intercept = st.f_val - dot(&st.f_grad, &st.x);
        for i in 0..m {
            let g = &st.grads[i * n..(i + 1) * n];
            crate::vecops::axpy(st.r[i], g, &mut st.cost);
            intercept += st.r[i] * (st.vals[i] - dot(g, &st.x));
        }
        st.minorant_slope.copy_from_slice(&st.cost);
        st.minorant_intercept = intercept;
        st.upper = problem.upper_value(&st.x);
        if !st.upper.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        Ok(st)
    }

    pub fn gamma(&self) -> f64 {
        self.z[0]
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    /// Smoothing parameters used in the last linearization (index 0 is the
    /// objective, then the rows).
    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    /// Evaluates values and gradients at `x` into `vals`/`grads`, smoothed
    /// with `eta^t` when enabled.
    fn linearize(&mut self, problem: &SaddleProblem, t: u64) -> Result<()> {
        let n = problem.dim();
        let d_x = problem.constants.d_x;
        let eta_for = |o: &SharedOracle| -> Result<f64> {
            match o.smoothing() {
                Some(s) if s.d_u > 0.0 && s.b_norm > 0.0 => eta_schedule(t, s.b_norm, d_x, s.d_u),
                _ => Ok(0.0),
            }
        };
        match &problem.objective {
            Some(o) => {
                let eta = if self.smoothing { eta_for(o)? } else { 0.0 };
                self.etas[0] = eta;
                self.f_val = if eta > 0.0 {
                    o.eval_smoothed(&self.x, eta, &mut self.f_grad)
                } else {
                    o.eval(&self.x, &mut self.f_grad)
                };
            }
            None => {
                self.f_val = 0.0;
                self.f_grad.fill(0.0);
            }
        }
        for (i, o) in problem.rows.iter().enumerate() {
            let eta = if self.smoothing { eta_for(o)? } else { 0.0 };
            self.etas[i + 1] = eta;
            let g = &mut self.grads[i * n..(i + 1) * n];
            self.vals[i] = if eta > 0.0 {
                o.eval_smoothed(&self.x, eta, g)
            } else {
                o.eval(&self.x, g)
            };
        }
        if !self.f_val.is_finite()
            || !all_finite(&self.vals)
            || !all_finite(&self.grads)
            || !all_finite(&self.f_grad)
        {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// One iteration with `tau_t` scaled by `tau_scale`.
    pub fn step(&mut self, problem: &SaddleProblem, tau_scale: f64) -> Result<IterRecord> {
        let n = problem.dim();
        let m = problem.n_rows();
        let t = self.t + 1;
        let c = &problem.constants;
        let (alpha, lambda, tau) = cgo_params(t, c.m_bar, c.d_x)?;
        let tau = tau * tau_scale;

        // extrapolated row values
        for i in 0..m {
            self.htilde[i] = self.ell_curr[i] + lambda * (self.ell_curr[i] - self.ell_prev[i]);
        }
        prox_simplex_into(&problem.prox, &self.r, &self.htilde, tau, &mut self.r_next)?;
        core::mem::swap(&mut self.r, &mut self.r_next);
        lerp_into(&mut self.z, &self.r, alpha);

        // linearization at x_{t-1}; exact values from the previous step are
        // reused unless smoothing changes them
        if self.smoothing || t == 1 {
            self.linearize(problem, t)?;
        }
        self.cost.copy_from_slice(&self.f_grad);
        let mut intercept = self.f_val - dot(&self.f_grad, &self.x);
        for i in 0..m {
            let g = &self.grads[i * n..(i + 1) * n];
            crate::vecops::axpy(self.r[i], g, &mut self.cost);
            intercept += self.r[i] * (self.vals[i] - dot(g, &self.x));
        }
        problem.x_set.lmo_into(&self.cost, &mut self.p)?;

        core::mem::swap(&mut self.ell_prev, &mut self.ell_curr);
        for i in 0..m {
            let g = &self.grads[i * n..(i + 1) * n];
            let mut v = self.vals[i];
            for j in 0..n {
                v += g[j] * (self.p[j] - self.x[j]);
            }
            self.ell_curr[i] = v;
        }

        lerp_into(&mut self.minorant_slope, &self.cost, alpha);
        self.minorant_intercept = (1.0 - alpha) * self.minorant_intercept + alpha * intercept;
        lerp_into(&mut self.x, &self.p, alpha);

        // lower bound: one LMO on the aggregated minorant
        problem.x_set.lmo_into(&self.minorant_slope, &mut self.p)?;
        self.lower = dot(&self.minorant_slope, &self.p) + self.minorant_intercept;

        // exact values at x_t for the upper bound
        let mut f_exact = 0.0;
        if let Some(o) = &problem.objective {
            f_exact = o.eval(&self.x, &mut self.f_grad);
            self.f_val = f_exact;
        }
        let mut hmax = f64::NEG_INFINITY;
        for (i, o) in problem.rows.iter().enumerate() {
            let v = o.eval(&self.x, &mut self.grads[i * n..(i + 1) * n]);
            self.vals[i] = v;
            hmax = hmax.max(v);
        }
        self.upper = f_exact + hmax;
        if !self.upper.is_finite() || !self.lower.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        self.t = t;
        Ok(IterRecord {
            t,
            lower: self.lower,
            upper: self.upper,
            gap: self.upper - self.lower,
            support: self.x.iter().filter(|v| **v != 0.0).count(),
            gamma: self.z[0],
            eta_max: self.etas.iter().cloned().fold(0.0, f64::max),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgoStatus {
    /// `U - L <= (1 - mu) epsilon` was reached.
    Converged,
    /// Iteration budget exhausted; the best-gap iterate is returned.
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgoOutput {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
    /// Iteration at which the returned iterate was produced.
    pub t: u64,
    /// Iterations actually run.
    pub iterations: u64,
    pub status: CgoStatus,
}

impl CgoOutput {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    fn snapshot(st: &CgoState, status: CgoStatus) -> Self {
        Self {
            x: st.x.clone(),
            z: st.z.clone(),
            gamma: st.gamma(),
            lower: st.lower,
            upper: st.upper,
            t: st.t,
            iterations: st.t,
            status,
        }
    }
}

/// Runs CGO until the gap tolerance or the budget. Smoothable rows are
/// linearized on their exact (sub)gradients.
pub fn cgo_solve(problem: &SaddleProblem, cfg: &CgoConfig) -> Result<CgoOutput> {
    let cfg = CgoConfig { smoothing: false, ..cfg.clone() };
    cgo_run(problem, &cfg, &mut ())
}

/// Runs CGO with the adaptive smoothing schedule on structured rows.
pub fn cgo_solve_nonsmooth(problem: &SaddleProblem, cfg: &CgoConfig) -> Result<CgoOutput> {
    let cfg = CgoConfig { smoothing: true, ..cfg.clone() };
    cgo_run(problem, &cfg, &mut ())
}

/// General driver: honors `cfg.smoothing` and reports every iteration.
pub fn cgo_run<O: CgoObserver + ?Sized>(
    problem: &SaddleProblem,
    cfg: &CgoConfig,
    observer: &mut O,
) -> Result<CgoOutput> {
    let tol = cfg.tolerance();
    cgo_run_until(problem, cfg, observer, |rec| rec.gap <= tol)
}

/// Like [`cgo_run`] with a caller-supplied stopping rule in place of the
/// gap tolerance.
pub fn cgo_run_until<O, S>(
    problem: &SaddleProblem,
    cfg: &CgoConfig,
    observer: &mut O,
    mut stop: S,
) -> Result<CgoOutput>
where
    O: CgoObserver + ?Sized,
    S: FnMut(&IterRecord) -> bool,
{
    cfg.validate()?;
    let mut st = CgoState::init(problem, cfg.start.as_deref(), cfg.smoothing)?;
    let mut best: Option<CgoOutput> = None;
    while st.t < cfg.max_iter {
        let rec = st.step(problem, cfg.tau_scale)?;
        observer.on_iter(&rec);
        if stop(&rec) {
            return Ok(CgoOutput::snapshot(&st, CgoStatus::Converged));
        }
        if best.as_ref().is_none_or(|b| rec.gap < b.gap()) {
            best = Some(CgoOutput::snapshot(&st, CgoStatus::Truncated));
        }
    }
    let mut out = best.expect("at least one iteration");
    out.iterations = st.t;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{HingeSum, Linear};
    use alloc::sync::Arc;
    use approx::assert_abs_diff_eq;

    fn one_d(l: f64) -> SaddleProblem {
        SaddleProblem::new(
            None,
            vec![
                Arc::new(Linear::new(vec![1.0], -l)),
                Arc::new(Linear::new(vec![-1.0], 0.3)),
            ],
            FeasibleSet::interval(0.0, 1.0).unwrap(),
            ProxKind::Entropy,
        )
        .unwrap()
    }

    #[test]
    fn params_examples() {
        let (a, l, t) = cgo_params(1, 2.0, 0.5).unwrap();
        assert_eq!((a, l, t), (1.0, 0.0, 9.0));
        let (a, l, t) = cgo_params(3, 1.0, 1.0).unwrap();
        assert_eq!(a, 0.5);
        assert_abs_diff_eq!(l, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t, 9.0 * 3.0f64.sqrt(), epsilon = 1e-12);
        for t in 1..200u64 {
            let (a, _, _) = cgo_params(t, 1.0, 1.0).unwrap();
            assert_abs_diff_eq!(a * (t as f64 + 1.0), 2.0, epsilon = 1e-12);
        }
        assert!(cgo_params(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn first_step_erases_history() {
        let p = one_d(0.0);
        let mut st = CgoState::init(&p, None, false).unwrap();
        st.step(&p, 1.0).unwrap();
        assert_eq!(st.z, st.r);
        // x_1 is a vertex
        assert!(st.x[0] == 0.0 || st.x[0] == 1.0);
        assert!(st.lower <= st.upper);
    }

    #[test]
    fn linear_single_row_collapses() {
        let c = vec![0.4, -0.2, 0.7];
        let p = SaddleProblem::new(
            None,
            vec![Arc::new(Linear::new(c.clone(), 0.0))],
            FeasibleSet::simplex(3).unwrap(),
            ProxKind::Entropy,
        )
        .unwrap();
        let mut st = CgoState::init(&p, None, false).unwrap();
        st.step(&p, 1.0).unwrap();
        assert_eq!(st.lower, -0.2);
        assert_eq!(st.upper, dot(&c, &st.x));
        assert!(st.lower <= st.upper);
    }

    #[test]
    fn converges_on_one_d_minimax() {
        let p = one_d(0.0);
        let out = cgo_solve(&p, &CgoConfig::new(1e-2, 0.9)).unwrap();
        assert_eq!(out.status, CgoStatus::Converged);
        assert!(out.lower <= 0.15 + 1e-12 && 0.15 <= out.upper + 1e-12);
        assert!(out.gap() <= 1e-3);
    }

    #[test]
    fn huge_epsilon_stops_at_first_iteration() {
        let out = cgo_solve(&one_d(0.0), &CgoConfig::new(1e9, 0.9)).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn truncated_returns_best_gap() {
        let cfg = CgoConfig { max_iter: 5, ..CgoConfig::new(1e-12, 0.9) };
        let mut gaps = Vec::new();
        let out = cgo_run(&one_d(0.0), &cfg, &mut |r: &IterRecord| gaps.push(r.gap)).unwrap();
        assert_eq!(out.status, CgoStatus::Truncated);
        assert_eq!(out.iterations, 5);
        let best = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(out.gap(), best);
    }

    #[test]
    fn smoothing_path_is_inert_on_smooth_problems() {
        let p = one_d(0.1);
        let cfg = CgoConfig { max_iter: 300, ..CgoConfig::new(1e-9, 0.9) };
        let mut a = Vec::new();
        let mut b = Vec::new();
        cgo_run(&p, &CgoConfig { smoothing: false, ..cfg.clone() }, &mut |r: &IterRecord| a.push(r.clone())).unwrap();
        cgo_run(&p, &CgoConfig { smoothing: true, ..cfg }, &mut |r: &IterRecord| b.push(r.clone())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eta_follows_inverse_sqrt() {
        let hinge = HingeSum::single(vec![1.0], -0.5).unwrap();
        let p = SaddleProblem::new(
            None,
            vec![Arc::new(Linear::new(vec![1.0], 0.0)), Arc::new(hinge)],
            FeasibleSet::interval(0.0, 1.0).unwrap(),
            ProxKind::Entropy,
        )
        .unwrap();
        let cfg = CgoConfig { max_iter: 64, ..CgoConfig::new(1e-12, 0.9) };
        let mut etas = Vec::new();
        cgo_run(&p, &cfg, &mut |r: &IterRecord| etas.push(r.eta_max)).unwrap();
        for (k, e) in etas.iter().enumerate() {
            let t = (k + 1) as f64;
            assert_abs_diff_eq!(*e, etas[0] / t.sqrt(), epsilon = 1e-14);
        }
    }
}
