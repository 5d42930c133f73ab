//! First-order oracles, affine minorants and Nesterov smoothing.
//!
//! An [`Oracle`] returns a value and writes a (sub)gradient. Oracles with
//! hinge or max structure also expose a smoothed evaluation with parameter
//! `eta`; the smoothed value always lies below the exact one:
//! `smoothed <= exact <= smoothed + eta * d_u^2`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::geometry::FeasibleSet;
use crate::vecops::{dist2, dot, ensure_finite, norm2};
use crate::{Error, Result};

/// Declared smoothness (`grad_lipschitz`, L) and Lipschitz (`value_lipschitz`,
/// M, a bound on gradient norms over the feasible set) constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub grad_lipschitz: f64,
    pub value_lipschitz: f64,
    /// Set when the constants come from sampling rather than analysis.
    pub estimated: bool,
}

impl Constants {
    pub fn new(grad_lipschitz: f64, value_lipschitz: f64) -> Self {
        Self { grad_lipschitz, value_lipschitz, estimated: false }
    }

    /// Constants of a nonsmooth oracle: only M is finite.
    pub fn nonsmooth(value_lipschitz: f64) -> Self {
        Self::new(f64::INFINITY, value_lipschitz)
    }

    fn add(self, other: Constants) -> Constants {
        Constants {
            grad_lipschitz: self.grad_lipschitz + other.grad_lipschitz,
            value_lipschitz: self.value_lipschitz + other.value_lipschitz,
            estimated: self.estimated || other.estimated,
        }
    }
}

/// Structure constants of a smoothable term: `b_norm = |B|` and
/// `d_u^2 = max U` for its prox-function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub b_norm: f64,
    pub d_u: f64,
}

pub trait Oracle: Send + Sync {
    fn dim(&self) -> usize;

    /// Exact value; writes a gradient (a subgradient for nonsmooth oracles).
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.eval(x, &mut g)
    }

    fn constants(&self) -> Constants;

    /// `None` for oracles that are already smooth.
    fn smoothing(&self) -> Option<Smoothing> {
        None
    }

    /// Value and gradient of the `eta`-smoothed approximation.
    fn eval_smoothed(&self, x: &[f64], eta: f64, grad: &mut [f64]) -> f64 {
        let _ = eta;
        self.eval(x, grad)
    }
}

pub type SharedOracle = Arc<dyn Oracle>;

/// Evaluates and checks dimensions and finiteness of the result.
pub fn eval_checked(o: &dyn Oracle, x: &[f64], grad: &mut [f64]) -> Result<f64> {
    Error::check_dim(o.dim(), x.len())?;
    Error::check_dim(o.dim(), grad.len())?;
    let v = o.eval(x, grad);
    if !v.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    ensure_finite(grad)?;
    Ok(v)
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    data: Vec<f64>,
    n_rows: usize,
    dim: usize,
}

impl Rows {
    pub fn new(n_rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_dim(n_rows * dim, data.len())?;
        ensure_finite(&data)?;
        Ok(Self { data, n_rows, dim })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            Error::check_dim(dim, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.n_rows).map(|k| norm2(self.row(k))).collect()
    }
}

/// `f(x) = <c, x> + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub c: Vec<f64>,
    pub b: f64,
}

impl Linear {
    pub fn new(c: Vec<f64>, b: f64) -> Self {
        Self { c, b }
    }

    pub fn constant(dim: usize, b: f64) -> Self {
        Self { c: vec![0.0; dim], b }
    }
}

impl Oracle for Linear {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.copy_from_slice(&self.c);
        dot(&self.c, x) + self.b
    }

    fn constants(&self) -> Constants {
        Constants::new(0.0, norm2(&self.c))
    }
}

/// `f(x) = a * |x - center|^2 + b`; concave for `a < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub center: Vec<f64>,
    pub b: f64,
    /// Radius of a ball around `center` containing the feasible set.
    pub reach: f64,
}

impl Quadratic {
    pub fn new(a: f64, center: Vec<f64>, b: f64, reach: f64) -> Self {
        Self { a, center, b, reach }
    }
}

impl Oracle for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut s = 0.0;
        for ((g, xi), ci) in grad.iter_mut().zip(x).zip(&self.center) {
            let d = xi - ci;
            *g = 2.0 * self.a * d;
            s += d * d;
        }
        self.a * s + self.b
    }

    fn constants(&self) -> Constants {
        Constants::new(2.0 * self.a.abs(), 2.0 * self.a.abs() * self.reach)
    }
}

type EvalFn = dyn Fn(&[f64], &mut [f64]) -> f64 + Send + Sync;

/// Oracle backed by a closure and declared constants.
pub struct FnOracle {
    dim: usize,
    f: Box<EvalFn>,
    constants: Constants,
}

impl FnOracle {
    pub fn new<F>(dim: usize, constants: Constants, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) -> f64 + Send + Sync + 'static,
    {
        Self { dim, f: Box::new(f), constants }
    }
}

impl fmt::Debug for FnOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnOracle")
            .field("dim", &self.dim)
            .field("constants", &self.constants)
            .finish()
    }
}

impl Oracle for FnOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }

    fn constants(&self) -> Constants {
        self.constants
    }
}

/// `f(x) - shift`.
pub struct Shifted {
    pub inner: SharedOracle,
    pub shift: f64,
}

impl Shifted {
    pub fn new(inner: SharedOracle, shift: f64) -> Self {
        Self { inner, shift }
    }
}

impl Oracle for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.inner.eval(x, grad) - self.shift
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) - self.shift
    }

    fn constants(&self) -> Constants {
        self.inner.constants()
    }

    fn smoothing(&self) -> Option<Smoothing> {
        self.inner.smoothing()
    }

    fn eval_smoothed(&self, x: &[f64], eta: f64, grad: &mut [f64]) -> f64 {
        self.inner.eval_smoothed(x, eta, grad) - self.shift
    }
}

/// Sum of oracles. Smoothable parts share one `eta`; the aggregate
/// structure constants are the root-sum-squares of the parts'.
pub struct Sum {
    parts: Vec<SharedOracle>,
    scratch_dim: usize,
}

impl Sum {
    pub fn new(parts: Vec<SharedOracle>) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or(Error::InvalidArgument("sum needs at least one term"))?
            .dim();
        for p in &parts {
            Error::check_dim(dim, p.dim())?;
        }
        Ok(Self { parts, scratch_dim: dim })
    }

    fn fold(&self, grad: &mut [f64], mut each: impl FnMut(&dyn Oracle, &mut [f64]) -> f64) -> f64 {
        grad.fill(0.0);
        let mut g = vec![0.0; self.scratch_dim];
        let mut total = 0.0;
        for p in &self.parts {
            total += each(p.as_ref(), &mut g);
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        total
    }
}

impl Oracle for Sum {
    fn dim(&self) -> usize {
        self.scratch_dim
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.fold(grad, |p, g| p.eval(x, g))
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|p| p.value(x)).sum()
    }

    fn constants(&self) -> Constants {
        self.parts
            .iter()
            .map(|p| p.constants())
            .fold(Constants::new(0.0, 0.0), Constants::add)
    }

    fn smoothing(&self) -> Option<Smoothing> {
        let mut any = false;
        let (mut b2, mut d2) = (0.0, 0.0);
        for s in self.parts.iter().filter_map(|p| p.smoothing()) {
            any = true;
            b2 += s.b_norm * s.b_norm;
            d2 += s.d_u * s.d_u;
        }
        any.then(|| Smoothing { b_norm: b2.sqrt(), d_u: d2.sqrt() })
    }

    fn eval_smoothed(&self, x: &[f64], eta: f64, grad: &mut [f64]) -> f64 {
        self.fold(grad, |p, g| p.eval_smoothed(x, eta, g))
    }
}

/// Evaluates a smoothable oracle at a fixed `eta`, presenting it as smooth.
pub struct FixedSmoothing {
    pub inner: SharedOracle,
    pub eta: f64,
}

impl Oracle for FixedSmoothing {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.inner.eval_smoothed(x, self.eta, grad)
    }

    fn constants(&self) -> Constants {
        let c = self.inner.constants();
        let l = match self.inner.smoothing() {
            // smoothed hinge/max terms are (|B|^2 / eta)-smooth
            Some(s) if c.grad_lipschitz.is_infinite() => s.b_norm * s.b_norm / self.eta,
            _ => c.grad_lipschitz,
        };
        Constants { grad_lipschitz: l, ..c }
    }
}

/// `<lin, x> + c0 + sum_k w_k [<a_k, x> + c_k]_+`.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeSum {
    lin: Vec<f64>,
    c0: f64,
    rows: Rows,
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl HingeSum {
    pub fn new(lin: Vec<f64>, c0: f64, rows: Rows, offsets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Error::check_dim(rows.dim(), lin.len())?;
        Error::check_dim(rows.n_rows(), offsets.len())?;
        Error::check_dim(rows.n_rows(), weights.len())?;
        ensure_finite(&lin)?;
        ensure_finite(&offsets)?;
        ensure_finite(&weights)?;
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument("hinge weights must be nonnegative"));
        }
        Ok(Self { lin, c0, rows, offsets, weights })
    }

    /// Single term `[<a, x> + c]_+`.
    pub fn single(a: Vec<f64>, c: f64) -> Result<Self> {
        let dim = a.len();
        Self::new(vec![0.0; dim], 0.0, Rows::new(1, dim, a)?, vec![c], vec![1.0])
    }

    pub fn n_terms(&self) -> usize {
        self.rows.n_rows()
    }

    fn eval_with(&self, x: &[f64], grad: &mut [f64], mut hinge: impl FnMut(f64) -> (f64, f64)) -> f64 {
        grad.copy_from_slice(&self.lin);
        let mut total = dot(&self.lin, x) + self.c0;
        for k in 0..self.rows.n_rows() {
            let a = self.rows.row(k);
            let (v, d) = hinge(dot(a, x) + self.offsets[k]);
            let w = self.weights[k];
            total += w * v;
            if d != 0.0 {
                let s = w * d;
                for (g, ai) in grad.iter_mut().zip(a) {
                    *g += s * ai;
                }
            }
        }
        total
    }
}

impl Oracle for HingeSum {
    fn dim(&self) -> usize {
        self.lin.len()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval_with(x, grad, |a| if a > 0.0 { (a, 1.0) } else { (0.0, 0.0) })
    }

    fn constants(&self) -> Constants {
        let m = norm2(&self.lin)
            + self
                .weights
                .iter()
                .zip(self.rows.row_norms())
                .map(|(w, n)| w * n)
                .sum::<f64>();
        Constants::nonsmooth(m)
    }

    fn smoothing(&self) -> Option<Smoothing> {
        let b2: f64 = self
            .weights
            .iter()
            .zip(self.rows.row_norms())
            .map(|(w, n)| w * n * n)
            .sum();
        let d2: f64 = self.weights.iter().sum::<f64>() / 2.0;
        Some(Smoothing { b_norm: b2.sqrt(), d_u: d2.sqrt() })
    }

    fn eval_smoothed(&self, x: &[f64], eta: f64, grad: &mut [f64]) -> f64 {
        self.eval_with(x, grad, |a| smoothed_hinge_eval(eta, a))
    }
}

/// `sum_k w_k [<a_k, x> + c_k]_+^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredHingeSum {
    rows: Rows,
    offsets: Vec<f64>,
    weights: Vec<f64>,
    constants: Constants,
}

impl SquaredHingeSum {
    /// `reach` bounds `|x|` over the feasible set and is used for M.
    pub fn new(rows: Rows, offsets: Vec<f64>, weights: Vec<f64>, reach: f64) -> Result<Self> {
        Error::check_dim(rows.n_rows(), offsets.len())?;
        Error::check_dim(rows.n_rows(), weights.len())?;
        ensure_finite(&offsets)?;
        ensure_finite(&weights)?;
        let norms = rows.row_norms();
        let mut l = 0.0;
        let mut m = 0.0;
        for k in 0..rows.n_rows() {
            l += 2.0 * weights[k] * norms[k] * norms[k];
            m += 2.0 * weights[k] * norms[k] * (norms[k] * reach + offsets[k].abs());
        }
        Ok(Self { rows, offsets, weights, constants: Constants::new(l, m) })
    }
}

impl Oracle for SquaredHingeSum {
    fn dim(&self) -> usize {
        self.rows.dim()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut total = 0.0;
        for k in 0..self.rows.n_rows() {
            let a = self.rows.row(k);
            let v = dot(a, x) + self.offsets[k];
            if v > 0.0 {
                total += self.weights[k] * v * v;
                let s = 2.0 * self.weights[k] * v;
                for (g, ai) in grad.iter_mut().zip(a) {
                    *g += s * ai;
                }
            }
        }
        total
    }

    fn constants(&self) -> Constants {
        self.constants
    }
}

/// Bound on `|sigma''|`, attained at `a = ln(2 +- sqrt 3)`.
pub const SIGMOID_CURVATURE: f64 = 0.096_225_044_864_937_63;

/// Numerically stable logistic function.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `sum_k w_k sigmoid((<a_k, x> + c_k) / theta)`; smooth and nonconvex.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidSum {
    rows: Rows,
    offsets: Vec<f64>,
    weights: Vec<f64>,
    theta: f64,
}

impl SigmoidSum {
    pub fn new(rows: Rows, offsets: Vec<f64>, weights: Vec<f64>, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::BadTheta(theta));
        }
        Error::check_dim(rows.n_rows(), offsets.len())?;
        Error::check_dim(rows.n_rows(), weights.len())?;
        ensure_finite(&offsets)?;
        ensure_finite(&weights)?;
        Ok(Self { rows, offsets, weights, theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Lower-curvature constant; equal to the smoothness constant.
    pub fn lower_curvature(&self) -> f64 {
        self.constants().grad_lipschitz
    }
}

impl Oracle for SigmoidSum {
    fn dim(&self) -> usize {
        self.rows.dim()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut total = 0.0;
        for k in 0..self.rows.n_rows() {
            let a = self.rows.row(k);
            let s = sigmoid((dot(a, x) + self.offsets[k]) / self.theta);
            total += self.weights[k] * s;
            let d = self.weights[k] * s * (1.0 - s) / self.theta;
            if d != 0.0 {
                for (g, ai) in grad.iter_mut().zip(a) {
                    *g += d * ai;
                }
            }
        }
        total
    }

    fn constants(&self) -> Constants {
        let norms = self.rows.row_norms();
        let mut l = 0.0;
        let mut m = 0.0;
        for (w, n) in self.weights.iter().zip(norms) {
            l += w.abs() * n * n * SIGMOID_CURVATURE / (self.theta * self.theta);
            m += w.abs() * n / (4.0 * self.theta);
        }
        Constants::new(l, m)
    }
}

/// `<lin, x> + c0 + sum_g max_{e in g} x_e` over index groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMaxSum {
    dim: usize,
    lin: Vec<f64>,
    c0: f64,
    groups: Vec<Vec<usize>>,
}

impl GroupMaxSum {
    pub fn new(dim: usize, lin: Vec<f64>, c0: f64, groups: Vec<Vec<usize>>) -> Result<Self> {
        Error::check_dim(dim, lin.len())?;
        for g in &groups {
            if g.is_empty() {
                return Err(Error::InvalidArgument("empty group"));
            }
            if g.iter().any(|&e| e >= dim) {
                return Err(Error::InvalidArgument("group index out of range"));
            }
        }
        Ok(Self { dim, lin, c0, groups })
    }

    fn eval_with(&self, x: &[f64], grad: &mut [f64], eta: Option<f64>) -> f64 {
        grad.copy_from_slice(&self.lin);
        let mut total = dot(&self.lin, x) + self.c0;
        let mut v = Vec::new();
        for g in &self.groups {
            v.clear();
            v.extend(g.iter().map(|&e| x[e]));
            match eta {
                Some(eta) if g.len() > 1 => {
                    let (val, w) = groupmax_unchecked(eta, &v);
                    total += val;
                    for (&e, wi) in g.iter().zip(w) {
                        grad[e] += wi;
                    }
                }
                _ => {
                    let j = crate::vecops::argmin(&v.iter().map(|a| -a).collect::<Vec<_>>())
                        .unwrap_or(0);
                    total += v[j];
                    grad[g[j]] += 1.0;
                }
            }
        }
        total
    }
}

impl Oracle for GroupMaxSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval_with(x, grad, None)
    }

    fn constants(&self) -> Constants {
        Constants::nonsmooth(norm2(&self.lin) + (self.groups.len() as f64).sqrt())
    }

    fn smoothing(&self) -> Option<Smoothing> {
        let d2: f64 = self.groups.iter().map(|g| (g.len() as f64).ln()).sum();
        (d2 > 0.0).then(|| Smoothing { b_norm: 1.0, d_u: d2.sqrt() })
    }

    fn eval_smoothed(&self, x: &[f64], eta: f64, grad: &mut [f64]) -> f64 {
        self.eval_with(x, grad, Some(eta))
    }
}

/// Affine function `<slope, x> + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMinorant {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl AffineMinorant {
    pub fn zero(dim: usize) -> Self {
        Self { slope: vec![0.0; dim], intercept: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x) + self.intercept
    }

    /// `self <- (1 - alpha) * self + alpha * (slope, intercept)`.
    pub fn absorb(&mut self, slope: &[f64], intercept: f64, alpha: f64) {
        crate::vecops::lerp_into(&mut self.slope, slope, alpha);
        self.intercept = (1.0 - alpha) * self.intercept + alpha * intercept;
    }

    /// `self <- self + w * other`.
    pub fn add_scaled(&mut self, w: f64, other: &AffineMinorant) {
        crate::vecops::axpy(w, &other.slope, &mut self.slope);
        self.intercept += w * other.intercept;
    }
}

/// Tangent plane of `oracle` at `anchor`.
pub fn linearize(oracle: &dyn Oracle, anchor: &[f64]) -> Result<AffineMinorant> {
    ensure_finite(anchor)?;
    let mut slope = vec![0.0; oracle.dim()];
    let v = eval_checked(oracle, anchor, &mut slope)?;
    let intercept = v - dot(&slope, anchor);
    Ok(AffineMinorant { slope, intercept })
}

pub fn combine_minorant(prev: &AffineMinorant, new: &AffineMinorant, alpha: f64) -> Result<AffineMinorant> {
    Error::check_dim(prev.slope.len(), new.slope.len())?;
    let mut out = prev.clone();
    out.absorb(&new.slope, new.intercept, alpha);
    Ok(out)
}

/// `max_{y in [0,1]} y a - eta y^2 / 2` and its derivative in `a`.
pub fn smoothed_hinge_eval(eta: f64, a: f64) -> (f64, f64) {
    if a <= 0.0 {
        (0.0, 0.0)
    } else if a < eta {
        (a * a / (2.0 * eta), a / eta)
    } else {
        (a - eta / 2.0, 1.0)
    }
}

/// `eta * ln((1/n) sum exp(v_i / eta))` and its gradient `softmax(v / eta)`.
pub fn smoothed_groupmax_eval(eta: f64, v: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_finite(v)?;
    Error::positive("eta", eta)?;
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty group"));
    }
    Ok(groupmax_unchecked(eta, v))
}

fn groupmax_unchecked(eta: f64, v: &[f64]) -> (f64, Vec<f64>) {
    let shift = v.iter().fold(f64::NEG_INFINITY, |m, a| m.max(*a));
    let mut w: Vec<f64> = v.iter().map(|a| ((a - shift) / eta).exp()).collect();
    let total: f64 = w.iter().sum();
    for wi in w.iter_mut() {
        *wi /= total;
    }
    let value = shift + eta * (total / v.len() as f64).ln();
    (value, w)
}

/// `eta^t = b_norm * d_x / (sqrt(t) * d_u)`.
pub fn eta_schedule(t: u64, b_norm: f64, d_x: f64, d_u: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidArgument("iteration index starts at 1"));
    }
    Error::positive("b_norm", b_norm)?;
    Error::positive("d_x", d_x)?;
    Error::positive("d_u", d_u)?;
    Ok(b_norm * d_x / ((t as f64).sqrt() * d_u))
}

/// Central-difference step used by [`fd_check`].
pub const FD_STEP: f64 = 1e-5;

/// Max over `points` of `|g - g_fd| / max(1, |g|)`.
pub fn fd_check(oracle: &dyn Oracle, points: &[Vec<f64>]) -> f64 {
    fd_check_with(points, oracle.dim(), |x, g| oracle.eval(x, g))
}

/// [`fd_check`] against the smoothed evaluation at `eta`.
pub fn fd_check_smoothed(oracle: &dyn Oracle, eta: f64, points: &[Vec<f64>]) -> f64 {
    fd_check_with(points, oracle.dim(), |x, g| oracle.eval_smoothed(x, eta, g))
}

fn fd_check_with(points: &[Vec<f64>], dim: usize, eval: impl Fn(&[f64], &mut [f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut g = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    for p in points {
        eval(p, &mut g);
        let mut x = p.clone();
        let mut err2 = 0.0;
        for i in 0..dim {
            x[i] = p[i] + FD_STEP;
            let fp = eval(&x, &mut scratch);
            x[i] = p[i] - FD_STEP;
            let fm = eval(&x, &mut scratch);
            x[i] = p[i];
            let fd = (fp - fm) / (2.0 * FD_STEP);
            err2 += (fd - g[i]) * (fd - g[i]);
        }
        worst = worst.max(err2.sqrt() / norm2(&g).max(1.0));
    }
    worst
}

/// Estimates (L, M) from `pairs` random point pairs in `set`: twice the
/// largest observed gradient-difference ratio, and twice the largest
/// gradient norm. The result is flagged as estimated.
pub fn estimate_constants<R: Rng + ?Sized>(
    oracle: &dyn Oracle,
    set: &FeasibleSet,
    rng: &mut R,
    pairs: usize,
) -> Result<Constants> {
    Error::check_dim(set.dim(), oracle.dim())?;
    let mut gx = vec![0.0; oracle.dim()];
    let mut gy = vec![0.0; oracle.dim()];
    let (mut l, mut m) = (0.0f64, 0.0f64);
    for _ in 0..pairs {
        let x = set.sample(rng);
        let y = set.sample(rng);
        eval_checked(oracle, &x, &mut gx)?;
        eval_checked(oracle, &y, &mut gy)?;
        m = m.max(norm2(&gx)).max(norm2(&gy));
        let d = dist2(&x, &y);
        if d > 0.0 {
            l = l.max(dist2(&gx, &gy) / d);
        }
    }
    Ok(Constants { grad_lipschitz: 2.0 * l, value_lipschitz: 2.0 * m, estimated: true })
}
