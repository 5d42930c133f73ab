//! Compact convex sets and their linear minimization oracles (LMOs).
//!
//! Every LMO breaks ties toward the lowest index and maps zero-cost
//! coordinates to a fixed vertex, so repeated runs are bit-reproducible.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::vecops::{argmin, ensure_finite};
use crate::{Error, Result};

/// `{x in R^dim : x >= 0, sum x <= radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSimplexLeq {
    dim: usize,
    radius: f64,
}

impl ScaledSimplexLeq {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("simplex dimension must be positive"));
        }
        if !(radius >= 0.0) {
            return Err(Error::InvalidConstant { name: "radius", value: radius });
        }
        if !radius.is_finite() {
            return Err(Error::UnboundedSet);
        }
        Ok(Self { dim, radius })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn diameter(&self) -> f64 {
        if self.dim >= 2 {
            self.radius * core::f64::consts::SQRT_2
        } else {
            self.radius
        }
    }
}

/// `{z >= 0 : sum z = 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardSimplex {
    dim: usize,
}

impl StandardSimplex {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("simplex dimension must be positive"));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.dim as f64; self.dim]
    }

    pub fn diameter(&self) -> f64 {
        if self.dim >= 2 {
            core::f64::consts::SQRT_2
        } else {
            0.0
        }
    }
}

/// Axis-aligned box `lower <= x <= upper` with finite bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Error::check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidArgument("box dimension must be positive"));
        }
        if lower.iter().chain(&upper).any(|v| v.is_nan()) {
            return Err(Error::NonFiniteInput);
        }
        if lower.iter().chain(&upper).any(|v| v.is_infinite()) {
            return Err(Error::UnboundedSet);
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument("box is empty (lower > upper)"));
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cartesian product of sets; coordinates are concatenated in factor order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSet {
    factors: Vec<FeasibleSet>,
    dim: usize,
}

impl ProductSet {
    pub fn new(factors: Vec<FeasibleSet>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("product needs at least one factor"));
        }
        let dim = factors.iter().map(FeasibleSet::dim).sum();
        Ok(Self { factors, dim })
    }

    pub fn factors(&self) -> &[FeasibleSet] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slices(&self) -> impl Iterator<Item = (usize, &FeasibleSet)> {
        self.factors.iter().scan(0, |off, f| {
            let start = *off;
            *off += f.dim();
            Some((start, f))
        })
    }
}

/// A compact convex set with an LMO.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    SimplexLeq(ScaledSimplexLeq),
    Simplex(StandardSimplex),
    Box(BoxSet),
    Product(ProductSet),
}

impl From<ScaledSimplexLeq> for FeasibleSet {
    fn from(s: ScaledSimplexLeq) -> Self {
        FeasibleSet::SimplexLeq(s)
    }
}

impl From<StandardSimplex> for FeasibleSet {
    fn from(s: StandardSimplex) -> Self {
        FeasibleSet::Simplex(s)
    }
}

impl From<BoxSet> for FeasibleSet {
    fn from(s: BoxSet) -> Self {
        FeasibleSet::Box(s)
    }
}

impl From<ProductSet> for FeasibleSet {
    fn from(s: ProductSet) -> Self {
        FeasibleSet::Product(s)
    }
}

impl FeasibleSet {
    pub fn simplex_leq(dim: usize, radius: f64) -> Result<Self> {
        ScaledSimplexLeq::new(dim, radius).map(Into::into)
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        StandardSimplex::new(dim).map(Into::into)
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        BoxSet::interval(lower, upper).map(Into::into)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        BoxSet::new(lower, upper).map(Into::into)
    }

    pub fn product(factors: Vec<FeasibleSet>) -> Result<Self> {
        ProductSet::new(factors).map(Into::into)
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::SimplexLeq(s) => s.dim(),
            FeasibleSet::Simplex(s) => s.dim(),
            FeasibleSet::Box(b) => b.dim(),
            FeasibleSet::Product(p) => p.dim(),
        }
    }

    /// Euclidean diameter (exact for every built-in set except products,
    /// where it is the Pythagorean upper bound).
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::SimplexLeq(s) => s.diameter(),
            FeasibleSet::Simplex(s) => s.diameter(),
            FeasibleSet::Box(b) => b.diameter(),
            FeasibleSet::Product(p) => p
                .factors
                .iter()
                .map(|f| f.diameter().powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Radius of a centered ball containing the set.
    pub fn max_norm(&self) -> f64 {
        match self {
            FeasibleSet::SimplexLeq(s) => s.radius,
            FeasibleSet::Simplex(_) => 1.0,
            FeasibleSet::Box(b) => b
                .lower
                .iter()
                .zip(&b.upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            FeasibleSet::Product(p) => p
                .factors
                .iter()
                .map(|f| f.max_norm().powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Writes `argmin_{x in set} <cost, x>` into `out`.
    pub fn lmo_into(&self, cost: &[f64], out: &mut [f64]) -> Result<()> {
        Error::check_dim(self.dim(), cost.len())?;
        Error::check_dim(self.dim(), out.len())?;
        ensure_finite(cost)?;
        self.lmo_unchecked(cost, out);
        Ok(())
    }

    pub fn lmo(&self, cost: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.lmo_into(cost, &mut out)?;
        Ok(out)
    }

    /// Minimum of `<cost, x>` over the set.
    pub fn support_min(&self, cost: &[f64]) -> Result<f64> {
        let v = self.lmo(cost)?;
        Ok(crate::vecops::dot(cost, &v))
    }

    /// The vertex returned for an all-zero cost; the default start point.
    pub fn zero_vertex(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.lmo_unchecked(&vec![0.0; self.dim()], &mut out);
        out
    }

    fn lmo_unchecked(&self, cost: &[f64], out: &mut [f64]) {
        match self {
            FeasibleSet::SimplexLeq(s) => simplex_leq_vertex(cost, s.radius, out),
            FeasibleSet::Simplex(_) => {
                out.fill(0.0);
                if let Some(i) = argmin(cost) {
                    out[i] = 1.0;
                }
            }
            FeasibleSet::Box(b) => box_vertex(cost, b, out),
            FeasibleSet::Product(p) => {
                for (start, f) in p.slices() {
                    let end = start + f.dim();
                    f.lmo_unchecked(&cost[start..end], &mut out[start..end]);
                }
            }
        }
    }

    /// Membership test with absolute tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        match self {
            FeasibleSet::SimplexLeq(s) => {
                x.iter().all(|v| *v >= -tol) && x.iter().sum::<f64>() <= s.radius + tol
            }
            FeasibleSet::Simplex(_) => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            FeasibleSet::Box(b) => x
                .iter()
                .zip(b.lower.iter().zip(&b.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Product(p) => p
                .slices()
                .all(|(start, f)| f.contains(&x[start..start + f.dim()], tol)),
        }
    }

    /// Draws a random point of the set (uniform for simplices and boxes).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            FeasibleSet::SimplexLeq(s) => {
                // uniform on the (dim+1)-simplex, last coordinate is the slack
                let mut slack = exp1(rng);
                let mut total = slack;
                for v in out.iter_mut() {
                    *v = exp1(rng);
                    total += *v;
                }
                for v in out.iter_mut() {
                    *v *= s.radius / total;
                }
                slack /= total;
                let _ = slack;
            }
            FeasibleSet::Simplex(_) => {
                let mut total = 0.0;
                for v in out.iter_mut() {
                    *v = exp1(rng);
                    total += *v;
                }
                for v in out.iter_mut() {
                    *v /= total;
                }
            }
            FeasibleSet::Box(b) => {
                for (i, v) in out.iter_mut().enumerate() {
                    let t: f64 = rng.random();
                    *v = b.lower[i] + t * (b.upper[i] - b.lower[i]);
                }
            }
            FeasibleSet::Product(p) => {
                for (start, f) in p.slices() {
                    f.sample_into(rng, &mut out[start..start + f.dim()]);
                }
            }
        }
    }
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

fn simplex_leq_vertex(cost: &[f64], radius: f64, out: &mut [f64]) {
    out.fill(0.0);
    if let Some(i) = argmin(cost) {
        if cost[i] < 0.0 {
            out[i] = radius;
        }
    }
}

fn box_vertex(cost: &[f64], b: &BoxSet, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = if cost[i] >= 0.0 { b.lower[i] } else { b.upper[i] };
    }
}

/// LMO over `{x >= 0, sum x <= radius}`: either the origin or `radius * e_i`.
pub fn lmo_scaled_simplex(cost: &[f64], radius: f64) -> Result<Vec<f64>> {
    FeasibleSet::simplex_leq(cost.len(), radius)?.lmo(cost)
}

pub fn lmo_box(cost: &[f64], b: &BoxSet) -> Result<Vec<f64>> {
    Error::check_dim(b.dim(), cost.len())?;
    ensure_finite(cost)?;
    let mut out = vec![0.0; b.dim()];
    box_vertex(cost, b, &mut out);
    Ok(out)
}

pub fn lmo_product(cost: &[f64], p: &ProductSet) -> Result<Vec<f64>> {
    let mut out = vec![0.0; p.dim()];
    FeasibleSet::Product(p.clone()).lmo_into(cost, &mut out)?;
    Ok(out)
}

pub fn diameter(set: &FeasibleSet) -> f64 {
    set.diameter()
}

/// Distance-generating function used for the dual prox step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxKind {
    /// `nu(z) = sum z_i ln z_i`; the prox is a multiplicative update.
    Entropy,
    /// `nu(z) = |z|^2 / 2`; the prox is a Euclidean projection.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexProx {
    pub kind: ProxKind,
    pub dim: usize,
}

/// Dual iterates are floored here before renormalization.
pub const DUAL_FLOOR: f64 = 1e-300;

impl SimplexProx {
    pub fn new(kind: ProxKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("simplex dimension must be positive"));
        }
        Ok(Self { kind, dim })
    }

    pub fn entropy(dim: usize) -> Result<Self> {
        Self::new(ProxKind::Entropy, dim)
    }

    /// Bound on the Bregman distance from the uniform start.
    pub fn v_bar(&self) -> f64 {
        match self.kind {
            ProxKind::Entropy => (self.dim as f64).ln(),
            ProxKind::Euclidean => {
                if self.dim >= 2 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Bregman distance `V(from, to)`.
    pub fn divergence(&self, from: &[f64], to: &[f64]) -> f64 {
        match self.kind {
            ProxKind::Entropy => to
                .iter()
                .zip(from)
                .filter(|(t, _)| **t > 0.0)
                .map(|(t, f)| t * (t / f).ln())
                .sum(),
            ProxKind::Euclidean => {
                0.5 * to.iter().zip(from).map(|(t, f)| (t - f) * (t - f)).sum::<f64>()
            }
        }
    }
}

/// `argmin_{z in simplex} <-gain, z> + tau * V(r_prev, z)`.
pub fn prox_simplex(prox: &SimplexProx, r_prev: &[f64], gain: &[f64], tau: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; prox.dim];
    prox_simplex_into(prox, r_prev, gain, tau, &mut out)?;
    Ok(out)
}

pub fn prox_simplex_into(
    prox: &SimplexProx,
    r_prev: &[f64],
    gain: &[f64],
    tau: f64,
    out: &mut [f64],
) -> Result<()> {
    Error::check_dim(prox.dim, r_prev.len())?;
    Error::check_dim(prox.dim, gain.len())?;
    Error::check_dim(prox.dim, out.len())?;
    ensure_finite(r_prev)?;
    ensure_finite(gain)?;
    Error::positive("tau", tau)?;
    match prox.kind {
        ProxKind::Entropy => {
            if r_prev.iter().any(|r| *r <= 0.0) {
                return Err(Error::DegenerateDual);
            }
            let mut shift = f64::NEG_INFINITY;
            for ((o, r), g) in out.iter_mut().zip(r_prev).zip(gain) {
                *o = r.ln() + g / tau;
                shift = shift.max(*o);
            }
            let mut total = 0.0;
            for o in out.iter_mut() {
                *o = (*o - shift).exp().max(DUAL_FLOOR);
                total += *o;
            }
            for o in out.iter_mut() {
                *o /= total;
            }
        }
        ProxKind::Euclidean => {
            for ((o, r), g) in out.iter_mut().zip(r_prev).zip(gain) {
                *o = r + g / tau;
            }
            project_onto_simplex(out);
        }
    }
    Ok(())
}

/// In-place Euclidean projection onto the standard simplex (sort-and-threshold).
pub fn project_onto_simplex(y: &mut [f64]) {
    let mut sorted: Vec<f64> = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for v in y.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}
