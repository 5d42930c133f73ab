//! Dense vector helpers over `f64` slices.

#[allow(unused_imports)]
use num_traits::Float;
use crate::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |s, (x, y)| s + (x - y) * (x - y)).sqrt()
}

/// `y <- y + a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `x <- (1 - alpha) * x + alpha * p`
#[inline]
pub fn lerp_into(x: &mut [f64], p: &[f64], alpha: f64) {
    for (xi, pi) in x.iter_mut().zip(p) {
        *xi = (1.0 - alpha) * *xi + alpha * pi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub fn ensure_finite(a: &[f64]) -> Result<()> {
    if all_finite(a) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput)
    }
}

/// Euclidean norm of the positive part.
pub fn positive_part_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |s, v| s + v.max(0.0).powi(2)).sqrt()
}

/// Largest positive part, zero when every entry is nonpositive.
pub fn positive_part_max(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(*v))
}

/// Index of the smallest entry; ties go to the lowest index.
pub fn argmin(a: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in a.iter().enumerate() {
        match best {
            Some(b) if a[b] <= *v => {}
            _ => best = Some(i),
        }
    }
    best
}
