//! Small helpers for complex state vectors.

use num_complex::Complex64;

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn dot_real_left(a: &[f64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| y * *x).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn scale(a: &mut [Complex64], c: Complex64) {
    for x in a.iter_mut() {
        *x *= c;
    }
}

/// a += c * b
pub fn axpy(a: &mut [Complex64], c: Complex64, b: &[Complex64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += c * y;
    }
}

/// a += c * b for a real basis vector b.
pub fn axpy_real(a: &mut [Complex64], c: Complex64, b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += c * *y;
    }
}

pub fn normalize(a: &mut [Complex64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        let inv = Complex64::new(1.0 / n, 0.0);
        scale(a, inv);
    }
    n
}

/// Maximum |a_i - b_i| between two vectors.
pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Log-sum-exp of a slice, tolerating -inf entries.
pub fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.map(|x| (x - m).exp()).sum();
    m + s.ln()
}
