//! Small complex linear-algebra helpers shared by the precoders.

use nalgebra::DMatrix;

use crate::C64;

pub fn frobenius_norm(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `m / ||m||_F`, or `None` for a zero (or non-finite) matrix.
pub fn frobenius_normalized(m: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let norm = frobenius_norm(m);
    if norm > 0.0 && norm.is_finite() {
        Some(m.map(|z| z / norm))
    } else {
        None
    }
}

/// 2-norm condition number of a square matrix from its singular values.
/// Rank-deficient input yields `f64::INFINITY`.
pub fn condition_number(m: &DMatrix<C64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `||a - b||_F`.
pub fn frobenius_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    frobenius_norm(&(a - b))
}
