//! Richardson extrapolation of dyadic sequences.

use crate::real::Real;
use num_complex::Complex;

/// Extrapolated limit with a last-increment error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Extrapolated<R: Real> {
    pub value: Complex<R>,
    pub error_estimate: R,
}

/// Richardson-extrapolate `values[k] ~ L + c_0 2^{-k p} + c_1 2^{-k(p+1)} + ...`,
/// i.e. samples along a dyadic parameter ladder whose leading error order is `p`.
///
/// `levels` bounds the depth of the extrapolation table (each level cancels
/// one more power). The error estimate is the magnitude of the last increment
/// in the deepest retained column.
pub fn richardson_dyadic<R: Real>(
    values: &[Complex<R>],
    p: i32,
    levels: usize,
) -> Extrapolated<R> {
    assert!(!values.is_empty(), "no samples to extrapolate");
    let mut col: Vec<Complex<R>> = values.to_vec();
    let mut last_increment = if col.len() >= 2 {
        (col[col.len() - 1] - col[col.len() - 2]).norm()
    } else {
        R::infinity()
    };
    let levels = levels.min(col.len().saturating_sub(1));
    for m in 0..levels {
        let factor = R::of(2f64.powi(p + m as i32));
        let mut next = Vec::with_capacity(col.len() - 1);
        for i in 1..col.len() {
            next.push((col[i] * factor - col[i - 1]) / (factor - R::one()));
        }
        if next.len() >= 2 {
            last_increment = (next[next.len() - 1] - next[next.len() - 2]).norm();
        } else if let (Some(&a), Some(&b)) = (next.last(), col.last()) {
            last_increment = (a - b).norm();
        }
        col = next;
    }
    Extrapolated {
        value: *col.last().expect("non-empty column"),
        error_estimate: last_increment,
    }
}
