//! Small dense least-squares solver over complex scalars.
//!
//! The design matrices fitted here are tall and thin (a handful of power-law
//! columns against tens of samples), so a hand-rolled Householder QR with an
//! explicit spectral condition estimate is all that is needed.

use crate::real::Real;
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("design matrix is ill-conditioned (condition number {cond:.3e} > {limit:.1e}); {hint}")]
    IllConditioned { cond: f64, limit: f64, hint: String },
    #[error("under-determined fit: {rows} samples for {cols} unknowns (need at least 2x)")]
    UnderDetermined { rows: usize, cols: usize },
}

/// Least-squares solution of `A c = b` with diagnostics.
#[derive(Debug, Clone)]
pub struct Lstsq<R: Real> {
    pub coeffs: Vec<Complex<R>>,
    /// Spectral condition number of the design matrix.
    pub condition: R,
    /// Max residual |(A c - b)_i| over the rows.
    pub max_residual: R,
}

const CONDITION_LIMIT: f64 = 1e10;

/// Solve `min |A c - b|_2` for a row-major matrix `a` (each inner Vec one row).
/// Refuses matrices with spectral condition number above 1e10.
pub fn lstsq<R: Real>(a: &[Vec<Complex<R>>], b: &[Complex<R>]) -> Result<Lstsq<R>, FitError> {
    let rows = a.len();
    assert_eq!(rows, b.len(), "row count mismatch");
    let cols = a.first().map_or(0, Vec::len);
    assert!(cols > 0 && rows >= cols, "need at least as many rows as columns");
    if rows < 2 * cols {
        return Err(FitError::UnderDetermined { rows, cols });
    }

    let cond = condition_number(a, cols);
    if cond > R::of(CONDITION_LIMIT) {
        return Err(FitError::IllConditioned {
            cond: cond.to_f64().unwrap_or(f64::INFINITY),
            limit: CONDITION_LIMIT,
            hint: "extend the sample grid (more radii / wider t-range)".into(),
        });
    }

    // Householder QR, applied in place to a column-major copy and to b.
    let mut m: Vec<Complex<R>> = Vec::with_capacity(rows * cols);
    for r in a {
        assert_eq!(r.len(), cols, "ragged design matrix");
        m.extend_from_slice(r);
    }
    let mut rhs = b.to_vec();
    let at = |m: &Vec<Complex<R>>, i: usize, j: usize| m[i * cols + j];

    for k in 0..cols {
        // Householder vector for column k below row k.
        let mut alpha_sq = R::zero();
        for i in k..rows {
            alpha_sq = alpha_sq + at(&m, i, k).norm_sqr();
        }
        let alpha = alpha_sq.sqrt();
        if alpha == R::zero() {
            continue;
        }
        let x0 = at(&m, k, k);
        let phase = if x0.norm() == R::zero() {
            Complex::new(R::one(), R::zero())
        } else {
            x0 / Complex::new(x0.norm(), R::zero())
        };
        let alpha = -phase * alpha;
        let mut v: Vec<Complex<R>> = (k..rows).map(|i| at(&m, i, k)).collect();
        v[0] = v[0] - alpha;
        let vnorm_sq = v.iter().map(|z| z.norm_sqr()).fold(R::zero(), |a, b| a + b);
        if vnorm_sq == R::zero() {
            continue;
        }
        // Apply H = I - 2 v v^* / |v|^2 to remaining columns and rhs.
        for j in k..cols {
            let mut dot = Complex::new(R::zero(), R::zero());
            for (idx, i) in (k..rows).enumerate() {
                dot = dot + v[idx].conj() * at(&m, i, j);
            }
            let scale = dot * R::of(2.0) / vnorm_sq;
            for (idx, i) in (k..rows).enumerate() {
                m[i * cols + j] = m[i * cols + j] - v[idx] * scale;
            }
        }
        let mut dot = Complex::new(R::zero(), R::zero());
        for (idx, i) in (k..rows).enumerate() {
            dot = dot + v[idx].conj() * rhs[i];
        }
        let scale = dot * R::of(2.0) / vnorm_sq;
        for (idx, i) in (k..rows).enumerate() {
            rhs[i] = rhs[i] - v[idx] * scale;
        }
    }

    // Back-substitution on the upper-triangular factor.
    let mut coeffs = vec![Complex::new(R::zero(), R::zero()); cols];
    for k in (0..cols).rev() {
        let mut s = rhs[k];
        for j in k + 1..cols {
            s = s - at(&m, k, j) * coeffs[j];
        }
        let d = at(&m, k, k);
        coeffs[k] = if d.norm() == R::zero() { Complex::new(R::zero(), R::zero()) } else { s / d };
    }

    let mut max_residual = R::zero();
    for (row, &bi) in a.iter().zip(b) {
        let mut fit = Complex::new(R::zero(), R::zero());
        for (j, &aij) in row.iter().enumerate() {
            fit = fit + aij * coeffs[j];
        }
        max_residual = max_residual.max((fit - bi).norm());
    }

    Ok(Lstsq { coeffs, condition: cond, max_residual })
}

/// Spectral condition number via the eigenvalues of the (small) Gram matrix,
/// computed with a cyclic Jacobi sweep on its real symmetric embedding.
fn condition_number<R: Real>(a: &[Vec<Complex<R>>], cols: usize) -> R {
    // Gram matrix H = A^* A (Hermitian, cols x cols).
    let mut h = vec![Complex::new(R::zero(), R::zero()); cols * cols];
    for row in a {
        for i in 0..cols {
            for j in 0..cols {
                h[i * cols + j] = h[i * cols + j] + row[i].conj() * row[j];
            }
        }
    }
    // Real symmetric embedding [[X, -Y], [Y, X]] has the same spectrum (doubled).
    let n = 2 * cols;
    let mut s = vec![R::zero(); n * n];
    for i in 0..cols {
        for j in 0..cols {
            let z = h[i * cols + j];
            s[i * n + j] = z.re;
            s[(i + cols) * n + (j + cols)] = z.re;
            s[i * n + (j + cols)] = -z.im;
            s[(i + cols) * n + j] = z.im;
        }
    }
    let eig = jacobi_eigenvalues(&mut s, n);
    let mut lo = R::infinity();
    let mut hi = R::zero();
    for &e in &eig {
        let e = e.max(R::zero());
        lo = lo.min(e);
        hi = hi.max(e);
    }
    if lo <= R::zero() {
        return R::infinity();
    }
    (hi / lo).sqrt()
}

/// Eigenvalues of a small real symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues<R: Real>(s: &mut [R], n: usize) -> Vec<R> {
    for _sweep in 0..60 {
        let mut off = R::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off + s[i * n + j] * s[i * n + j];
            }
        }
        if off.sqrt() < R::of(1e-300).max(R::epsilon() * R::of(1e3)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = s[p * n + q];
                if apq.abs() <= R::epsilon() * (s[p * n + p].abs() + s[q * n + q].abs()) {
                    continue;
                }
                let theta = (s[q * n + q] - s[p * n + p]) / (R::of(2.0) * apq);
                let t = {
                    let sign = if theta >= R::zero() { R::one() } else { -R::one() };
                    sign / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let sr = t * c;
                for k in 0..n {
                    let skp = s[k * n + p];
                    let skq = s[k * n + q];
                    s[k * n + p] = c * skp - sr * skq;
                    s[k * n + q] = sr * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[p * n + k];
                    let sqk = s[q * n + k];
                    s[p * n + k] = c * spk - sr * sqk;
                    s[q * n + k] = sr * spk + c * sqk;
                }
            }
        }
    }
    (0..n).map(|i| s[i * n + i]).collect()
}

/// Build a power-law design matrix: columns `x^{e_k}` for each exponent, plus
/// an optional leading constant column.
pub fn power_design<R: Real>(
    xs: &[R],
    exponents: &[Complex<R>],
    with_constant: bool,
) -> Vec<Vec<Complex<R>>> {
    xs.iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(exponents.len() + usize::from(with_constant));
            if with_constant {
                row.push(Complex::new(R::one(), R::zero()));
            }
            for &e in exponents {
                row.push(crate::real::real_powc(x, e));
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_synthetic_power_law() {
        // y = 3 x^{-1} + 5
        let xs: Vec<f64> = (1..=24).map(|k| 1.0 + 0.5 * k as f64).collect();
        let b: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::new(3.0 / x + 5.0, 0.0)).collect();
        let a = power_design(&xs, &[Complex::new(-1.0, 0.0)], true);
        let sol = lstsq(&a, &b).unwrap();
        assert!((sol.coeffs[0].re - 5.0).abs() < 1e-12);
        assert!((sol.coeffs[1].re - 3.0).abs() < 1e-12);
        assert!(sol.max_residual < 1e-12);
    }

    #[test]
    fn complex_coefficients_round_trip() {
        let xs: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let c0 = Complex::new(1.0, -2.0);
        let c1 = Complex::new(0.5, 0.25);
        let e = Complex::new(-0.5, 0.0);
        let b: Vec<Complex<f64>> = xs
            .iter()
            .map(|&x| c0 + c1 * crate::real::real_powc(x, e))
            .collect();
        let a = power_design(&xs, &[e], true);
        let sol = lstsq(&a, &b).unwrap();
        assert!((sol.coeffs[0] - c0).norm() < 1e-10);
        assert!((sol.coeffs[1] - c1).norm() < 1e-10);
    }

    #[test]
    fn rejects_ill_conditioned() {
        // Two nearly identical exponents on a narrow window.
        let xs: Vec<f64> = (0..24).map(|k| 10.0 + 1e-4 * k as f64).collect();
        let e = [Complex::new(1.0, 0.0), Complex::new(1.0 + 1e-12, 0.0)];
        let b: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::new(x, 0.0)).collect();
        let a = power_design(&xs, &e, true);
        assert!(matches!(lstsq(&a, &b), Err(FitError::IllConditioned { .. })));
    }

    #[test]
    fn rejects_under_determined() {
        let xs = [1.0f64, 2.0, 3.0];
        let e = [Complex::new(1.0, 0.0)];
        let b: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::new(x, 0.0)).collect();
        let a = power_design(&xs, &e, true);
        assert!(matches!(lstsq(&a, &b), Err(FitError::UnderDetermined { .. })));
    }
}
