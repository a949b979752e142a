//! Smooth homogeneous extension of lattice symbols from `Z^n \ {0}` to
//! `R^n \ {0}`.
//!
//! A 0-homogeneous lattice symbol determines a unique continuous (indeed
//! smooth) 0-homogeneous function on `R^n \ {0}`. We evaluate it by sampling
//! the symbol at `round(q s omega)` along a dyadic ladder `q = 2, 4, ...`,
//! correcting the rounding offset with lattice-difference estimates of the
//! gradient and Hessian (rescaled forward differences converge to the
//! derivatives of the extension), and Richardson-extrapolating in `1/q`.

use crate::real::{lattice_norm_sq, norm, real_powc, Real};
use crate::richardson::richardson_dyadic;
use crate::toroidal::LatticeSymbol;
use num_complex::Complex;
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtendError {
    #[error("xi = 0 is outside the domain of a homogeneous extension")]
    ZeroDirection,
    #[error("homogeneity witness failed: |sigma(x, {r} l) - {r}^m sigma(x, l)| = {deviation:.3e} at l = {at:?} (tolerance 1e-9)")]
    NotHomogeneous { r: i64, at: Vec<i64>, deviation: f64 },
    #[error("depth must be at least 2 for extrapolation")]
    DepthTooSmall,
}

/// Point evaluation of an extension together with an error estimate.
#[derive(Debug, Clone)]
pub struct ExtensionValue<R: Real> {
    pub value: Complex<R>,
    pub error_estimate: R,
    /// True when the query hit a lattice point and the symbol value was
    /// returned exactly.
    pub lattice_exact: bool,
}

/// Gradient evaluation of an extension.
#[derive(Debug, Clone)]
pub struct ExtensionGradient<R: Real> {
    pub gradient: Vec<Complex<R>>,
    pub error_estimate: R,
}

/// How an extension value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Exact lattice agreement (short-circuit path).
    LatticeExact,
    /// Dyadic sampling with Richardson extrapolation.
    LimitConstructed,
}

/// The homogeneous extension of an `m`-homogeneous lattice symbol, evaluable
/// anywhere on `R^n \ {0}`.
pub struct HomogeneousExtension<R: Real> {
    sigma: LatticeSymbol<R>,
    degree: Complex<R>,
    depth: u32,
}

impl<R: Real> HomogeneousExtension<R> {
    pub fn new(sigma: LatticeSymbol<R>, degree: Complex<R>, depth: u32) -> Self {
        HomogeneousExtension { sigma, degree, depth }
    }

    pub fn degree(&self) -> Complex<R> {
        self.degree
    }

    pub fn value(&self, x: &[R], xi: &[R]) -> Result<ExtensionValue<R>, ExtendError> {
        extend_homogeneous_term(&self.sigma, self.degree, x, xi, self.depth)
    }

    pub fn provenance(&self, xi: &[R]) -> Provenance {
        if lattice_point(xi).is_some() {
            Provenance::LatticeExact
        } else {
            Provenance::LimitConstructed
        }
    }
}

fn lattice_point<R: Real>(xi: &[R]) -> Option<Vec<i64>> {
    let tol = R::of(1e-9);
    let mut out = Vec::with_capacity(xi.len());
    let mut nonzero = false;
    for &c in xi {
        let r = c.round();
        if (c - r).abs() > tol {
            return None;
        }
        let v = r.to_i64()?;
        nonzero |= v != 0;
        out.push(v);
    }
    nonzero.then_some(out)
}

/// Check `sigma(x, r l) = r^degree sigma(x, l)` for `r = 2, 3` on a fixed
/// witness set.
fn homogeneity_witness<R: Real>(
    sigma: &LatticeSymbol<R>,
    degree: Complex<R>,
    x: &[R],
) -> Result<(), ExtendError> {
    let dim = sigma.dim();
    let mut witnesses: Vec<Vec<i64>> = Vec::new();
    for axis in 0..dim {
        let mut e = vec![0i64; dim];
        e[axis] = 1;
        witnesses.push(e);
    }
    witnesses.push(vec![1; dim]);
    let mut mixed = vec![1i64; dim];
    mixed[0] = 2;
    witnesses.push(mixed);
    let tol = R::of(1e-9);
    for l in &witnesses {
        let base = sigma.eval(x, l);
        for r in [2i64, 3] {
            let scaled: Vec<i64> = l.iter().map(|&c| c * r).collect();
            let factor = real_powc(R::of(r as f64), degree);
            let dev = (sigma.eval(x, &scaled) - base * factor).norm();
            let scale = R::one().max(base.norm());
            if dev > tol * scale {
                return Err(ExtendError::NotHomogeneous {
                    r,
                    at: l.clone(),
                    deviation: (dev / scale).to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(())
}

/// Scale factor keeping sampled lattice arguments away from the origin:
/// `s = max(1, 8 / mu)` with `mu` the smallest non-negligible component of
/// the unit direction.
fn direction_scale<R: Real>(omega: &[R]) -> R {
    let mut mu = R::one();
    for &c in omega {
        let a = c.abs();
        if a > R::of(1e-12) {
            mu = mu.min(a);
        }
    }
    R::one().max(R::of(8.0) / mu)
}

/// Value, gradient and Hessian of the symbol as a function on `R^n` near a
/// lattice point, from central differences.
struct LocalJet<R: Real> {
    value: Complex<R>,
    grad: SmallVec<[Complex<R>; 4]>,
    hess: Vec<Complex<R>>, // row-major dim x dim
}

/// Evaluate the smooth 0-homogeneous extension of `sigma` at direction `xi`.
pub fn extend_value<R: Real>(
    sigma: &LatticeSymbol<R>,
    x: &[R],
    xi: &[R],
    depth: u32,
) -> Result<ExtensionValue<R>, ExtendError> {
    extend_homogeneous_term(sigma, Complex::new(R::zero(), R::zero()), x, xi, depth)
}

/// Evaluate the extension of an `m`-homogeneous lattice symbol at `xi`,
/// via `|xi|^m` times the 0-homogeneous extension of `|l|^{-m} sigma`.
pub fn extend_homogeneous_term<R: Real>(
    sigma: &LatticeSymbol<R>,
    degree: Complex<R>,
    x: &[R],
    xi: &[R],
    depth: u32,
) -> Result<ExtensionValue<R>, ExtendError> {
    assert_eq!(xi.len(), sigma.dim());
    let r = norm(xi);
    if r == R::zero() {
        return Err(ExtendError::ZeroDirection);
    }
    if depth < 2 {
        return Err(ExtendError::DepthTooSmall);
    }
    homogeneity_witness(sigma, degree, x)?;

    // Exact lattice agreement short-circuits the construction.
    if let Some(l) = lattice_point(xi) {
        return Ok(ExtensionValue {
            value: sigma.eval(x, &l),
            error_estimate: R::zero(),
            lattice_exact: true,
        });
    }

    // Reduce to the 0-homogeneous symbol |l|^{-degree} sigma.
    let normalized = |l: &[i64], xv: &[R]| -> Complex<R> {
        let r2 = lattice_norm_sq(l);
        let rr = R::of(r2 as f64).sqrt();
        sigma.eval(xv, l) / real_powc(rr, degree)
    };

    let omega: Vec<R> = xi.iter().map(|&c| c / r).collect();
    let s = direction_scale(&omega);
    let mut levels: Vec<Complex<R>> = Vec::with_capacity(depth as usize - 1);
    for d in 2..=depth {
        let q = R::of(2f64.powi(d as i32));
        levels.push(corrected_sample(&normalized, x, &omega, q * s));
    }
    // Taylor-corrected samples carry a smooth leading error of order q^{-2}.
    let ex = richardson_dyadic(&levels, 2, 1);
    let scale = real_powc(r, degree);
    Ok(ExtensionValue {
        value: ex.value * scale,
        error_estimate: ex.error_estimate * scale.norm(),
        lattice_exact: false,
    })
}

/// One Taylor-corrected sample of the 0-homogeneous extension at `scale *
/// omega`: evaluate the normalized symbol at the nearest lattice point and
/// correct by the local gradient and Hessian.
fn corrected_sample<R: Real>(
    normalized: &impl Fn(&[i64], &[R]) -> Complex<R>,
    x: &[R],
    omega: &[R],
    scale: R,
) -> Complex<R> {
    let dim = omega.len();
    let target: Vec<R> = omega.iter().map(|&c| c * scale).collect();
    let l: Vec<i64> = target.iter().map(|&c| c.round().to_i64().expect("in range")).collect();
    let jet = local_jet_fn(dim, |lp| normalized(lp, x), &l);
    let mut v = jet.value;
    let d: SmallVec<[R; 4]> = target.iter().zip(&l).map(|(&t, &c)| t - R::of(c as f64)).collect();
    for a in 0..dim {
        v = v + jet.grad[a] * d[a];
    }
    let half = R::of(0.5);
    for a in 0..dim {
        for b in 0..dim {
            v = v + jet.hess[a * dim + b] * d[a] * d[b] * half;
        }
    }
    v
}

fn local_jet_fn<R: Real>(
    dim: usize,
    ev: impl Fn(&[i64]) -> Complex<R>,
    l: &[i64],
) -> LocalJet<R> {
    let shift = |l: &[i64], a: usize, da: i64, b: usize, db: i64| {
        let mut s: SmallVec<[i64; 4]> = SmallVec::from_slice(l);
        s[a] += da;
        if b < dim {
            s[b] += db;
        }
        s
    };
    let v0 = ev(l);
    let half = R::of(0.5);
    let quarter = R::of(0.25);
    let mut grad: SmallVec<[Complex<R>; 4]> = SmallVec::new();
    for a in 0..dim {
        let p = ev(&shift(l, a, 1, dim, 0));
        let m = ev(&shift(l, a, -1, dim, 0));
        grad.push((p - m) * half);
    }
    let mut hess = vec![Complex::new(R::zero(), R::zero()); dim * dim];
    for a in 0..dim {
        let p = ev(&shift(l, a, 1, dim, 0));
        let m = ev(&shift(l, a, -1, dim, 0));
        hess[a * dim + a] = p - v0 * R::of(2.0) + m;
        for b in a + 1..dim {
            let pp = ev(&shift(l, a, 1, b, 1));
            let pm = ev(&shift(l, a, 1, b, -1));
            let mp = ev(&shift(l, a, -1, b, 1));
            let mm = ev(&shift(l, a, -1, b, -1));
            let v = (pp - pm - mp + mm) * quarter;
            hess[a * dim + b] = v;
            hess[b * dim + a] = v;
        }
    }
    LocalJet { value: v0, grad, hess }
}

/// Gradient of the 0-homogeneous extension at `xi`; the result is
/// (-1)-homogeneous in `xi`.
pub fn extend_gradient<R: Real>(
    sigma: &LatticeSymbol<R>,
    x: &[R],
    xi: &[R],
    depth: u32,
) -> Result<ExtensionGradient<R>, ExtendError> {
    assert_eq!(xi.len(), sigma.dim());
    let dim = sigma.dim();
    let r = norm(xi);
    if r == R::zero() {
        return Err(ExtendError::ZeroDirection);
    }
    if depth < 2 {
        return Err(ExtendError::DepthTooSmall);
    }
    homogeneity_witness(sigma, Complex::new(R::zero(), R::zero()), x)?;

    let omega: Vec<R> = xi.iter().map(|&c| c / r).collect();
    let s = direction_scale(&omega);
    let mut per_axis: Vec<Vec<Complex<R>>> = vec![Vec::new(); dim];
    for d in 2..=depth {
        let q = R::of(2f64.powi(d as i32));
        let scale = q * s;
        let target: Vec<R> = omega.iter().map(|&c| c * scale).collect();
        let l: Vec<i64> =
            target.iter().map(|&c| c.round().to_i64().expect("in range")).collect();
        let jet = local_jet_fn(dim, |lp| sigma.eval(x, lp), &l);
        let dvec: SmallVec<[R; 4]> =
            target.iter().zip(&l).map(|(&t, &c)| t - R::of(c as f64)).collect();
        let lnorm = norm(&target);
        for a in 0..dim {
            // first-order corrected gradient at the off-lattice point, then
            // rescaled by |l| ((-1)-homogeneity of the derivative).
            let mut g = jet.grad[a];
            for b in 0..dim {
                g = g + jet.hess[a * dim + b] * dvec[b];
            }
            per_axis[a].push(g * lnorm);
        }
    }
    let mut gradient = Vec::with_capacity(dim);
    let mut err = R::zero();
    for axis_levels in &per_axis {
        let ex = richardson_dyadic(axis_levels, 2, 1);
        gradient.push(ex.value);
        err = err.max(ex.error_estimate);
    }
    // Scale from the unit sphere to |xi|: gradient is (-1)-homogeneous.
    let scale = R::one() / r;
    Ok(ExtensionGradient {
        gradient: gradient.into_iter().map(|g| g * scale).collect(),
        error_estimate: err * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toroidal::LatticeSymbol;

    fn ratio_symbol() -> LatticeSymbol<f64> {
        // sigma(l) = l_1^2 / |l|^2, 0-homogeneous
        LatticeSymbol::multiplier(2, |l| {
            let r2 = lattice_norm_sq(l) as f64;
            Complex::new((l[0] * l[0]) as f64 / r2, 0.0)
        })
    }

    #[test]
    fn closed_form_direction() {
        let sig = ratio_symbol();
        let v = extend_value(&sig, &[0.0, 0.0], &[1.0, 1.0], 12).unwrap();
        assert!(!v.lattice_exact);
        assert!((v.value.re - 0.5).abs() < 1e-8, "{}", v.value.re);
    }

    #[test]
    fn lattice_points_short_circuit() {
        let sig = ratio_symbol();
        let v = extend_value(&sig, &[0.0, 0.0], &[2.0, 1.0], 12).unwrap();
        assert!(v.lattice_exact);
        assert_eq!(v.value.re, 4.0 / 5.0);
        assert_eq!(v.error_estimate, 0.0);
    }

    #[test]
    fn constant_symbol_extends_to_constant() {
        let sig = LatticeSymbol::<f64>::multiplier(2, |_| Complex::new(3.25, -1.0));
        for xi in [[0.7, 0.31], [-2.3, 0.11]] {
            let v = extend_value(&sig, &[0.0, 0.0], &xi, 8).unwrap();
            assert!((v.value - Complex::new(3.25, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_zero_direction_and_inhomogeneous_input() {
        let sig = ratio_symbol();
        assert!(matches!(
            extend_value(&sig, &[0.0, 0.0], &[0.0, 0.0], 8),
            Err(ExtendError::ZeroDirection)
        ));
        let bad = LatticeSymbol::<f64>::multiplier(2, |l| {
            Complex::new((lattice_norm_sq(l) as f64).sqrt(), 0.0)
        });
        assert!(matches!(
            extend_value(&bad, &[0.0, 0.0], &[1.0, 0.5], 8),
            Err(ExtendError::NotHomogeneous { .. })
        ));
    }

    #[test]
    fn gradient_matches_closed_form() {
        let sig = ratio_symbol();
        // grad(xi1^2/|xi|^2) = (2 xi1 xi2^2, -2 xi1^2 xi2) / |xi|^4
        let closed = |xi: &[f64]| {
            let r2 = xi[0] * xi[0] + xi[1] * xi[1];
            [
                2.0 * xi[0] * xi[1] * xi[1] / (r2 * r2),
                -2.0 * xi[0] * xi[0] * xi[1] / (r2 * r2),
            ]
        };
        for xi in [[1.0, 0.0], [0.37, 1.21], [2.0, -0.73]] {
            let g = extend_gradient(&sig, &[0.0, 0.0], &xi, 12).unwrap();
            let want = closed(&xi);
            for a in 0..2 {
                assert!(
                    (g.gradient[a].re - want[a]).abs() < 1e-6,
                    "axis {a} at {xi:?}: {} vs {}",
                    g.gradient[a].re,
                    want[a]
                );
            }
        }
        // at (1, 0) the closed-form gradient vanishes
        let g = extend_gradient(&sig, &[0.0, 0.0], &[1.0, 0.0], 12).unwrap();
        assert!(g.gradient[0].norm() < 1e-8 && g.gradient[1].norm() < 1e-8);
    }

    #[test]
    fn gradient_is_minus_one_homogeneous() {
        let sig = ratio_symbol();
        let xi = [0.9, 0.44];
        let xi2 = [1.8, 0.88];
        let g1 = extend_gradient(&sig, &[0.0, 0.0], &xi, 12).unwrap();
        let g2 = extend_gradient(&sig, &[0.0, 0.0], &xi2, 12).unwrap();
        let n1 = norm(&g1.gradient.iter().map(|c| c.norm()).collect::<Vec<_>>());
        let n2 = norm(&g2.gradient.iter().map(|c| c.norm()).collect::<Vec<_>>());
        assert!((n2 / n1 - 0.5).abs() < 1e-6, "{n2} vs {n1}");
    }

    #[test]
    fn zero_gradient_for_constant() {
        let sig = LatticeSymbol::<f64>::multiplier(2, |_| Complex::new(2.0, 0.5));
        let g = extend_gradient(&sig, &[0.0, 0.0], &[0.61, 1.17], 10).unwrap();
        assert!(g.gradient.iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn homogeneous_term_extension() {
        // sigma(l) = |l|^-2: extension at (3,4) is 1/25 (radial closed form,
        // also a lattice point).
        let sig = LatticeSymbol::<f64>::multiplier(2, |l| {
            Complex::new(1.0 / lattice_norm_sq(l) as f64, 0.0)
        });
        let m = Complex::new(-2.0, 0.0);
        let v = extend_homogeneous_term(&sig, m, &[0.0, 0.0], &[3.0, 4.0], 12).unwrap();
        assert!((v.value.re - 0.04).abs() < 1e-12);

        // odd profile on the axis: l1 |l|^-3 at (0, 2) -> 0
        let odd = LatticeSymbol::<f64>::multiplier(2, |l| {
            let r2 = lattice_norm_sq(l) as f64;
            Complex::new(l[0] as f64 / r2.powf(1.5), 0.0)
        });
        let v = extend_homogeneous_term(&odd, Complex::new(-2.0, 0.0), &[0.0, 0.0], &[0.0, 2.0], 12)
            .unwrap();
        assert!(v.value.norm() < 1e-12);

        // l1^2 |l|^-4 at (1,2): 1/25, off-lattice check via non-lattice scaling
        let q = LatticeSymbol::<f64>::multiplier(2, |l| {
            let r2 = lattice_norm_sq(l) as f64;
            Complex::new((l[0] * l[0]) as f64 / (r2 * r2), 0.0)
        });
        let v = extend_homogeneous_term(
            &q,
            Complex::new(-2.0, 0.0),
            &[0.0, 0.0],
            &[0.7071067811865476, 1.4142135623730951],
            12,
        )
        .unwrap();
        // value = xi1^2/|xi|^4 = 0.5 / (2.5)^2 ... for xi = (1,2)/sqrt(2): |xi|^2 = 2.5
        let want = 0.5 / (2.5 * 2.5);
        assert!((v.value.re - want).abs() < 1e-7, "{} vs {want}", v.value.re);
    }

    #[test]
    fn log_lipschitz_bound_on_same_orthant_pairs() {
        // |sigma(l0) - sigma(l1)| <= C |ln(|l0|/|l1|)| over same-orthant pairs.
        let sig = ratio_symbol();
        let x = [0.0, 0.0];
        let pairs = [
            ([1i64, 1], [2i64, 3]),
            ([1, 2], [5, 4]),
            ([3, 1], [9, 2]),
            ([2, 5], [11, 13]),
        ];
        let mut worst = 0.0f64;
        for (a, b) in pairs {
            let va = sig.eval(&x, &a);
            let vb = sig.eval(&x, &b);
            let ra = (lattice_norm_sq(&a) as f64).sqrt();
            let rb = (lattice_norm_sq(&b) as f64).sqrt();
            let denom = (ra / rb).ln().abs().max(1e-6);
            worst = worst.max((va - vb).norm() / denom);
        }
        assert!(worst < 10.0, "log-Lipschitz ratio blew up: {worst}");
    }

    #[test]
    fn richardson_convergence_order_at_least_two() {
        let sig = ratio_symbol();
        let x = [0.0, 0.0];
        let xi = [0.8191520442889918, 0.5735764363510462]; // irrational direction
        let truth = xi[0] * xi[0] / (xi[0] * xi[0] + xi[1] * xi[1]);
        let mut errs = Vec::new();
        let mut qs = Vec::new();
        for depth in 4..=10 {
            let v = extend_value(&sig, &x, &xi, depth).unwrap();
            let e = (v.value.re - truth).abs();
            if e > 1e-14 {
                errs.push(e.ln());
                qs.push((2f64.powi(depth as i32)).ln());
            }
        }
        assert!(errs.len() >= 4, "errors hit round-off too early to fit");
        // least-squares slope of ln(err) vs ln(q)
        let n = errs.len() as f64;
        let sx: f64 = qs.iter().sum();
        let sy: f64 = errs.iter().sum();
        let sxx: f64 = qs.iter().map(|v| v * v).sum();
        let sxy: f64 = qs.iter().zip(&errs).map(|(a, b)| a * b).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope <= -2.0, "observed order {} < 2", -slope);
    }
}
