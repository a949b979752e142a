//! Smooth compactly supported cutoff functions and their Mellin-type moments.

use crate::real::{real_powc, Real};
use num_complex::Complex;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffKind {
    /// Supported in `(0, infinity)`, vanishing to all orders at both ends.
    Bump,
    /// Identically 1 on a neighbourhood of `(-infinity, 0]`, smooth decay to 0.
    Plateau,
}

/// A smooth cutoff `eta` with known support, used to weight spectral sums.
#[derive(Clone)]
pub struct CutoffFunction<R: Real> {
    pub kind: CutoffKind,
    /// `eta` vanishes for arguments above this bound.
    pub support_upper: R,
    /// Bump: lower edge of the support. Plateau: end of the `eta == 1` region.
    pub edge: R,
    f: Arc<dyn Fn(R) -> R + Send + Sync>,
}

impl<R: Real> std::fmt::Debug for CutoffFunction<R> {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("CutoffFunction")
            .field("kind", &self.kind)
            .field("edge", &self.edge)
            .field("support_upper", &self.support_upper)
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum CutoffError {
    #[error("plateau moment diverges at 0 for Re s = {0} <= 0")]
    NonIntegrableMoment(f64),
}

fn smooth_step<R: Real>(x: R) -> R {
    // C^infinity transition, 0 at x<=0 and 1 at x>=1.
    let f = |v: R| {
        if v <= R::zero() {
            R::zero()
        } else {
            (-v.recip()).exp()
        }
    };
    let a = f(x);
    let b = f(R::one() - x);
    a / (a + b)
}

impl<R: Real> CutoffFunction<R> {
    /// `exp(-1/((u-a)(b-u)))` on `(a, b)`, rescaled to peak value 1.
    pub fn bump(a: R, b: R) -> Self {
        assert!(R::zero() < a && a < b, "bump needs 0 < a < b");
        let peak = R::of(4.0) / ((b - a) * (b - a));
        let f = move |u: R| {
            if u <= a || u >= b {
                R::zero()
            } else {
                (peak - ((u - a) * (b - u)).recip()).exp()
            }
        };
        CutoffFunction { kind: CutoffKind::Bump, support_upper: b, edge: a, f: Arc::new(f) }
    }

    /// Identically 1 on `(-infinity, plateau_end]`, smooth decay to 0 at
    /// `support_upper`.
    pub fn plateau(plateau_end: R, support_upper: R) -> Self {
        assert!(
            R::zero() < plateau_end && plateau_end < support_upper,
            "plateau needs 0 < plateau_end < support_upper"
        );
        let w = support_upper - plateau_end;
        let f = move |u: R| {
            if u <= plateau_end {
                R::one()
            } else if u >= support_upper {
                R::zero()
            } else {
                R::one() - smooth_step((u - plateau_end) / w)
            }
        };
        CutoffFunction {
            kind: CutoffKind::Plateau,
            support_upper,
            edge: plateau_end,
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, u: R) -> R {
        (self.f)(u)
    }

    /// Smallest radius `r` with `t r^2` beyond the support, i.e. the exact
    /// truncation radius for sums weighted by `eta(t |l|^2)`.
    pub fn truncation_radius(&self, t: R) -> R {
        (self.support_upper / t).sqrt()
    }
}

/// The halved Mellin-type moment `(1/2) * integral eta(u) u^{s/2 - 1} du`.
///
/// For a plateau cutoff the `[0, edge]` piece (where `eta == 1`) is done in
/// closed form and requires `Re s > 0`.
pub fn eta_moment<R: Real>(
    eta: &CutoffFunction<R>,
    s: Complex<R>,
) -> Result<Complex<R>, CutoffError> {
    let half = R::of(0.5);
    let integrand = |u: R| {
        Complex::new(eta.eval(u), R::zero()) * real_powc(u, s / R::of(2.0) - Complex::new(R::one(), R::zero()))
    };
    match eta.kind {
        CutoffKind::Bump => {
            let v = adaptive_simpson(&integrand, eta.edge, eta.support_upper, R::of(1e-13), 28);
            Ok(v * half)
        }
        CutoffKind::Plateau => {
            if s.re <= R::zero() {
                return Err(CutoffError::NonIntegrableMoment(
                    s.re.to_f64().unwrap_or(f64::NAN),
                ));
            }
            // eta == 1 exactly on [0, edge]: integral u^{s/2-1} = edge^{s/2} / (s/2)
            let s_half = s / R::of(2.0);
            let head = real_powc(eta.edge, s_half) / s_half;
            let tail = adaptive_simpson(&integrand, eta.edge, eta.support_upper, R::of(1e-13), 28);
            Ok((head + tail) * half)
        }
    }
}

/// Adaptive Simpson quadrature for complex-valued integrands on a real interval.
pub fn adaptive_simpson<R: Real, F>(f: &F, a: R, b: R, tol: R, max_depth: u32) -> Complex<R>
where
    F: Fn(R) -> Complex<R>,
{
    let m = (a + b) / R::of(2.0);
    let fa = f(a);
    let fb = f(b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, b - a);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

fn simpson<R: Real>(fa: Complex<R>, fm: Complex<R>, fb: Complex<R>, h: R) -> Complex<R> {
    (fa + fm * R::of(4.0) + fb) * (h / R::of(6.0))
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<R: Real, F>(
    f: &F,
    a: R,
    b: R,
    fa: Complex<R>,
    fm: Complex<R>,
    fb: Complex<R>,
    whole: Complex<R>,
    tol: R,
    depth: u32,
) -> Complex<R>
where
    F: Fn(R) -> Complex<R>,
{
    let m = (a + b) / R::of(2.0);
    let lm = (a + m) / R::of(2.0);
    let rm = (m + b) / R::of(2.0);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= R::of(15.0) * tol {
        return left + right + delta / R::of(15.0);
    }
    let half_tol = tol / R::of(2.0);
    simpson_recurse(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
        + simpson_recurse(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
}
