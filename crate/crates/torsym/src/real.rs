//! Scalar abstraction: all numerics are generic over a floating-point type.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the library is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Conversion from an `f64` constant; panics only for non-finite inputs
    /// on exotic scalar types.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{i theta}`.
pub fn unit_phase<R: Real>(theta: R) -> Complex<R> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

/// `base^e` for a positive real base and complex exponent, taking the fast
/// real path when the exponent is real.
pub fn real_powc<R: Real>(base: R, e: Complex<R>) -> Complex<R> {
    if e.im == R::zero() {
        Complex::new(base.powf(e.re), R::zero())
    } else {
        Complex::new(base, R::zero()).powc(e)
    }
}

/// `〈·〉 = sqrt(1 + |l|^2)` from the squared norm.
pub fn angle_bracket<R: Real>(norm_sq: R) -> R {
    (R::one() + norm_sq).sqrt()
}

/// Squared Euclidean norm of a lattice point, exact in `i64`.
pub fn lattice_norm_sq(l: &[i64]) -> i64 {
    l.iter().map(|&c| c * c).sum()
}

/// Euclidean norm of a real vector.
pub fn norm<R: Real>(v: &[R]) -> R {
    v.iter().map(|&c| c * c).sum::<R>().sqrt()
}
