//! Toroidal symbols on `T^n x Z^n`: difference operators, x-derivatives,
//! symbol-class seminorm estimates, and classical (poly-homogeneous) symbols.

use crate::lattice::{self, ball_threshold};
use crate::real::{angle_bracket, lattice_norm_sq, real_powc, Real};
use num_complex::Complex;
use smallvec::SmallVec;
use std::sync::Arc;
use thiserror::Error;

type XBuf<R> = SmallVec<[R; 4]>;

/// A scalar function on `T^n x Z^n`. Evaluation is pure; `x` is taken in
/// `[0,1)^n` and wrapped periodically by every built-in transformation.
#[derive(Clone)]
pub struct LatticeSymbol<R: Real> {
    dim: usize,
    x_constant: bool,
    eval: Arc<dyn Fn(&[R], &[i64]) -> Complex<R> + Send + Sync>,
}

impl<R: Real> std::fmt::Debug for LatticeSymbol<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeSymbol")
            .field("dim", &self.dim)
            .field("x_constant", &self.x_constant)
            .finish()
    }
}

impl<R: Real> LatticeSymbol<R> {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[R], &[i64]) -> Complex<R> + Send + Sync + 'static,
    {
        assert!(dim >= 1);
        LatticeSymbol { dim, x_constant: false, eval: Arc::new(f) }
    }

    /// An x-independent symbol (Fourier multiplier).
    pub fn multiplier<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[i64]) -> Complex<R> + Send + Sync + 'static,
    {
        assert!(dim >= 1);
        LatticeSymbol { dim, x_constant: true, eval: Arc::new(move |_x, l| f(l)) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the symbol is known to be independent of `x`.
    pub fn is_x_constant(&self) -> bool {
        self.x_constant
    }

    pub fn eval(&self, x: &[R], l: &[i64]) -> Complex<R> {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(l.len(), self.dim);
        (self.eval)(x, l)
    }

    /// Evaluate after wrapping `x` into `[0,1)^n`.
    pub fn eval_wrapped(&self, x: &[R], l: &[i64]) -> Complex<R> {
        if self.x_constant {
            return (self.eval)(x, l);
        }
        let xw: XBuf<R> = x.iter().map(|&c| c - c.floor()).collect();
        (self.eval)(&xw, l)
    }

    /// The average of `x -> sigma(x, l)` over the torus (periodic trapezoid
    /// rule on a uniform grid, exact for trigonometric polynomials of degree
    /// below the grid size).
    pub fn x_average(&self, l: &[i64], grid_per_axis: usize) -> Complex<R> {
        if self.x_constant {
            let x0 = vec![R::zero(); self.dim];
            return self.eval(&x0, l);
        }
        let grid = lattice::torus_grid::<R>(self.dim, grid_per_axis);
        let mut acc = Complex::new(R::zero(), R::zero());
        for x in &grid {
            acc = acc + self.eval(x, l);
        }
        acc / R::of(grid.len() as f64)
    }

    /// The translated symbol `(x, l) -> sigma(x - x0, l)`.
    pub fn translate(&self, x0: &[R]) -> LatticeSymbol<R> {
        assert_eq!(x0.len(), self.dim);
        if self.x_constant {
            return self.clone();
        }
        let inner = self.eval.clone();
        let shift: Vec<R> = x0.to_vec();
        LatticeSymbol {
            dim: self.dim,
            x_constant: false,
            eval: Arc::new(move |x, l| {
                let xs: XBuf<R> = x
                    .iter()
                    .zip(&shift)
                    .map(|(&a, &b)| {
                        let v = a - b;
                        v - v.floor()
                    })
                    .collect();
                inner(&xs, l)
            }),
        }
    }

    /// Pointwise product of two symbols.
    pub fn product(&self, other: &LatticeSymbol<R>) -> LatticeSymbol<R> {
        assert_eq!(self.dim, other.dim);
        let a = self.eval.clone();
        let b = other.eval.clone();
        LatticeSymbol {
            dim: self.dim,
            x_constant: self.x_constant && other.x_constant,
            eval: Arc::new(move |x, l| a(x, l) * b(x, l)),
        }
    }
}

/// Multi-index of iterated forward differences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceMultiIndex(pub Vec<u32>);

impl DifferenceMultiIndex {
    pub fn zero(dim: usize) -> Self {
        DifferenceMultiIndex(vec![0; dim])
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Iterated forward difference `Delta^alpha sigma`, expanded once into an
/// offset/coefficient table so evaluation is a plain weighted sum.
pub fn difference<R: Real>(
    sigma: &LatticeSymbol<R>,
    alpha: &DifferenceMultiIndex,
) -> LatticeSymbol<R> {
    assert_eq!(alpha.0.len(), sigma.dim());
    // Delta_j^a sigma(l) = sum_i (-1)^{a-i} C(a,i) sigma(l + i e_j), per axis.
    let mut table: Vec<(Vec<i64>, f64)> = vec![(vec![0; sigma.dim()], 1.0)];
    for (axis, &a) in alpha.0.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let mut next = Vec::with_capacity(table.len() * (a as usize + 1));
        for (offset, coeff) in &table {
            for i in 0..=a {
                let mut off = offset.clone();
                off[axis] += i as i64;
                let sign = if (a - i) % 2 == 0 { 1.0 } else { -1.0 };
                next.push((off, coeff * sign * binomial(a, i)));
            }
        }
        table = next;
    }
    let inner = sigma.eval.clone();
    let x_constant = sigma.x_constant;
    let dim = sigma.dim();
    LatticeSymbol {
        dim,
        x_constant,
        eval: Arc::new(move |x, l| {
            let mut acc = Complex::new(R::zero(), R::zero());
            let mut shifted: SmallVec<[i64; 4]> = SmallVec::from_slice(l);
            for (offset, coeff) in &table {
                for (s, (&base, &o)) in shifted.iter_mut().zip(l.iter().zip(offset)) {
                    *s = base + o;
                }
                acc = acc + inner(x, &shifted) * R::of(*coeff);
            }
            acc
        }),
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Central finite-difference approximation of `partial_x^beta sigma` with one
/// Richardson refinement per derivative and periodic wrap-around in `x`.
pub fn x_derivative<R: Real>(
    sigma: &LatticeSymbol<R>,
    beta: &[u32],
    h: R,
) -> LatticeSymbol<R> {
    assert_eq!(beta.len(), sigma.dim());
    assert!(h > R::zero());
    if sigma.x_constant && beta.iter().any(|&b| b > 0) {
        let dim = sigma.dim();
        return LatticeSymbol {
            dim,
            x_constant: true,
            eval: Arc::new(move |_x, _l| Complex::new(R::zero(), R::zero())),
        };
    }
    let mut out = sigma.clone();
    for (axis, &b) in beta.iter().enumerate() {
        for _ in 0..b {
            out = first_derivative_axis(&out, axis, h);
        }
    }
    out
}

fn first_derivative_axis<R: Real>(
    sigma: &LatticeSymbol<R>,
    axis: usize,
    h: R,
) -> LatticeSymbol<R> {
    let inner = sigma.eval.clone();
    let dim = sigma.dim();
    let central = move |x: &[R], l: &[i64], step: R| {
        let mut xp: XBuf<R> = SmallVec::from_slice(x);
        let mut xm: XBuf<R> = SmallVec::from_slice(x);
        xp[axis] = {
            let v = x[axis] + step;
            v - v.floor()
        };
        xm[axis] = {
            let v = x[axis] - step;
            v - v.floor()
        };
        (inner(&xp, l) - inner(&xm, l)) / (R::of(2.0) * step)
    };
    LatticeSymbol {
        dim,
        x_constant: sigma.x_constant,
        eval: Arc::new(move |x, l| {
            // Richardson on the even error series of the central difference:
            // (4 D(h/2) - D(h)) / 3 is O(h^4).
            let d1 = central(x, l, h);
            let d2 = central(x, l, h / R::of(2.0));
            (d2 * R::of(4.0) - d1) / R::of(3.0)
        }),
    }
}

/// Sup of `|d^beta Delta^alpha sigma| / <l>^{m - |alpha|}` over a deterministic
/// sample set: a low-discrepancy x-set, full lattice enumeration up to
/// `min(r_max, 64)`, and sampled dyadic shells beyond.
pub fn seminorm_estimate<R: Real>(
    sigma: &LatticeSymbol<R>,
    m: R,
    alpha: &DifferenceMultiIndex,
    beta: &[u32],
    r_max: f64,
    samples: usize,
) -> R {
    assert!(r_max >= 1.0);
    assert!(samples >= 1);
    let dim = sigma.dim();
    let diffed = difference(sigma, alpha);
    let tau = x_derivative(&diffed, beta, R::of(1e-4));
    let x_points: Vec<Vec<R>> = if sigma.x_constant {
        vec![vec![R::zero(); dim]]
    } else {
        lattice::kronecker_points(dim, samples)
    };
    let exponent = m - R::of(alpha.order() as f64);

    let ratio_at = |l: &[i64], r2: i64| -> R {
        let weight = real_powc(angle_bracket(R::of(r2 as f64)), Complex::new(exponent, R::zero()));
        let mut worst = R::zero();
        for x in &x_points {
            let v = tau.eval(x, l).norm() / weight.norm();
            worst = worst.max(v);
        }
        worst
    };

    let dense_radius = r_max.min(64.0);
    let mut best = lattice::fold_shell(
        dim,
        0,
        ball_threshold(dense_radius),
        R::zero(),
        |acc: R, l, r2| acc.max(ratio_at(l, r2)),
        |a, b| a.max(b),
    );

    // Dyadic shells beyond the dense region, sampled along deterministic rays.
    let mut rho = 128.0;
    while rho <= r_max {
        for dir in shell_directions(dim, 64) {
            let l: Vec<i64> = dir.iter().map(|&c| (c * rho).round() as i64).collect();
            let r2 = lattice_norm_sq(&l);
            if r2 > 0 {
                best = best.max(ratio_at(&l, r2));
            }
        }
        rho *= 2.0;
    }
    best
}

fn shell_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    if dim == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    for p in lattice::kronecker_points::<f64>(dim, count) {
        let v: Vec<f64> = p.iter().map(|&c| 2.0 * c - 1.0).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-6 {
            out.push(v.into_iter().map(|c| c / n).collect());
        }
    }
    out
}

/// One term of a poly-homogeneous expansion: a profile on `T^n x S^{n-1}`
/// extended by homogeneity of the given (possibly complex) degree.
#[derive(Clone)]
pub struct HomogeneousTerm<R: Real> {
    degree: Complex<R>,
    x_constant: bool,
    profile: Arc<dyn Fn(&[R], &[R]) -> Complex<R> + Send + Sync>,
}

impl<R: Real> std::fmt::Debug for HomogeneousTerm<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HomogeneousTerm").field("degree", &self.degree).finish()
    }
}

impl<R: Real> HomogeneousTerm<R> {
    /// `profile(x, omega)` with `omega` on the unit sphere.
    pub fn new<F>(degree: Complex<R>, profile: F) -> Self
    where
        F: Fn(&[R], &[R]) -> Complex<R> + Send + Sync + 'static,
    {
        HomogeneousTerm { degree, x_constant: false, profile: Arc::new(profile) }
    }

    /// An x-independent profile.
    pub fn radial<F>(degree: Complex<R>, profile: F) -> Self
    where
        F: Fn(&[R]) -> Complex<R> + Send + Sync + 'static,
    {
        HomogeneousTerm { degree, x_constant: true, profile: Arc::new(move |_x, w| profile(w)) }
    }

    pub fn degree(&self) -> Complex<R> {
        self.degree
    }

    pub fn is_x_constant(&self) -> bool {
        self.x_constant
    }

    pub fn profile(&self, x: &[R], omega: &[R]) -> Complex<R> {
        (self.profile)(x, omega)
    }

    /// Induced lattice values `|l|^degree * profile(x, l/|l|)`; undefined at 0.
    pub fn lattice_value(&self, x: &[R], l: &[i64]) -> Complex<R> {
        let r2 = lattice_norm_sq(l);
        assert!(r2 > 0, "homogeneous term evaluated at l = 0");
        let r = R::of(r2 as f64).sqrt();
        let omega: XBuf<R> = l.iter().map(|&c| R::of(c as f64) / r).collect();
        real_powc(r, self.degree) * (self.profile)(x, &omega)
    }
}

#[derive(Debug, Error)]
pub enum ClassicalSymbolError {
    #[error("term {index} has degree {got} but the ladder requires order - {index} = {want}")]
    DegreeLadder { index: usize, got: String, want: String },
    #[error("remainder dimension {got} does not match symbol dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
}

/// A classical toroidal symbol: an ordered ladder of homogeneous terms with
/// degrees `m, m-1, ...`, an optional remainder, and a value at `l = 0`.
#[derive(Clone)]
pub struct ClassicalToroidalSymbol<R: Real> {
    dim: usize,
    order: Complex<R>,
    terms: Vec<HomogeneousTerm<R>>,
    remainder: Option<LatticeSymbol<R>>,
    value_at_zero: Complex<R>,
}

impl<R: Real> std::fmt::Debug for ClassicalToroidalSymbol<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClassicalToroidalSymbol")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("terms", &self.terms.len())
            .field("has_remainder", &self.remainder.is_some())
            .finish()
    }
}

impl<R: Real> ClassicalToroidalSymbol<R> {
    /// `value_at_zero` defaults to the remainder's value at 0 when present,
    /// else 0.
    pub fn new(
        dim: usize,
        order: Complex<R>,
        terms: Vec<HomogeneousTerm<R>>,
        remainder: Option<LatticeSymbol<R>>,
        value_at_zero: Option<Complex<R>>,
    ) -> Result<Self, ClassicalSymbolError> {
        assert!(dim >= 1);
        let tol = R::of(1e-12);
        for (j, t) in terms.iter().enumerate() {
            let want = order - Complex::new(R::of(j as f64), R::zero());
            if (t.degree() - want).norm() > tol {
                return Err(ClassicalSymbolError::DegreeLadder {
                    index: j,
                    got: format!("{:?}", t.degree()),
                    want: format!("{want:?}"),
                });
            }
        }
        if let Some(r) = &remainder {
            if r.dim() != dim {
                return Err(ClassicalSymbolError::DimensionMismatch { got: r.dim(), want: dim });
            }
        }
        let value_at_zero = value_at_zero.unwrap_or_else(|| match &remainder {
            Some(r) => {
                let x0 = vec![R::zero(); dim];
                let l0 = vec![0i64; dim];
                r.eval(&x0, &l0)
            }
            None => Complex::new(R::zero(), R::zero()),
        });
        Ok(ClassicalToroidalSymbol { dim, order, terms, remainder, value_at_zero })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> Complex<R> {
        self.order
    }

    pub fn terms(&self) -> &[HomogeneousTerm<R>] {
        &self.terms
    }

    pub fn value_at_zero(&self) -> Complex<R> {
        self.value_at_zero
    }

    /// The homogeneous term of the given degree, if present in the ladder.
    pub fn term_of_degree(&self, degree: Complex<R>) -> Option<&HomogeneousTerm<R>> {
        self.terms.iter().find(|t| (t.degree() - degree).norm() <= R::of(1e-9))
    }

    /// Sum of homogeneous terms plus remainder at `l != 0`; `value_at_zero`
    /// at `l = 0`.
    pub fn eval(&self, x: &[R], l: &[i64]) -> Complex<R> {
        if lattice_norm_sq(l) == 0 {
            return self.value_at_zero;
        }
        let mut acc = Complex::new(R::zero(), R::zero());
        for t in &self.terms {
            acc = acc + t.lattice_value(x, l);
        }
        if let Some(r) = &self.remainder {
            acc = acc + r.eval(x, l);
        }
        acc
    }

    /// View as a plain lattice symbol.
    pub fn as_lattice_symbol(&self) -> LatticeSymbol<R> {
        let me = self.clone();
        let x_constant = self.terms.iter().all(|t| t.x_constant)
            && self.remainder.as_ref().map_or(true, |r| r.x_constant);
        LatticeSymbol {
            dim: self.dim,
            x_constant,
            eval: Arc::new(move |x, l| me.eval(x, l)),
        }
    }
}
