//! Quantization of toroidal symbols: the operator `Op(sigma)` acting on
//! trigonometric polynomials, convolution-kernel slices, and direct traces.

use crate::lattice::{self, ball_threshold};
use crate::real::{angle_bracket, lattice_norm_sq, real_powc, unit_phase, Real};
use crate::toroidal::LatticeSymbol;
use num_complex::Complex;
use num_traits::Zero;
use rustfft::{FftNum, FftPlanner};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuantizeError {
    #[error("grid {grid} per axis cannot resolve the result; need at least {required} (aliasing refused)")]
    Aliasing { grid: usize, required: usize },
    #[error("grid size {0} is not a power of two")]
    GridNotPowerOfTwo(usize),
    #[error("declared order {order} >= -{dim}: the symbol sum is not absolutely convergent")]
    NotTraceClass { order: f64, dim: usize },
}

/// A function with finitely many Fourier coefficients on `Z^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial<R: Real> {
    dim: usize,
    coeffs: BTreeMap<Vec<i64>, Complex<R>>,
}

impl<R: Real> TrigPolynomial<R> {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1);
        TrigPolynomial { dim, coeffs: BTreeMap::new() }
    }

    pub fn from_coeffs<I>(dim: usize, coeffs: I) -> Self
    where
        I: IntoIterator<Item = (Vec<i64>, Complex<R>)>,
    {
        let mut p = Self::zero(dim);
        for (l, c) in coeffs {
            p.set_coeff(l, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn set_coeff(&mut self, l: Vec<i64>, c: Complex<R>) {
        assert_eq!(l.len(), self.dim);
        if c.is_zero() {
            self.coeffs.remove(&l);
        } else {
            self.coeffs.insert(l, c);
        }
    }

    pub fn coeff(&self, l: &[i64]) -> Complex<R> {
        self.coeffs.get(l).copied().unwrap_or_else(Complex::zero)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex<R>)> {
        self.coeffs.iter()
    }

    /// Largest per-axis frequency magnitude in the support.
    pub fn max_freq(&self) -> i64 {
        self.coeffs
            .keys()
            .flat_map(|l| l.iter().map(|&c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// `f(x) = sum_l c_l e^{2 pi i x . l}`.
    pub fn eval(&self, x: &[R]) -> Complex<R> {
        assert_eq!(x.len(), self.dim);
        let mut acc = Complex::zero();
        for (l, c) in &self.coeffs {
            let phase = dot_phase(x, l);
            acc = acc + *c * unit_phase(phase);
        }
        acc
    }

    /// The translate `f(. - x0)`, i.e. coefficients `e^{-2 pi i x0 . l} c_l`.
    pub fn translate(&self, x0: &[R]) -> TrigPolynomial<R> {
        assert_eq!(x0.len(), self.dim);
        let coeffs = self
            .coeffs
            .iter()
            .map(|(l, c)| (l.clone(), *c * unit_phase(-dot_phase(x0, l))))
            .collect();
        TrigPolynomial { dim: self.dim, coeffs }
    }

    /// Recover coefficients from samples on a uniform `n^dim` grid (forward
    /// discrete transform). Bins are mapped back to frequencies in
    /// `[-n/2, n/2)`; coefficients below `1e-13 * max` are dropped.
    pub fn from_grid_samples(dim: usize, n: usize, values: &[Complex<R>]) -> Self
    where
        R: FftNum,
    {
        assert_eq!(values.len(), n.pow(dim as u32));
        let mut data = values.to_vec();
        fft_nd(&mut data, &vec![n; dim], false);
        let scale = R::of((n.pow(dim as u32)) as f64);
        let peak = data.iter().map(|c| c.norm()).fold(R::zero(), |a, b| a.max(b));
        let tol = peak * R::of(1e-13);
        let mut p = Self::zero(dim);
        let mut idx = vec![0usize; dim];
        for flat in 0..data.len() {
            let mut rem = flat;
            for i in idx.iter_mut().rev() {
                *i = rem % n;
                rem /= n;
            }
            let c = data[flat] / scale;
            if c.norm() > tol {
                let l: Vec<i64> = idx
                    .iter()
                    .map(|&i| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 })
                    .collect();
                p.set_coeff(l, c);
            }
        }
        p
    }
}

fn dot_phase<R: Real>(x: &[R], l: &[i64]) -> R {
    let mut acc = R::zero();
    for (&xi, &li) in x.iter().zip(l) {
        acc = acc + xi * R::of(li as f64);
    }
    R::TAU() * acc
}

/// Function samples on a uniform periodic grid, row-major over `n^dim` points.
#[derive(Debug, Clone)]
pub struct GridFunction<R: Real> {
    pub dim: usize,
    pub n: usize,
    pub values: Vec<Complex<R>>,
}

impl<R: Real> GridFunction<R> {
    pub fn point(&self, flat: usize) -> Vec<R> {
        let mut rem = flat;
        let mut out = vec![R::zero(); self.dim];
        for i in (0..self.dim).rev() {
            out[i] = R::of((rem % self.n) as f64) / R::of(self.n as f64);
            rem /= self.n;
        }
        out
    }

    pub fn sup_distance(&self, other: &GridFunction<R>) -> R {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).norm())
            .fold(R::zero(), |a, b| a.max(b))
    }
}

/// In-place n-dimensional FFT along each axis (unnormalized).
fn fft_nd<R: Real + FftNum>(data: &mut [Complex<R>], dims: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<R>::new();
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total);
    for axis in 0..dims.len() {
        let n = dims[axis];
        let fft =
            if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride: usize = dims[axis + 1..].iter().product();
        let block = stride * n;
        let mut line = vec![Complex::zero(); n];
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + off + i * stride];
                }
                fft.process(&mut line);
                for (i, slot) in line.iter().enumerate() {
                    data[base + off + i * stride] = *slot;
                }
            }
        }
    }
}

fn bin_of(l: &[i64], n: usize) -> usize {
    let mut flat = 0usize;
    for &c in l {
        let b = c.rem_euclid(n as i64) as usize;
        flat = flat * n + b;
    }
    flat
}

/// `Op(sigma) f` sampled on a uniform `n_grid^dim` grid.
///
/// Groups the sum by frequency: for each `l` in the support of `f`, the slice
/// `sigma(., l)` is sampled on the grid and pushed through a forward FFT, so
/// the result is synthesized with one inverse FFT. Exact (to round-off) on the
/// grid; the resolution must satisfy `n_grid >= 2 * max_freq(f) + 1` and the
/// symbol is assumed resolved by the same grid in `x`.
pub fn apply<R: Real + FftNum>(
    sigma: &LatticeSymbol<R>,
    f: &TrigPolynomial<R>,
    n_grid: usize,
) -> Result<GridFunction<R>, QuantizeError> {
    assert_eq!(sigma.dim(), f.dim());
    let dim = sigma.dim();
    if !n_grid.is_power_of_two() {
        return Err(QuantizeError::GridNotPowerOfTwo(n_grid));
    }
    let required = (2 * f.max_freq() + 1) as usize;
    if n_grid < required {
        return Err(QuantizeError::Aliasing { grid: n_grid, required });
    }
    let total = n_grid.pow(dim as u32);
    let dims = vec![n_grid; dim];
    let mut spectrum = vec![Complex::<R>::zero(); total];

    if sigma.is_x_constant() {
        let x0 = vec![R::zero(); dim];
        for (l, c) in f.coeffs() {
            spectrum[bin_of(l, n_grid)] = spectrum[bin_of(l, n_grid)] + sigma.eval(&x0, l) * *c;
        }
    } else {
        let grid = lattice::torus_grid::<R>(dim, n_grid);
        let scale = R::of(total as f64);
        let mut slice = vec![Complex::<R>::zero(); total];
        for (l, c) in f.coeffs() {
            for (j, x) in grid.iter().enumerate() {
                slice[j] = sigma.eval(x, l);
            }
            fft_nd(&mut slice, &dims, false);
            let shift = bin_of(l, n_grid);
            // target bin (k + l) mod n, axis-wise; adding `shift` axis-wise.
            let mut idx = vec![0usize; dim];
            for (k, s) in slice.iter().enumerate() {
                let mut rem = k;
                for i in (0..dim).rev() {
                    idx[i] = rem % n_grid;
                    rem /= n_grid;
                }
                let mut srem = shift;
                let mut target = 0usize;
                for i in 0..dim {
                    let sh: usize = {
                        // recover axis component of `shift`
                        let pow = n_grid.pow((dim - 1 - i) as u32);
                        let v = srem / pow;
                        srem %= pow;
                        v
                    };
                    target = target * n_grid + (idx[i] + sh) % n_grid;
                }
                spectrum[target] = spectrum[target] + *s * *c / scale;
            }
        }
    }

    fft_nd(&mut spectrum, &dims, true);
    Ok(GridFunction { dim, n: n_grid, values: spectrum })
}

/// Literal finite sum `sum_l e^{2 pi i x . l} sigma(x, l) fhat(l)`; the oracle
/// for [`apply`].
pub fn apply_direct<R: Real>(
    sigma: &LatticeSymbol<R>,
    f: &TrigPolynomial<R>,
    x: &[R],
) -> Complex<R> {
    assert_eq!(sigma.dim(), f.dim());
    let mut acc = Complex::zero();
    for (l, c) in f.coeffs() {
        acc = acc + sigma.eval(x, l) * *c * unit_phase(dot_phase(x, l));
    }
    acc
}

/// Truncated convolution-kernel slice `kappa_{A,x}(y)` on a uniform y-grid.
#[derive(Debug, Clone)]
pub struct KernelSlice<R: Real> {
    pub x: Vec<R>,
    pub grid: GridFunction<R>,
}

/// `kappa_{A,x}(y) ~ sum_{|l| <= radius} sigma(x, l) e^{2 pi i y . l}`.
pub fn kernel_slice<R: Real + FftNum>(
    sigma: &LatticeSymbol<R>,
    x: &[R],
    radius: f64,
    n_grid: usize,
) -> Result<KernelSlice<R>, QuantizeError> {
    assert!(radius >= 1.0);
    let dim = sigma.dim();
    if !n_grid.is_power_of_two() {
        return Err(QuantizeError::GridNotPowerOfTwo(n_grid));
    }
    let required = 2 * radius.floor() as usize + 1;
    if n_grid < required {
        return Err(QuantizeError::Aliasing { grid: n_grid, required });
    }
    let total = n_grid.pow(dim as u32);
    let mut spectrum = vec![Complex::<R>::zero(); total];
    let xv = x.to_vec();
    // The ball is small (|l| <= radius) and every point writes a distinct bin.
    enumerate_ball_sequential(dim, ball_threshold(radius), &mut |l| {
        spectrum[bin_of(l, n_grid)] = sigma.eval(&xv, l);
    });
    let dims = vec![n_grid; dim];
    fft_nd(&mut spectrum, &dims, true);
    Ok(KernelSlice { x: xv, grid: GridFunction { dim, n: n_grid, values: spectrum } })
}

fn enumerate_ball_sequential(dim: usize, r2max: i64, f: &mut impl FnMut(&[i64])) {
    let mut point = vec![0i64; dim];
    fn recurse(point: &mut Vec<i64>, axis: usize, budget: i64, f: &mut impl FnMut(&[i64])) {
        let reach = lattice::isqrt(budget);
        if axis + 1 == point.len() {
            for c in -reach..=reach {
                point[axis] = c;
                f(point);
            }
            point[axis] = 0;
            return;
        }
        for c in -reach..=reach {
            point[axis] = c;
            recurse(point, axis + 1, budget - c * c, f);
        }
        point[axis] = 0;
    }
    recurse(&mut point, 0, r2max, f);
}

/// A trace value together with a tail-bound estimate.
#[derive(Debug, Clone, Copy)]
pub struct TraceEstimate<R: Real> {
    pub value: Complex<R>,
    /// Estimated magnitude of the truncated tail (an estimate from the last
    /// computed shell, not a certificate).
    pub tail_estimate: R,
}

/// `tr Op(sigma) = sum_{|l| <= radius} integral sigma(x, l) dx` for declared
/// order `m < -n`, with the x-integral by the periodic trapezoid rule.
pub fn trace_direct<R: Real>(
    sigma: &LatticeSymbol<R>,
    m: f64,
    radius: f64,
    x_grid: usize,
) -> Result<TraceEstimate<R>, QuantizeError> {
    let dim = sigma.dim();
    if m >= -(dim as f64) {
        return Err(QuantizeError::NotTraceClass { order: m, dim });
    }
    assert!(radius >= 1.0);
    let outer_r2 = ((0.9 * radius) * (0.9 * radius)) as i64;
    let (sum, shell_max) = lattice::fold_shell(
        dim,
        0,
        ball_threshold(radius),
        (Complex::<R>::zero(), R::zero()),
        |(acc, worst), l, r2| {
            let v = sigma.x_average(l, x_grid);
            let worst = if r2 >= outer_r2 {
                let w = v.norm()
                    / real_powc(angle_bracket(R::of(r2 as f64)), Complex::new(R::of(m), R::zero()))
                        .norm();
                worst.max(w)
            } else {
                worst
            };
            (acc + v, worst)
        },
        |(a, wa), (b, wb)| (a + b, wa.max(wb)),
    );
    // Tail estimate: C * |S^{n-1}| * R^{m+n} / |m+n| from the declared decay.
    let surface = match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        d => {
            // 2 pi^{d/2} / Gamma(d/2), crude for d > 3
            let g = (1..d).map(|k| k as f64 / 2.0).product::<f64>();
            2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / g
        }
    };
    let expo = m + dim as f64;
    let tail = shell_max * R::of(surface * radius.powf(expo) / expo.abs());
    Ok(TraceEstimate { value: sum, tail_estimate: tail })
}
