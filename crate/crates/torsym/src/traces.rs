//! The non-commutative residue and the canonical trace as a discrete finite
//! part of lattice partial sums.

use crate::fit::{self, FitError};
use crate::lattice;
use crate::real::Real;
use crate::sphere::SphereQuadrature;
use crate::toroidal::ClassicalToroidalSymbol;
use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("order {0} is integer >= -n; the finite part requires a non-integer order (use the annulus limit)")]
    IntegerOrder(String),
    #[error("the annulus limit requires an integer order >= -n, got {0}")]
    OrderNotInteger(String),
    #[error("need at least {need} radii for {terms} fitted terms, got {got}")]
    RadiusGridTooSmall { need: usize, got: usize, terms: usize },
}

/// Whether a complex order lies in `Z_n = {-n, -n+1, ...}`.
pub fn order_in_integer_ladder<R: Real>(order: Complex<R>, dim: usize) -> bool {
    if order.im != R::zero() {
        return false;
    }
    let m = order.re;
    if m.fract() != R::zero() {
        return false;
    }
    m >= -R::of(dim as f64)
}

/// Residue density at `x`: the sphere integral of the degree `-n` profile.
/// Zero when the order is outside `Z_n` or the ladder has no degree `-n` term.
pub fn residue_density<R: Real>(
    sigma: &ClassicalToroidalSymbol<R>,
    x: &[R],
    quad: &SphereQuadrature<R>,
) -> Complex<R> {
    let n = sigma.dim();
    assert_eq!(quad.dim, n, "quadrature dimension mismatch");
    if !order_in_integer_ladder(sigma.order(), n) {
        return Complex::zero();
    }
    let target = Complex::new(-R::of(n as f64), R::zero());
    let Some(term) = sigma.term_of_degree(target) else {
        return Complex::zero();
    };
    let mut acc = Complex::zero();
    for (omega, w) in &quad.nodes {
        acc = acc + term.profile(x, omega) * *w;
    }
    acc
}

/// Total residue: the x-average of the residue density (Haar measure on the
/// torus is normalized, so the average *is* the integral).
pub fn residue<R: Real>(
    sigma: &ClassicalToroidalSymbol<R>,
    quad: &SphereQuadrature<R>,
    x_grid: usize,
) -> Complex<R> {
    let n = sigma.dim();
    if !order_in_integer_ladder(sigma.order(), n) {
        return Complex::zero();
    }
    let target = Complex::new(-R::of(n as f64), R::zero());
    let x_constant = match sigma.term_of_degree(target) {
        Some(t) => t.is_x_constant(),
        None => return Complex::zero(),
    };
    if x_constant {
        let x0 = vec![R::zero(); n];
        return residue_density(sigma, &x0, quad);
    }
    let grid = lattice::torus_grid::<R>(n, x_grid);
    let mut acc = Complex::zero();
    for x in &grid {
        acc = acc + residue_density(sigma, x, quad);
    }
    acc / R::of(grid.len() as f64)
}

/// Result of the discrete-finite-part extraction.
#[derive(Debug, Clone)]
pub struct FinitePartFit<R: Real> {
    /// The canonical trace (the fitted constant term).
    pub tr: Complex<R>,
    /// Fitted shell terms `(exponent m+n-j, coefficient)`.
    pub shell_coeffs: Vec<(Complex<R>, Complex<R>)>,
    /// Radii used (snapped to half-integers).
    pub radii: Vec<f64>,
    /// The partial sums `S(R)` on those radii.
    pub partial_sums: Vec<Complex<R>>,
    /// Max relative misfit of the model over the radius grid.
    pub residual: R,
}

/// Options for [`canonical_trace_finite_part`].
#[derive(Debug, Clone)]
pub struct FinitePartOptions {
    /// Ascending radii; snapped to half-integers so `|l| < R` never ties.
    pub radii: Vec<f64>,
    /// Trapezoid grid per axis for the x-average.
    pub x_grid: usize,
}

impl FinitePartOptions {
    /// Log-spaced half-integer radii from 60.5 up to ~680, 12 points.
    pub fn default_radii() -> Vec<f64> {
        let mut out = Vec::new();
        let (lo, hi, count) = (60.0f64, 680.0f64, 12usize);
        for k in 0..count {
            let r = lo * (hi / lo).powf(k as f64 / (count - 1) as f64);
            out.push(r.round() + 0.5);
        }
        out.dedup();
        out
    }
}

impl Default for FinitePartOptions {
    fn default() -> Self {
        FinitePartOptions { radii: Self::default_radii(), x_grid: 16 }
    }
}

fn snap_half_integer(r: f64) -> f64 {
    (r - 0.5).round() + 0.5
}

/// Exponent ladder `m + n - j` for the finite-part fit: all paper shell
/// exponents with real part above the lattice-noise floor (-2.5), so slowly
/// convergent tails are modelled instead of waiting out the sum.
fn shell_exponents<R: Real>(order: Complex<R>, dim: usize) -> Vec<Complex<R>> {
    let mut out = Vec::new();
    let mut j = 0u32;
    loop {
        let e = order + Complex::new(R::of(dim as f64) - R::of(j as f64), R::zero());
        if e.re <= R::of(-2.5) {
            break;
        }
        out.push(e);
        j += 1;
        if j > 32 {
            break;
        }
    }
    out
}

/// The canonical trace as the discrete finite part of
/// `S(R) = sum_{|l| < R} integral sigma(x, l) dx`:
/// least-squares fit of `S(R) = TR + sum_j b_j R^{m+n-j}` on the radius grid.
///
/// Requires a non-integer complex order (for integer orders in `Z_n` the
/// constant is polluted by the residue term; use [`annulus_limit`]); for
/// `Re m < -n` the sum converges and the fitted decaying tail terms
/// accelerate it.
pub fn canonical_trace_finite_part<R: Real>(
    sigma: &ClassicalToroidalSymbol<R>,
    opts: &FinitePartOptions,
) -> Result<FinitePartFit<R>, TraceError> {
    let n = sigma.dim();
    let order = sigma.order();
    if order_in_integer_ladder(order, n) {
        return Err(TraceError::IntegerOrder(format!("{order:?}")));
    }
    let mut radii: Vec<f64> = opts.radii.iter().map(|&r| snap_half_integer(r)).collect();
    radii.dedup();
    let exponents = shell_exponents(order, n);
    let need = 2 * (exponents.len() + 1);
    if radii.len() < need {
        return Err(TraceError::RadiusGridTooSmall {
            need,
            got: radii.len(),
            terms: exponents.len() + 1,
        });
    }

    let lat = sigma.as_lattice_symbol();
    let x_grid = opts.x_grid;
    let sums: Vec<Complex<R>> =
        lattice::partial_sums_on_radii(n, &radii, |l, _r2| lat.x_average(l, x_grid));

    let xs: Vec<R> = radii.iter().map(|&r| R::of(r)).collect();
    let design = fit::power_design(&xs, &exponents, true);
    let sol = fit::lstsq(&design, &sums)?;

    let tr = sol.coeffs[0];
    let shell_coeffs: Vec<(Complex<R>, Complex<R>)> =
        exponents.iter().copied().zip(sol.coeffs[1..].iter().copied()).collect();
    let scale = sums.iter().map(|s| s.norm()).fold(R::zero(), |a, b| a.max(b)).max(R::of(1e-300));
    Ok(FinitePartFit {
        tr,
        shell_coeffs,
        radii,
        partial_sums: sums,
        residual: sol.max_residual / scale,
    })
}

/// Result of the dyadic annulus-sum limit.
#[derive(Debug, Clone)]
pub struct AnnulusLimit<R: Real> {
    /// The limiting constant (`ln 2 * res` for order exactly `-n`).
    pub limit: Complex<R>,
    pub error_estimate: R,
    /// Per-radius table of `T(R) = sum_{R <= |l| <= 2R} integral sigma dx`.
    pub table: Vec<(f64, Complex<R>)>,
}

/// Dyadic annulus sums `T(R) = sum_{R <= |l| <= 2R} integral sigma(x,l) dx`,
/// with fitted growing shell terms removed. Orders in `Z_n` only; at order
/// `-n` there are no growing terms and the limit is read off at the largest
/// radius with a Cauchy error bar.
pub fn annulus_limit<R: Real>(
    sigma: &ClassicalToroidalSymbol<R>,
    r_max: u32,
    x_grid: usize,
) -> Result<AnnulusLimit<R>, TraceError> {
    let n = sigma.dim();
    let order = sigma.order();
    if !order_in_integer_ladder(order, n) {
        return Err(TraceError::OrderNotInteger(format!("{order:?}")));
    }
    let m = order.re.to_f64().expect("real order") as i64;
    let growing: Vec<Complex<R>> = (0..(m + n as i64))
        .map(|j| Complex::new(R::of((m + n as i64 - j) as f64), R::zero()))
        .collect();

    // Dyadic radii 16, 32, ..., r_max (annulus edges in exact integer arithmetic).
    let mut radii = Vec::new();
    let mut r = 16u32;
    while r <= r_max {
        radii.push(r);
        r *= 2;
    }
    if radii.len() < (2 * (growing.len() + 1)).max(2) {
        return Err(TraceError::RadiusGridTooSmall {
            need: (2 * (growing.len() + 1)).max(2),
            got: radii.len(),
            terms: growing.len() + 1,
        });
    }

    let lat = sigma.as_lattice_symbol();
    let table: Vec<(f64, Complex<R>)> = radii
        .iter()
        .map(|&rr| {
            let r2min = (rr as i64) * (rr as i64);
            let r2max = 4 * r2min;
            let t = lattice::sum_annulus(n, r2min, r2max, |l, _| lat.x_average(l, x_grid));
            (rr as f64, t)
        })
        .collect();

    if growing.is_empty() {
        let last = table[table.len() - 1].1;
        let prev = table[table.len() - 2].1;
        return Ok(AnnulusLimit {
            limit: last,
            error_estimate: (last - prev).norm(),
            table,
        });
    }

    let xs: Vec<R> = table.iter().map(|(r, _)| R::of(*r)).collect();
    let ys: Vec<Complex<R>> = table.iter().map(|(_, t)| *t).collect();
    let design = fit::power_design(&xs, &growing, true);
    let sol = fit::lstsq(&design, &ys)?;
    let limit = sol.coeffs[0];
    // Cauchy bar on the de-trended tail.
    let detrend = |idx: usize| {
        let mut v = ys[idx];
        for (k, &e) in growing.iter().enumerate() {
            v = v - sol.coeffs[k + 1] * crate::real::real_powc(xs[idx], e);
        }
        v
    };
    let a = detrend(table.len() - 1);
    let b = detrend(table.len() - 2);
    Ok(AnnulusLimit { limit, error_estimate: (a - b).norm(), table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::lattice_norm_sq;
    use crate::toroidal::{HomogeneousTerm, LatticeSymbol};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn classical_radial(
        dim: usize,
        order: f64,
        profile: impl Fn(&[f64]) -> Complex<f64> + Send + Sync + 'static,
    ) -> ClassicalToroidalSymbol<f64> {
        ClassicalToroidalSymbol::new(
            dim,
            c(order, 0.0),
            vec![HomogeneousTerm::radial(c(order, 0.0), profile)],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn residue_closed_forms_n2() {
        let quad = SphereQuadrature::<f64>::circle(256);
        let unit = classical_radial(2, -2.0, |_| c(1.0, 0.0));
        let d = residue_density(&unit, &[0.0, 0.0], &quad);
        assert!((d.re - 2.0 * PI).abs() < 1e-10);

        let odd = classical_radial(2, -2.0, |w| c(w[0], 0.0));
        assert!(residue_density(&odd, &[0.0, 0.0], &quad).norm() < 1e-12);

        let sq = classical_radial(2, -2.0, |w| c(w[0] * w[0], 0.0));
        let d = residue_density(&sq, &[0.0, 0.0], &quad);
        assert!((d.re - PI).abs() < 1e-8);
        // quadrature refinement agrees
        let quad2 = SphereQuadrature::<f64>::circle(512);
        let d2 = residue_density(&sq, &[0.0, 0.0], &quad2);
        assert!((d.re - d2.re).abs() < 1e-12);
    }

    #[test]
    fn residue_zero_off_ladder() {
        // order -2.5 is not in Z_n: residue vanishes identically
        let s = classical_radial(2, -2.5, |_| c(1.0, 0.0));
        let quad = SphereQuadrature::<f64>::circle(64);
        assert_eq!(residue_density(&s, &[0.0, 0.0], &quad), c(0.0, 0.0));
        assert_eq!(residue(&s, &quad, 4), c(0.0, 0.0));
        // order -3 (below -n, integer): no degree -n term in a ladder starting at -3
        let low = classical_radial(2, -3.0, |_| c(1.0, 0.0));
        assert_eq!(residue(&low, &quad, 4), c(0.0, 0.0));
    }

    #[test]
    fn residue_x_average() {
        // profile (1 + sin(2 pi x1)): the x-average removes the sine
        let term = HomogeneousTerm::new(c(-2.0, 0.0), |x: &[f64], _w: &[f64]| {
            c(1.0 + (2.0 * PI * x[0]).sin(), 0.0)
        });
        let s = ClassicalToroidalSymbol::new(2, c(-2.0, 0.0), vec![term], None, None).unwrap();
        let quad = SphereQuadrature::<f64>::circle(128);
        let r = residue(&s, &quad, 32);
        assert!((r.re - 2.0 * PI).abs() < 1e-9, "{}", r.re);
    }

    #[test]
    fn residue_sphere_n3() {
        let quad = SphereQuadrature::<f64>::sphere(24, 48);
        let s = classical_radial(3, -3.0, |w| c(w[1] * w[1], 0.0));
        let r = residue(&s, &quad, 2);
        assert!((r.re - 4.0 * PI / 3.0).abs() < 1e-6, "{}", r.re);
    }

    #[test]
    fn residue_linearity_and_translation_invariance() {
        let quad = SphereQuadrature::<f64>::circle(128);
        let a = classical_radial(2, -2.0, |w| c(w[0] * w[0], 0.0));
        let b = classical_radial(2, -2.0, |_| c(1.0, 0.0));
        let combo = classical_radial(2, -2.0, |w| c(2.0 * w[0] * w[0] + 3.0, 0.0));
        let ra = residue(&a, &quad, 4);
        let rb = residue(&b, &quad, 4);
        let rc = residue(&combo, &quad, 4);
        assert!((rc - (ra * 2.0 + rb * 3.0)).norm() < 1e-9);

        // translation in x leaves the x-integrated residue unchanged
        let term = HomogeneousTerm::new(c(-2.0, 0.0), |x: &[f64], w: &[f64]| {
            c((1.0 + 0.5 * (2.0 * PI * x[1]).cos()) * w[0] * w[0], 0.0)
        });
        let s = ClassicalToroidalSymbol::new(2, c(-2.0, 0.0), vec![term], None, None).unwrap();
        let r0 = residue(&s, &quad, 32);
        let term_t = HomogeneousTerm::new(c(-2.0, 0.0), |x: &[f64], w: &[f64]| {
            let xt = x[1] - 0.37;
            c((1.0 + 0.5 * (2.0 * PI * xt).cos()) * w[0] * w[0], 0.0)
        });
        let st = ClassicalToroidalSymbol::new(2, c(-2.0, 0.0), vec![term_t], None, None).unwrap();
        let r1 = residue(&st, &quad, 32);
        assert!((r0 - r1).norm() < 1e-9);
    }

    #[test]
    fn finite_part_convergent_case_matches_plain_sum() {
        // sigma = <l>^-4 in n = 2: TR equals the convergent sum
        let rem = LatticeSymbol::<f64>::multiplier(2, |l| {
            c(1.0 / (1.0 + lattice_norm_sq(l) as f64).powi(2), 0.0)
        });
        let s = ClassicalToroidalSymbol::new(2, c(-4.0, 0.0), vec![], Some(rem), None).unwrap();
        let fit = canonical_trace_finite_part(&s, &FinitePartOptions::default()).unwrap();
        let brute: Complex<f64> = lattice::sum_ball(2, lattice::ball_threshold(2500.0), |_l, r2| {
            c(1.0 / (1.0 + r2 as f64).powi(2), 0.0)
        });
        // brute tail at R=2500 is ~ pi R^-2 ~ 5e-7
        assert!((fit.tr - brute).norm() < 1e-6, "{} vs {}", fit.tr, brute);
    }

    #[test]
    fn finite_part_of_smoothing_symbol_is_plain_sum() {
        let rem = LatticeSymbol::<f64>::multiplier(2, |l| {
            if lattice_norm_sq(l) == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) }
        });
        let s = ClassicalToroidalSymbol::new(2, c(-7.5, 0.0), vec![], Some(rem), None).unwrap();
        let fit = canonical_trace_finite_part(&s, &FinitePartOptions::default()).unwrap();
        assert!((fit.tr.re - 1.0).abs() < 1e-9);
        for (_, b) in &fit.shell_coeffs {
            assert!(b.norm() < 1e-9);
        }
    }

    #[test]
    fn finite_part_rejects_integer_order() {
        let s = classical_radial(2, -2.0, |_| c(1.0, 0.0));
        assert!(matches!(
            canonical_trace_finite_part(&s, &FinitePartOptions::default()),
            Err(TraceError::IntegerOrder(_))
        ));
    }

    #[test]
    fn annulus_limit_log2_law() {
        // sigma(l) = |l|^-2 (order -n): T(R) -> ln 2 * 2 pi
        let s = classical_radial(2, -2.0, |_| c(1.0, 0.0));
        let out = annulus_limit(&s, 256, 1).unwrap();
        let target = 2.0 * PI * 2.0f64.ln();
        assert!(
            (out.limit.re - target).abs() < 0.02 * target,
            "{} vs {}",
            out.limit.re,
            target
        );
        // finitely supported symbols vanish beyond the support
        let rem = LatticeSymbol::<f64>::multiplier(2, |l| {
            if lattice_norm_sq(l) <= 2 { c(3.0, 0.0) } else { c(0.0, 0.0) }
        });
        let fin =
            ClassicalToroidalSymbol::new(2, c(-2.0, 0.0), vec![], Some(rem), None).unwrap();
        let out = annulus_limit(&fin, 64, 1).unwrap();
        assert_eq!(out.limit, c(0.0, 0.0));
    }

    #[test]
    fn annulus_limit_with_growing_terms() {
        // order -1 in n = 2: one growing term R^{1}, constant = ln2 * res.
        // sigma(l) = |l|^{-1}: res = integral over S^1 of 1 * (coefficient of
        // the -2 term) = 0 here (no degree -2 term), so the constant is the
        // j = m+n term of the two-term ladder... use sigma with both terms:
        // sigma = |l|^{-1} + l1^2 |l|^{-4}; res = pi from the second term.
        let t0 = HomogeneousTerm::radial(c(-1.0, 0.0), |_| c(1.0, 0.0));
        let t1 = HomogeneousTerm::radial(c(-2.0, 0.0), |w| c(w[0] * w[0], 0.0));
        let s = ClassicalToroidalSymbol::new(2, c(-1.0, 0.0), vec![t0, t1], None, None).unwrap();
        let out = annulus_limit(&s, 1024, 1).unwrap();
        let target = PI * 2.0f64.ln();
        // The de-trended constant carries slowly decaying lattice-count
        // fluctuations when growing terms are present; 15% at R <= 1024.
        assert!(
            (out.limit.re - target).abs() < 0.15 * target,
            "{} vs {target}",
            out.limit.re
        );
    }
}
