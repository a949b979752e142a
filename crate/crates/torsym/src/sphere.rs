//! Surface quadrature on the unit circle and the unit 2-sphere.

use crate::real::Real;

/// Nodes and weights integrating over `S^{n-1}` with its surface measure
/// (total weight `2 pi` for `n = 2`, `4 pi` for `n = 3`).
#[derive(Debug, Clone)]
pub struct SphereQuadrature<R: Real> {
    pub dim: usize,
    pub nodes: Vec<(Vec<R>, R)>,
    /// Spherical-harmonic degree up to which the rule is exact.
    pub exact_degree: usize,
}

impl<R: Real> SphereQuadrature<R> {
    /// Periodic trapezoid rule on the circle, exact for harmonics of degree
    /// `< n_nodes`.
    pub fn circle(n_nodes: usize) -> Self {
        assert!(n_nodes >= 4);
        let w = R::TAU() / R::of(n_nodes as f64);
        let nodes = (0..n_nodes)
            .map(|i| {
                let th = R::TAU() * R::of(i as f64) / R::of(n_nodes as f64);
                (vec![th.cos(), th.sin()], w)
            })
            .collect();
        SphereQuadrature { dim: 2, nodes, exact_degree: n_nodes - 1 }
    }

    /// Gauss–Legendre in the polar cosine times trapezoid in azimuth.
    pub fn sphere(n_polar: usize, n_azimuth: usize) -> Self {
        assert!(n_polar >= 2 && n_azimuth >= 4);
        let gl = gauss_legendre::<R>(n_polar);
        let wphi = R::TAU() / R::of(n_azimuth as f64);
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        for &(c, wc) in &gl {
            let s = (R::one() - c * c).max(R::zero()).sqrt();
            for i in 0..n_azimuth {
                let phi = R::TAU() * R::of(i as f64) / R::of(n_azimuth as f64);
                nodes.push((vec![s * phi.cos(), s * phi.sin(), c], wc * wphi));
            }
        }
        let exact = (2 * n_polar - 1).min(n_azimuth - 1);
        SphereQuadrature { dim: 3, nodes, exact_degree: exact }
    }

    /// Default rule for the given ambient dimension (2 or 3).
    pub fn standard(dim: usize) -> Self {
        match dim {
            2 => Self::circle(256),
            3 => Self::sphere(24, 48),
            _ => panic!("sphere quadrature only provided for n = 2 and n = 3"),
        }
    }

    pub fn total_weight(&self) -> R {
        self.nodes.iter().map(|(_, w)| *w).fold(R::zero(), |a, b| a + b)
    }

    /// Integrate a function of the direction vector.
    pub fn integrate<F, T>(&self, f: F) -> T
    where
        F: Fn(&[R]) -> T,
        T: std::ops::Add<Output = T> + std::ops::Mul<R, Output = T> + num_traits::Zero,
    {
        let mut acc = T::zero();
        for (w_vec, w) in &self.nodes {
            acc = acc + f(w_vec) * *w;
        }
        acc
    }
}

/// Gauss–Legendre nodes/weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre<R: Real>(n: usize) -> Vec<(R, R)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess.
        let mut x = R::of(
            (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos(),
        );
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x = x - dx;
            if dx.abs() < R::epsilon() * R::of(4.0) {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = R::of(2.0) / ((R::one() - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    out
}

fn legendre_with_derivative<R: Real>(n: usize, x: R) -> (R, R) {
    let mut p0 = R::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = R::of(k as f64);
        let p2 = ((R::of(2.0) * kf - R::one()) * x * p1 - (kf - R::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = R::of(n as f64) * (x * p1 - p0) / (x * x - R::one());
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_total_weight_and_moments() {
        let q = SphereQuadrature::<f64>::circle(64);
        assert!((q.total_weight() - 2.0 * PI).abs() < 1e-12);
        // integral of omega_1^2 over the circle is pi
        let m: f64 = q.nodes.iter().map(|(w, wt)| w[0] * w[0] * wt).sum();
        assert!((m - PI).abs() < 1e-12);
        // odd moment vanishes
        let o: f64 = q.nodes.iter().map(|(w, wt)| w[0] * wt).sum();
        assert!(o.abs() < 1e-12);
    }

    #[test]
    fn sphere_total_weight_and_moments() {
        let q = SphereQuadrature::<f64>::sphere(16, 32);
        assert!((q.total_weight() - 4.0 * PI).abs() < 1e-10);
        // integral of omega_k^2 = |S^2|/3 for each k
        for k in 0..3 {
            let m: f64 = q.nodes.iter().map(|(w, wt)| w[k] * w[k] * wt).sum();
            assert!((m - 4.0 * PI / 3.0).abs() < 1e-10, "axis {k}: {m}");
        }
        // degree-4 harmonic content: integral of omega_3^4 = 4 pi / 5
        let m4: f64 = q.nodes.iter().map(|(w, wt)| w[2].powi(4) * wt).sum();
        assert!((m4 - 4.0 * PI / 5.0).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre::<f64>(8);
        // exact through degree 15: check x^14 -> 2/15
        let v: f64 = gl.iter().map(|&(x, w)| x.powi(14) * w).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-13);
        let total: f64 = gl.iter().map(|&(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
