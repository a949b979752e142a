//! Deterministic lattice enumeration and reductions on `Z^n`.
//!
//! All reductions are partitioned into stripes of constant first coordinate.
//! Stripes are processed in parallel but merged in a fixed order, so results
//! are bit-stable regardless of the worker count.

use crate::real::Real;
use num_complex::Complex;
use rayon::prelude::*;

/// Largest integer `s` with `s*s <= v`.
pub fn isqrt(v: i64) -> i64 {
    if v < 0 {
        return -1;
    }
    let mut s = (v as f64).sqrt() as i64;
    while s * s > v {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= v {
        s += 1;
    }
    s
}

/// Integer threshold for the strict ball `|l| < radius`: points satisfy
/// `|l|^2 <= strict_ball_threshold(radius)`. Half-integer radii never tie.
pub fn strict_ball_threshold(radius: f64) -> i64 {
    let r2 = radius * radius;
    let c = r2.ceil();
    if c == r2 { (c as i64) - 1 } else { (r2.floor()) as i64 }
}

/// Integer threshold for the inclusive ball `|l| <= radius`.
pub fn ball_threshold(radius: f64) -> i64 {
    (radius * radius).floor() as i64
}

/// Fold `f` over all lattice points with `r2min <= |l|^2 <= r2max`, merging
/// per-stripe accumulators in stripe order.
pub fn fold_shell<A, F, M>(dim: usize, r2min: i64, r2max: i64, init: A, fold: F, merge: M) -> A
where
    A: Clone + Send,
    F: Fn(A, &[i64], i64) -> A + Sync,
    M: Fn(A, A) -> A,
{
    assert!(dim >= 1);
    if r2max < 0 || r2max < r2min {
        return init;
    }
    let l1_max = isqrt(r2max);
    let stripes: Vec<A> = (-l1_max..=l1_max)
        .into_par_iter()
        .map(|c0| {
            let mut point = vec![0i64; dim];
            point[0] = c0;
            let mut acc = init.clone();
            let rem = r2max - c0 * c0;
            if dim == 1 {
                let r2 = c0 * c0;
                if r2 >= r2min {
                    acc = fold(acc, &point, r2);
                }
            } else {
                acc = stripe_recurse(&fold, acc, &mut point, 1, rem, r2min, r2max);
            }
            acc
        })
        .collect();
    let mut acc = init;
    for s in stripes {
        acc = merge(acc, s);
    }
    acc
}

fn stripe_recurse<A, F>(
    fold: &F,
    mut acc: A,
    point: &mut [i64],
    axis: usize,
    budget: i64,
    r2min: i64,
    r2max: i64,
) -> A
where
    F: Fn(A, &[i64], i64) -> A,
{
    let dim = point.len();
    let reach = isqrt(budget);
    if axis == dim - 1 {
        for c in -reach..=reach {
            point[axis] = c;
            let r2 = r2max - budget + c * c;
            if r2 >= r2min {
                acc = fold(acc, point, r2);
            }
        }
        point[axis] = 0;
        return acc;
    }
    for c in -reach..=reach {
        point[axis] = c;
        acc = stripe_recurse(fold, acc, point, axis + 1, budget - c * c, r2min, r2max);
    }
    point[axis] = 0;
    acc
}

/// Deterministic parallel sum of `f` over `|l|^2 <= r2max`.
pub fn sum_ball<R, F>(dim: usize, r2max: i64, f: F) -> Complex<R>
where
    R: Real,
    F: Fn(&[i64], i64) -> Complex<R> + Sync,
{
    fold_shell(
        dim,
        0,
        r2max,
        Complex::new(R::zero(), R::zero()),
        |acc, l, r2| acc + f(l, r2),
        |a, b| a + b,
    )
}

/// Deterministic parallel sum over the annulus `r2min <= |l|^2 <= r2max`.
pub fn sum_annulus<R, F>(dim: usize, r2min: i64, r2max: i64, f: F) -> Complex<R>
where
    R: Real,
    F: Fn(&[i64], i64) -> Complex<R> + Sync,
{
    fold_shell(
        dim,
        r2min,
        r2max,
        Complex::new(R::zero(), R::zero()),
        |acc, l, r2| acc + f(l, r2),
        |a, b| a + b,
    )
}

/// Partial sums `S(R_k) = sum_{|l| < R_k} f(l)` for an ascending radius grid,
/// in one enumeration pass.
pub fn partial_sums_on_radii<R, F>(dim: usize, radii: &[f64], f: F) -> Vec<Complex<R>>
where
    R: Real,
    F: Fn(&[i64], i64) -> Complex<R> + Sync,
{
    let thresholds: Vec<i64> = radii.iter().map(|&r| strict_ball_threshold(r)).collect();
    for w in thresholds.windows(2) {
        assert!(w[0] <= w[1], "radius grid must be ascending");
    }
    let buckets = thresholds.len();
    let top = *thresholds.last().expect("non-empty radius grid");
    let zero = Complex::new(R::zero(), R::zero());
    let binned = fold_shell(
        dim,
        0,
        top,
        vec![zero; buckets],
        |mut acc, l, r2| {
            // First bucket whose threshold admits the point.
            let k = thresholds.partition_point(|&t| t < r2);
            acc[k] = acc[k] + f(l, r2);
            acc
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
            a
        },
    );
    let mut out = Vec::with_capacity(buckets);
    let mut run = zero;
    for v in binned {
        run = run + v;
        out.push(run);
    }
    out
}

/// Uniform periodic grid on `[0,1)^n` with `n_per_axis` points per axis.
pub fn torus_grid<R: Real>(dim: usize, n_per_axis: usize) -> Vec<Vec<R>> {
    let mut out = Vec::with_capacity(n_per_axis.pow(dim as u32));
    let mut idx = vec![0usize; dim];
    let step = R::one() / R::of(n_per_axis as f64);
    loop {
        out.push(idx.iter().map(|&i| R::of(i as f64) * step).collect());
        let mut axis = dim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < n_per_axis {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Deterministic low-discrepancy points in `[0,1)^n` (Kronecker sequence on
/// square-root irrationals).
pub fn kronecker_points<R: Real>(dim: usize, count: usize) -> Vec<Vec<R>> {
    const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    let alphas: Vec<f64> = (0..dim)
        .map(|j| PRIMES[j % PRIMES.len()].sqrt().fract())
        .collect();
    (1..=count)
        .map(|i| {
            alphas
                .iter()
                .map(|&a| R::of((i as f64 * a).fract()))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_point_counts() {
        // Gauss circle: |l|^2 <= 25 in Z^2 has 81 points.
        let count = fold_shell(2, 0, 25, 0u64, |a, _, _| a + 1, |a, b| a + b);
        assert_eq!(count, 81);
        // dim 1: |l| <= 3 -> 7 points.
        let count1 = fold_shell(1, 0, 9, 0u64, |a, _, _| a + 1, |a, b| a + b);
        assert_eq!(count1, 7);
    }

    #[test]
    fn half_integer_radii_never_tie() {
        assert_eq!(strict_ball_threshold(2.5), 6);
        assert_eq!(strict_ball_threshold(3.0), 8);
        assert_eq!(ball_threshold(3.0), 9);
    }

    #[test]
    fn partial_sums_match_direct() {
        let radii = [1.5, 2.5, 4.5];
        let sums: Vec<Complex<f64>> =
            partial_sums_on_radii(2, &radii, |_l, r2| Complex::new(r2 as f64, 0.0));
        for (k, &r) in radii.iter().enumerate() {
            let direct: Complex<f64> =
                sum_ball(2, strict_ball_threshold(r), |_l, r2| Complex::new(r2 as f64, 0.0));
            assert_eq!(sums[k], direct);
        }
    }

    #[test]
    fn deterministic_across_repeats() {
        let f = |l: &[i64], r2: i64| {
            Complex::new(1.0 / (1.0 + r2 as f64), (l[0] - l[1]) as f64 * 1e-3)
        };
        let a: Complex<f64> = sum_ball(2, 500, f);
        let b: Complex<f64> = sum_ball(2, 500, f);
        assert_eq!(a, b);
    }

    #[test]
    fn annulus_excludes_inner_ball() {
        let total: Complex<f64> = sum_ball(2, 100, |_, _| Complex::new(1.0, 0.0));
        let inner: Complex<f64> = sum_ball(2, 24, |_, _| Complex::new(1.0, 0.0));
        let ring: Complex<f64> = sum_annulus(2, 25, 100, |_, _| Complex::new(1.0, 0.0));
        assert_eq!(ring.re, total.re - inner.re);
    }

    #[test]
    fn grids_have_expected_sizes() {
        assert_eq!(torus_grid::<f64>(2, 4).len(), 16);
        assert_eq!(kronecker_points::<f64>(3, 10).len(), 10);
        for p in kronecker_points::<f64>(3, 50) {
            assert!(p.iter().all(|&x| (0.0..1.0).contains(&x)));
        }
    }
}
