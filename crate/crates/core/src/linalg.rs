//! Small dense helpers for the factor model: row-major square matrices and a
//! Cholesky solver with a ridge fallback.

use crate::scalar::Scalar;

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `m += scale · a bᵀ` for an `n × n` row-major `m`.
#[inline]
pub(crate) fn add_outer<T: Scalar>(m: &mut [T], a: &[T], b: &[T], scale: T) {
    let n = a.len();
    for (r, &ar) in a.iter().enumerate() {
        let s = scale * ar;
        let row = &mut m[r * n..(r + 1) * n];
        for (cell, &bc) in row.iter_mut().zip(b) {
            *cell += s * bc;
        }
    }
}

/// `out += scale · v`
#[inline]
pub(crate) fn axpy<T: Scalar>(out: &mut [T], v: &[T], scale: T) {
    for (o, &x) in out.iter_mut().zip(v) {
        *o += scale * x;
    }
}

/// `y = m x`
pub(crate) fn mat_vec<T: Scalar>(m: &[T], x: &[T]) -> Vec<T> {
    let n = x.len();
    (0..n).map(|r| dot(&m[r * n..(r + 1) * n], x)).collect()
}

fn cholesky_in_place<T: Scalar>(a: &mut [T], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= T::zero() || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `(a + ridge·I) x = b` for symmetric `a`.
///
/// If the factorization breaks down the ridge is grown tenfold (starting
/// from a scale-relative floor) until it succeeds, so a symmetric input never
/// makes this fail. Returns the ridge actually used alongside the solution.
pub(crate) fn solve_spd<T: Scalar>(a: &[T], b: &[T], ridge: T) -> (Vec<T>, T) {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let scale = (0..n)
        .map(|i| a[i * n + i].abs())
        .fold(T::zero(), T::max)
        .max(T::one());
    let mut ridge = ridge;
    let mut floor = scale * T::epsilon() * T::of(16.0);
    for _ in 0..64 {
        let mut l = a.to_vec();
        for i in 0..n {
            l[i * n + i] += ridge;
        }
        if cholesky_in_place(&mut l, n) {
            // forward then backward substitution
            let mut y = b.to_vec();
            for i in 0..n {
                let mut s = y[i];
                for k in 0..i {
                    s -= l[i * n + k] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[k * n + i] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            return (y, ridge);
        }
        ridge = ridge.max(floor);
        floor *= T::of(10.0);
        ridge *= T::of(10.0);
    }
    (vec![T::zero(); n], ridge)
}
