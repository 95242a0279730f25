//! Small dense vector helpers over [`Scalar`] slices.

use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn dist_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// `y += a * x`
#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale_in_place<T: Scalar>(a: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= a;
    }
}

pub fn all_finite<T: Scalar>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Column mean of a set of equal-length vectors, summed in index order.
pub fn mean_of<T: Scalar>(cols: &[Vec<T>]) -> Vec<T> {
    let d = cols.first().map_or(0, Vec::len);
    let mut out = vec![T::zero(); d];
    for c in cols {
        for (o, &v) in out.iter_mut().zip(c) {
            *o += v;
        }
    }
    let inv = T::one() / T::from_usize(cols.len().max(1)).unwrap();
    scale_in_place(inv, &mut out);
    out
}

/// `out[i] = sum_j w[i][j] * cols[j]` for a row-major `n x n` weight matrix.
/// Zero weights are skipped; the sum runs over `j` in increasing order.
pub fn mix_columns<T: Scalar>(w: &[T], cols: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = cols.len();
    let d = cols.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            let mut acc = vec![T::zero(); d];
            for (j, col) in cols.iter().enumerate() {
                let wij = w[i * n + j];
                if wij != T::zero() {
                    axpy(wij, col, &mut acc);
                }
            }
            acc
        })
        .collect()
}
