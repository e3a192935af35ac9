//! Small dense helpers on flat slices. Matrices are row-major `n x n`.

use crate::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

/// `m * v` for a row-major square matrix.
pub fn mat_vec<T: Scalar>(m: &[T], v: &[T]) -> Vec<T> {
    let n = v.len();
    debug_assert_eq!(m.len(), n * n);
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// `u^T m v`.
pub fn quad_form<T: Scalar>(m: &[T], u: &[T], v: &[T]) -> T {
    dot(u, &mat_vec(m, v))
}

pub fn frobenius<T: Scalar>(m: &[T]) -> T {
    norm(m)
}

pub fn max_asymmetry<T: Scalar>(m: &[T], n: usize) -> T {
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[i * n + j] - m[j * n + i]).abs());
        }
    }
    worst
}
