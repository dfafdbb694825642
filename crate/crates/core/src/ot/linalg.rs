//! Dense symmetric positive definite solves for the Newton refinement.

use crate::scalar::Scalar;

/// In-place lower Cholesky factor of `A + jitter * max(diag) * I` for a
/// symmetric positive semi-definite `A` (row-major, `n x n`). Returns `false`
/// if a pivot is not positive.
pub(crate) fn cholesky_factor<T: Scalar>(a: &mut [T], n: usize, jitter: T) -> bool {
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(T::zero(), T::max);
    let shift = jitter * max_diag.max(T::min_positive_value());
    for i in 0..n {
        a[i * n + i] = a[i * n + i] + shift;
    }
    // Lower factor stored in the lower triangle.
    for j in 0..n {
        let row_j = &a[j * n..j * n + j];
        let d = a[j * n + j] - row_j.iter().map(|&l| l * l).sum::<T>();
        if !(d > T::zero()) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        let (head, tail) = a.split_at_mut((j + 1) * n);
        let row_j = &head[j * n..j * n + j];
        for row_i in tail.chunks_exact_mut(n) {
            let s: T = row_i[..j].iter().zip(row_j).map(|(&x, &y)| x * y).sum();
            row_i[j] = (row_i[j] - s) / d;
        }
    }
    true
}

/// Solves with a factor from [`cholesky_factor`], overwriting `b`.
pub(crate) fn cholesky_apply<T: Scalar>(l: &[T], b: &mut [T], n: usize) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: T = row.iter().zip(&b[..i]).map(|(&x, &y)| x * y).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // A = [[4, 2, 0], [2, 5, 1], [0, 1, 3]], x = [1, -1, 2]
        let mut a = vec![4.0f64, 2.0, 0.0, 2.0, 5.0, 1.0, 0.0, 1.0, 3.0];
        let mut b = vec![2.0, -1.0, 5.0];
        assert!(cholesky_factor(&mut a, 3, 0.0));
        cholesky_apply(&a, &mut b, 3);
        for (x, e) in b.iter().zip([1.0, -1.0, 2.0]) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_fails() {
        let mut a = vec![1.0f64, 2.0, 2.0, 1.0];
        assert!(!cholesky_factor(&mut a, 2, 0.0));
    }
}
