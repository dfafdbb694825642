//! Halton low-discrepancy point sets on the open unit cube.
//!
//! Coordinate `k` of point `i` is the radical inverse of `i` in the `k`-th
//! prime base. Indices start at 1 so the origin is never emitted, which keeps
//! every coordinate strictly inside `(0, 1)`. No scrambling or leaping is
//! applied; plain Halton points show visible correlation between coordinates
//! built from large neighbouring primes, so dimensions far beyond a handful
//! give a poorer target measure.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Largest supported dimension (one prime base per coordinate).
pub const MAX_DIM: usize = 100;

/// A fixed set of Halton points, one point per row.
#[derive(Clone, Debug, PartialEq)]
pub struct HaltonGrid<T> {
    points: Matrix<T>,
    bases: Vec<u64>,
}

impl<T: Scalar> HaltonGrid<T> {
    /// First `count` Halton points in `dim` dimensions (indices `1..=count`).
    pub fn generate(count: usize, dim: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("halton count must be at least 1".into()));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("halton dimension must be in 1..={MAX_DIM}, got {dim}")));
        }
        let bases = first_primes(dim);
        let points = Matrix::from_fn(count, dim, |i, k| {
            let (num, den) = radical_inverse_parts(i as u64 + 1, bases[k]);
            T::of(num as f64 / den as f64)
        });
        Ok(Self { points, bases })
    }

    /// Wraps an explicit target point set, e.g. a hand-chosen grid in tests.
    /// The points must lie in the unit cube; `bases` is left empty.
    pub fn from_points(points: Matrix<T>) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::Empty("target grid".into()));
        }
        if points.as_slice().iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::InvalidArgument("target points must lie in [0, 1]^d".into()));
        }
        Ok(Self { points, bases: Vec::new() })
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.points.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        self.points.row(i)
    }

    /// Prime bases per coordinate; empty for grids built with [`Self::from_points`].
    pub fn bases(&self) -> &[u64] {
        &self.bases
    }

    pub fn centroid(&self) -> Vec<T> {
        let n = T::of_usize(self.count());
        self.points.col_sums().into_iter().map(|s| s / n).collect()
    }

    /// Per-coordinate `(min, max)` over the grid.
    pub fn bounds(&self) -> Vec<(T, T)> {
        (0..self.dim())
            .map(|k| {
                self.points.iter_rows().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
                    (lo.min(p[k]), hi.max(p[k]))
                })
            })
            .collect()
    }
}

/// Radical inverse of `index` in `base` as an exact fraction.
pub fn radical_inverse(index: u64, base: u64) -> Ratio<u64> {
    let (num, den) = radical_inverse_parts(index, base);
    Ratio::new(num, den)
}

/// Unreduced `(numerator, denominator)` of the radical inverse; the
/// denominator is `base^digits`.
fn radical_inverse_parts(mut index: u64, base: u64) -> (u64, u64) {
    let mut num = 0u64;
    let mut den = 1u64;
    while index > 0 {
        num = num * base + index % base;
        den *= base;
        index /= base;
    }
    (num, den)
}

/// The first `n` primes in increasing order.
pub fn first_primes(n: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| !candidate.is_multiple_of(p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}
