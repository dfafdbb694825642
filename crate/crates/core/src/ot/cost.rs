use crate::error::{Error, Result};
use crate::halton::HaltonGrid;
use crate::matrix::{squared_distance, Matrix};
use crate::scalar::Scalar;

/// Square matrix of transport costs; entry `(i, j)` is the cost of moving
/// source `i` onto target `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix<T> {
    entries: Matrix<T>,
}

impl<T: Scalar> CostMatrix<T> {
    /// Wraps an arbitrary square cost matrix. Finiteness is checked by the
    /// solvers, not here.
    pub fn from_matrix(entries: Matrix<T>) -> Result<Self> {
        if entries.rows() != entries.cols() {
            return Err(Error::CountMismatch {
                expected: entries.rows(),
                found: entries.cols(),
                context: "cost matrix must be square".into(),
            });
        }
        if entries.rows() == 0 {
            return Err(Error::Empty("cost matrix".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn max_entry(&self) -> T {
        self.entries.max_entry().unwrap_or_else(T::zero)
    }

    /// Copy with every entry divided by the largest one (unchanged when the
    /// largest entry is not positive).
    pub fn normalized(&self) -> Self {
        let max = self.max_entry();
        if max > T::zero() && max.is_finite() {
            Self { entries: self.entries.map(|c| c / max) }
        } else {
            self.clone()
        }
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let n = self.size();
        match self.entries.as_slice().iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFinite { row: k / n, col: k % n }),
            None => Ok(()),
        }
    }
}

/// Squared Euclidean costs between `sources` (one point per row) and the grid.
pub fn cost_matrix<T: Scalar>(sources: &Matrix<T>, targets: &HaltonGrid<T>) -> Result<CostMatrix<T>> {
    if sources.cols() != targets.dim() {
        return Err(Error::DimensionMismatch {
            expected: targets.dim(),
            found: sources.cols(),
            context: "cost matrix sources".into(),
        });
    }
    if sources.rows() != targets.count() {
        return Err(Error::CountMismatch {
            expected: targets.count(),
            found: sources.rows(),
            context: "cost matrix sources vs targets".into(),
        });
    }
    let grid = targets.points();
    let entries = Matrix::from_fn(sources.rows(), grid.rows(), |i, j| squared_distance(sources.row(i), grid.row(j)));
    CostMatrix::from_matrix(entries)
}
