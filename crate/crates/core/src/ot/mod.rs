//! Discrete optimal transport between a pooled sample and a target grid, with
//! uniform weights `1/N` on both sides.
//!
//! Two solvers are provided:
//!
//! | Solver | Plan | Cost |
//! |--------|------|------|
//! | [`solve_exact`] | scaled permutation (linear assignment) | O(N³) |
//! | [`solve_sinkhorn`] | dense entropic coupling (log-domain potentials) | O(N² × iterations) |
//!
//! With equal uniform marginals the extreme points of the coupling polytope
//! are scaled permutation matrices, so the exact problem reduces to a linear
//! assignment problem.

mod cost;
mod exact;
mod linalg;
mod sinkhorn;

pub use cost::{cost_matrix, CostMatrix};
pub use exact::{solve_assignment, solve_exact, Assignment};
pub use sinkhorn::{solve_sinkhorn, SinkhornConfig, SinkhornSolution, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// A coupling between `N` sources and `N` targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    pub coupling: Matrix<T>,
    /// Entropic regularizer; `0` for the exact plan.
    pub regularizer: f64,
    /// Worst absolute deviation of any row or column sum from `1/N`.
    pub marginal_violation: f64,
}

impl<T: Scalar> TransportPlan<T> {
    pub fn size(&self) -> usize {
        self.coupling.rows()
    }

    /// `sum_ij C_ij P_ij`.
    pub fn transport_cost(&self, cost: &CostMatrix<T>) -> T {
        self.coupling
            .as_slice()
            .iter()
            .zip(cost.entries().as_slice())
            .map(|(&p, &c)| p * c)
            .sum()
    }

    /// Recomputes the worst marginal deviation from the coupling.
    pub fn measured_violation(&self) -> f64 {
        marginal_violation(&self.coupling)
    }

    /// Column index of the largest entry of each row (ties: smallest index).
    pub fn row_argmax(&self) -> Vec<usize> {
        self.coupling
            .iter_rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, T::neg_infinity()), |(bj, bv), (j, &v)| if v > bv { (j, v) } else { (bj, bv) })
                    .0
            })
            .collect()
    }
}

pub(crate) fn marginal_violation<T: Scalar>(coupling: &Matrix<T>) -> f64 {
    let target = 1.0 / coupling.rows() as f64;
    let rows = coupling.row_sums().into_iter();
    let cols = coupling.col_sums().into_iter();
    rows.chain(cols).map(|s| (s.widen() - target).abs()).fold(0.0, f64::max)
}

/// Divides every row of the coupling by its sum, giving a row-stochastic
/// matrix whose row `i` is the conditional law of the target given source `i`.
pub fn row_normalize<T: Scalar>(plan: &TransportPlan<T>) -> Result<Matrix<T>> {
    let mut out = plan.coupling.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let sum: T = row.iter().copied().sum();
        if !(sum > T::zero()) {
            return Err(Error::ZeroRow(i));
        }
        row.iter_mut().for_each(|v| *v = *v / sum);
    }
    Ok(out)
}
