//! Linear assignment by successive shortest augmenting paths.
//!
//! Jonker-Volgenant without the augmenting row reduction: column reduction
//! with reduction transfer, then one shortest augmenting path (Dijkstra over
//! reduced costs `C_ij - v_j`, lazy price updates) per row that is still
//! free. The auction-like row reduction was dropped because on clustered
//! samples, where many rows have nearly equal costs, it spends most of its
//! time in small price decrements. Every step scans rows and
//! columns in a fixed order, so duplicate points always get the same
//! matching.

use crate::error::Result;
use crate::matrix::Matrix;
use crate::ot::{CostMatrix, TransportPlan};
use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

/// Optimal one-to-one matching of rows to columns with dual certificates.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<T> {
    /// `row_to_col[i]` is the column matched to row `i`.
    pub row_to_col: Vec<usize>,
    /// `sum_i C[i, row_to_col[i]]` (not divided by `N`).
    pub total_cost: T,
    /// Row duals `u`; `u_i + v_j <= C_ij` with equality on matched pairs.
    pub row_potential: Vec<T>,
    pub col_potential: Vec<T>,
}

pub fn solve_assignment<T: Scalar>(cost: &CostMatrix<T>) -> Result<Assignment<T>> {
    cost.check_finite()?;
    let c = cost.entries();
    let n = cost.size();
    let mut lap = Lap { c, n, x: vec![NONE; n], y: vec![NONE; n], v: vec![T::infinity(); n] };
    let free = lap.column_reduction();
    let mut scratch = PathScratch::new(n);
    for row in free {
        lap.augment(row, &mut scratch);
    }

    let Lap { x: row_to_col, v, .. } = lap;
    let u: Vec<T> = (0..n)
        .map(|i| c.row(i).iter().zip(&v).map(|(&cij, &vj)| cij - vj).fold(T::infinity(), T::min))
        .collect();
    let total_cost = row_to_col.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
    Ok(Assignment { row_to_col, total_cost, row_potential: u, col_potential: v })
}

struct Lap<'a, T> {
    c: &'a Matrix<T>,
    n: usize,
    /// Column of each row.
    x: Vec<usize>,
    /// Row of each column.
    y: Vec<usize>,
    v: Vec<T>,
}

struct PathScratch<T> {
    cols: Vec<usize>,
    dist: Vec<T>,
    pred: Vec<usize>,
}

impl<T: Scalar> PathScratch<T> {
    fn new(n: usize) -> Self {
        Self { cols: Vec::with_capacity(n), dist: vec![T::zero(); n], pred: vec![0; n] }
    }
}

impl<'a, T: Scalar> Lap<'a, T> {
    /// Column minima as prices; each row keeps at most one of the columns it
    /// is cheapest for, and rows holding exactly one transfer the slack to
    /// their second-best column. Returns the rows left unassigned.
    fn column_reduction(&mut self) -> Vec<usize> {
        let n = self.n;
        for i in 0..n {
            for (j, &cij) in self.c.row(i).iter().enumerate() {
                if cij < self.v[j] {
                    self.v[j] = cij;
                    self.y[j] = i;
                }
            }
        }
        let mut unique = vec![true; n];
        for j in (0..n).rev() {
            let i = self.y[j];
            if self.x[i] == NONE {
                self.x[i] = j;
            } else {
                unique[i] = false;
                self.y[j] = NONE;
            }
        }
        let mut free = Vec::new();
        for (i, &only) in unique.iter().enumerate() {
            if self.x[i] == NONE {
                free.push(i);
            } else if only {
                let j = self.x[i];
                let second = self
                    .c
                    .row(i)
                    .iter()
                    .zip(&self.v)
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, (&cik, &vk))| cik - vk)
                    .fold(T::infinity(), T::min);
                if second.is_finite() {
                    self.v[j] = self.v[j] - second;
                }
            }
        }
        free
    }

    /// Shortest augmenting path from the free row `start` and augmentation
    /// along it.
    fn augment(&mut self, start: usize, s: &mut PathScratch<T>) {
        let n = self.n;
        let c0 = self.c.row(start);
        s.cols.clear();
        s.cols.extend(0..n);
        for ((d, &c), &v) in s.dist.iter_mut().zip(c0).zip(&self.v) {
            *d = c - v;
        }
        s.pred.fill(start);
        // cols[..ready] are finalized, cols[ready..lo] scanned, cols[lo..hi]
        // at the current minimum distance and waiting to be scanned,
        // cols[hi..] not yet reached.
        let (mut lo, mut hi, mut ready) = (0usize, 0usize, 0usize);
        let end = 'search: loop {
            if lo == hi {
                ready = lo;
                hi = lo + 1;
                let mut min = s.dist[s.cols[lo]];
                // `hi` grows inside the loop; the scan still covers every
                // column after the first one.
                let first = hi;
                for k in first..n {
                    let j = s.cols[k];
                    let d = s.dist[j];
                    if d <= min {
                        if d < min {
                            hi = lo;
                            min = d;
                        }
                        s.cols[k] = s.cols[hi];
                        s.cols[hi] = j;
                        hi += 1;
                    }
                }
                if let Some(&j) = s.cols[lo..hi].iter().find(|&&j| self.y[j] == NONE) {
                    break 'search j;
                }
            }
            while lo != hi {
                let j = s.cols[lo];
                lo += 1;
                let i = self.y[j];
                let min = s.dist[j];
                let ci = self.c.row(i);
                let h = ci[j] - self.v[j] - min;
                let first = hi;
                for k in first..n {
                    let jk = s.cols[k];
                    let reduced = ci[jk] - self.v[jk] - h;
                    if reduced < s.dist[jk] {
                        s.dist[jk] = reduced;
                        s.pred[jk] = i;
                        if reduced == min {
                            if self.y[jk] == NONE {
                                break 'search jk;
                            }
                            s.cols[k] = s.cols[hi];
                            s.cols[hi] = jk;
                            hi += 1;
                        }
                    }
                }
            }
        };
        // Prices of finalized columns move by their distance below the
        // final level.
        let level = s.dist[end];
        for &j in &s.cols[..ready] {
            self.v[j] = self.v[j] + s.dist[j] - level;
        }
        let mut j = end;
        loop {
            let i = s.pred[j];
            self.y[j] = i;
            let previous = self.x[i];
            self.x[i] = j;
            if i == start {
                break;
            }
            j = previous;
        }
    }
}

/// Exact optimal coupling: the scaled permutation `P[i, σ(i)] = 1/N`.
pub fn solve_exact<T: Scalar>(cost: &CostMatrix<T>) -> Result<TransportPlan<T>> {
    let assignment = solve_assignment(cost)?;
    let n = cost.size();
    let mass = T::one() / T::of_usize(n);
    let mut coupling = Matrix::zeros(n, n);
    for (i, &j) in assignment.row_to_col.iter().enumerate() {
        coupling[(i, j)] = mass;
    }
    let marginal_violation = crate::ot::marginal_violation(&coupling);
    Ok(TransportPlan { coupling, regularizer: 0.0, marginal_violation })
}
