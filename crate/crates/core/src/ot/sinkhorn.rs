//! Entropy-regularized transport between uniform marginals.
//!
//! The plan is parameterized by dual potentials `f, g` in cost units,
//! `P_ij = exp((f_i + g_j - C_ij) / eps)`. Three kinds of updates act on the
//! potentials:
//!
//! * log-sum-exp sweeps, which rescale rows and columns exactly in log space
//!   and cannot underflow a whole row even at tiny `eps`;
//! * kernel sweeps on `K_ij = exp((f_i + g_j - C_ij) / eps)` with multiplicative
//!   scalings `u, v` that are absorbed back into `f, g` before they drift far
//!   from 1. These are plain matrix-vector products and are used whenever
//!   they are safe, with an adaptively tuned over-relaxation factor;
//! * damped Newton steps on the dual objective over the numerically
//!   non-negligible entries of the plan, used when the sweeps converge too
//!   slowly (small `eps` relative to the cost spread).
//!
//! Warm starts: for `eps` far below the cost scale the potentials start from
//! the dual certificate of the exact assignment; otherwise, with epsilon
//! scaling enabled, a short warm-up runs from `eps = max C` down to the
//! target, halving at each stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ot::linalg::{cholesky_apply, cholesky_factor};
use crate::ot::{solve_assignment, CostMatrix, TransportPlan};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Sweeps allowed per intermediate epsilon-scaling stage.
const STAGE_ITERS: usize = 20;
const STAGE_DECAY: f64 = 0.5;
/// Below `WARM_START_RATIO` times the cost spread the exact assignment seeds
/// the potentials; above it epsilon scaling is cheaper.
const WARM_START_RATIO: f64 = 1e-4;
/// Sweeps between re-tunings of the relaxation factor, and the transient
/// sweeps skipped after each change.
const RATE_WINDOW: usize = 20;
const RATE_BURN_IN: usize = 10;
const MAX_OMEGA: f64 = 1.98;
/// Scalings are absorbed into the potentials once `|ln u|` or `|ln v|`
/// exceeds this.
const ABSORB_LIMIT: f64 = 30.0;
/// Entries below `exp(-SUPPORT_CUTOFF) / N` are dropped from Newton systems.
const SUPPORT_CUTOFF: f64 = 60.0;
const NEWTON_MAX_STEPS: usize = 60;
/// Newton is not attempted beyond this size (dense `N^2` system).
const MAX_DOUBLINGS: usize = 10;
const NEWTON_MAX_SIZE: usize = 3000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    /// Budget shared by sweeps and Newton steps.
    pub max_iters: usize,
    /// Stop once every row and column sum is within this of `1/N`.
    pub tolerance: f64,
    /// Divide costs by their maximum before solving. This changes the scale
    /// on which `epsilon` acts.
    pub normalize_cost: bool,
    pub epsilon_scaling: bool,
}

impl SinkhornConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
            normalize_cost: false,
            epsilon_scaling: true,
        }
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn normalize_cost(mut self, on: bool) -> Self {
        self.normalize_cost = on;
        self
    }

    pub fn epsilon_scaling(mut self, on: bool) -> Self {
        self.epsilon_scaling = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive and finite, got {}", self.epsilon)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SinkhornSolution<T> {
    pub plan: TransportPlan<T>,
    /// Sweeps plus Newton steps, including warm-up stages.
    pub iterations: usize,
    pub converged: bool,
    /// Dual potentials on the (possibly normalized) cost scale.
    pub row_potential: Vec<T>,
    pub col_potential: Vec<T>,
}

impl<T: Scalar> SinkhornSolution<T> {
    /// Turns a non-converged run into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { violation: self.plan.marginal_violation, iterations: self.iterations })
        }
    }
}

/// Solves `min <C, P> - eps H(P)` over couplings with uniform marginals.
///
/// A run that exhausts `max_iters` still returns its plan with
/// `converged = false`; the achieved violation is in
/// `plan.marginal_violation`.
pub fn solve_sinkhorn<T: Scalar>(cost: &CostMatrix<T>, config: &SinkhornConfig) -> Result<SinkhornSolution<T>> {
    config.validate()?;
    cost.check_finite()?;
    let cost = if config.normalize_cost { cost.normalized() } else { cost.clone() };
    let n = cost.size();
    let target = config.epsilon;
    let spread = cost.max_entry().widen() - cost.entries().as_slice().iter().copied().fold(T::infinity(), T::min).widen();
    let mut state = State::new(cost.entries());
    let mut budget = Budget { used: 0, max: config.max_iters };

    if spread > 0.0 && target < WARM_START_RATIO * spread {
        let assignment = solve_assignment(&cost)?;
        let shift = T::of(target) * state.log_mass;
        state.f = assignment.row_potential.iter().map(|&u| u + shift).collect();
        state.g = assignment.col_potential;
    } else if config.epsilon_scaling {
        let mut eps = spread;
        let stage_tol = config.tolerance.max(1e-3 / n as f64);
        while eps > target && !budget.exhausted() {
            state.run(T::of(eps), stage_tol, &mut budget, STAGE_ITERS, false);
            eps *= STAGE_DECAY;
        }
    }
    let remaining = budget.remaining().max(1);
    let converged = state.run(T::of(target), config.tolerance, &mut budget, remaining, true);

    let coupling = state.coupling(T::of(target));
    let marginal_violation = crate::ot::marginal_violation(&coupling);
    Ok(SinkhornSolution {
        plan: TransportPlan { coupling, regularizer: config.epsilon, marginal_violation },
        iterations: budget.used.max(1),
        converged,
        row_potential: state.f,
        col_potential: state.g,
    })
}

struct Budget {
    used: usize,
    max: usize,
}

impl Budget {
    fn exhausted(&self) -> bool {
        self.used >= self.max
    }

    fn remaining(&self) -> usize {
        self.max.saturating_sub(self.used)
    }
}

struct State<'a, T> {
    cost: &'a Matrix<T>,
    n: usize,
    log_mass: T,
    mass: T,
    f: Vec<T>,
    g: Vec<T>,
    /// `exp((f_i + g_j - C_ij) / kernel_eps)`, valid when `kernel_eps` is set.
    kernel: Vec<T>,
    kernel_eps: Option<T>,
    /// Set once kernel sweeps have broken down at this `eps`.
    log_only: Option<T>,
    u: Vec<T>,
    v: Vec<T>,
    scratch_rows: Vec<T>,
    scratch_cols: Vec<T>,
}

impl<'a, T: Scalar> State<'a, T> {
    fn new(cost: &'a Matrix<T>) -> Self {
        let n = cost.rows();
        Self {
            cost,
            n,
            log_mass: T::of(-(n as f64).ln()),
            mass: T::one() / T::of_usize(n),
            f: vec![T::zero(); n],
            g: vec![T::zero(); n],
            kernel: Vec::new(),
            kernel_eps: None,
            log_only: None,
            u: vec![T::one(); n],
            v: vec![T::one(); n],
            scratch_rows: vec![T::zero(); n],
            scratch_cols: vec![T::zero(); n],
        }
    }

    /// Iterates at a fixed `eps` until the worst marginal violation drops to
    /// `tol`, `limit` iterations are spent, or the budget runs out.
    ///
    /// With `relax`, sweeps are over-relaxed with a factor re-tuned every
    /// `RATE_WINDOW` sweeps (see [`adapt_relaxation`]), and Newton steps take
    /// over when the observed rate predicts too many remaining sweeps.
    fn run(&mut self, eps: T, tol: f64, budget: &mut Budget, limit: usize, relax: bool) -> bool {
        let stop = budget.used + limit.min(budget.remaining());
        let mut omega = 1.0f64;
        let mut window: Vec<f64> = Vec::with_capacity(RATE_BURN_IN + RATE_WINDOW + 1);
        let mut newton_failed = false;
        while budget.used < stop {
            let violation = self.sweep(eps, omega);
            budget.used += 1;
            if violation <= tol {
                return true;
            }
            if budget.used >= stop {
                break;
            }
            if relax {
                // The first sweeps after a change of factor are transient and
                // are left out of the rate estimate.
                window.push(violation);
                if window.len() > RATE_BURN_IN + RATE_WINDOW {
                    let start = window[RATE_BURN_IN];
                    let rate = (violation / start).powf(1.0 / RATE_WINDOW as f64);
                    let predicted = if rate < 1.0 { (tol / violation).ln() / rate.ln() } else { f64::INFINITY };
                    let newton_pays = predicted > (self.n as f64).max(100.0);
                    if newton_pays && !newton_failed && self.n <= NEWTON_MAX_SIZE {
                        match self.newton(eps, tol, budget, stop) {
                            Some(true) => return true,
                            Some(false) => {}
                            None => newton_failed = true,
                        }
                        omega = 1.0;
                        window.clear();
                        continue;
                    }
                    let next = adapt_relaxation(omega, start, violation, RATE_WINDOW);
                    window.clear();
                    if next == omega {
                        window.extend(std::iter::repeat_n(violation, RATE_BURN_IN + 1));
                    }
                    omega = next;
                }
            }
            self.row_update(eps, omega);
        }
        false
    }

    fn absorb(&mut self, eps: T) {
        if self.kernel_eps.is_some() {
            for (f, u) in self.f.iter_mut().zip(self.u.iter_mut()) {
                *f = *f + eps * u.ln();
                *u = T::one();
            }
            for (g, v) in self.g.iter_mut().zip(self.v.iter_mut()) {
                *g = *g + eps * v.ln();
                *v = T::one();
            }
        }
        self.kernel_eps = None;
    }

    fn build_kernel(&mut self, eps: T) {
        let inv = T::one() / eps;
        let n = self.n;
        self.kernel.resize(n * n, T::zero());
        for i in 0..n {
            let fi = self.f[i];
            let c = self.cost.row(i);
            for ((k, &cij), &gj) in self.kernel[i * n..(i + 1) * n].iter_mut().zip(c).zip(&self.g) {
                *k = ((fi + gj - cij) * inv).exp();
            }
        }
        self.u.iter_mut().for_each(|u| *u = T::one());
        self.v.iter_mut().for_each(|v| *v = T::one());
        self.kernel_eps = Some(eps);
    }

    /// Column update followed by a row-mass evaluation; returns the worst
    /// marginal violation of the resulting state. The row update itself is
    /// applied by [`Self::row_update`] so that a converged state is kept as is.
    fn sweep(&mut self, eps: T, omega: f64) -> f64 {
        if self.log_only != Some(eps) {
            if self.kernel_eps != Some(eps) {
                self.absorb(self.kernel_eps.unwrap_or(eps));
                self.build_kernel(eps);
            }
            if let Some(violation) = self.kernel_sweep(omega) {
                return violation;
            }
            self.absorb(eps);
            self.log_only = Some(eps);
        }
        self.log_sweep(eps, omega)
    }

    fn kernel_sweep(&mut self, omega: f64) -> Option<f64> {
        let n = self.n;
        let w = T::of(omega);
        let mass = self.mass;
        // Column masses before the update: v_j (K^T u)_j.
        let ktu = &mut self.scratch_cols;
        ktu.iter_mut().for_each(|x| *x = T::zero());
        for (row, &ui) in self.kernel.chunks_exact(n).zip(&self.u) {
            for (acc, &k) in ktu.iter_mut().zip(row) {
                *acc = *acc + k * ui;
            }
        }
        if ktu.iter().any(|&x| !(x > T::zero() && (mass / x).is_finite())) {
            return None;
        }
        let mut violation = 0.0f64;
        for (vj, &kj) in self.v.iter_mut().zip(ktu.iter()) {
            let exact = mass / kj;
            if omega == 1.0 {
                *vj = exact;
            } else {
                let relaxed = (*vj).powf(T::one() - w) * exact.powf(w);
                violation = violation.max((relaxed * kj - mass).abs().widen());
                *vj = relaxed;
            }
        }
        let kv = &mut self.scratch_rows;
        for ((acc, row), &ui) in kv.iter_mut().zip(self.kernel.chunks_exact(n)).zip(&self.u) {
            let s: T = row.iter().zip(&self.v).map(|(&k, &v)| k * v).sum();
            *acc = s;
            violation = violation.max((ui * s - mass).abs().widen());
        }
        if kv.iter().any(|&x| !(x > T::zero() && x.is_finite())) {
            return None;
        }
        Some(violation)
    }

    /// Log-domain column update and row-mass evaluation.
    fn log_sweep(&mut self, eps: T, omega: f64) -> f64 {
        let inv = T::one() / eps;
        let w = T::of(omega);
        let n = self.n;
        let mut violation = 0.0f64;
        let mut col_log = vec![T::zero(); n];
        for (j, lm) in col_log.iter_mut().enumerate() {
            *lm = log_mass_column(self.cost, j, &self.f, self.g[j], inv);
        }
        for (gj, &lm) in self.g.iter_mut().zip(&col_log) {
            let step = self.log_mass - lm;
            *gj = *gj + w * eps * step;
            if omega != 1.0 {
                violation = violation.max(((lm + w * step).exp() - self.mass).abs().widen());
            }
        }
        for i in 0..n {
            let lr = log_mass(self.cost.row(i), &self.g, self.f[i], inv);
            violation = violation.max((lr.exp() - self.mass).abs().widen());
        }
        violation
    }

    /// Row rescaling after a sweep, in whichever representation is current.
    fn row_update(&mut self, eps: T, omega: f64) {
        let w = T::of(omega);
        if self.kernel_eps.is_some() {
            let mut drift = 0.0f64;
            for (ui, &kv) in self.u.iter_mut().zip(&self.scratch_rows) {
                let exact = self.mass / kv;
                *ui = if omega == 1.0 { exact } else { (*ui).powf(T::one() - w) * exact.powf(w) };
                drift = drift.max(ui.ln().abs().widen());
            }
            drift = self.v.iter().fold(drift, |d, v| d.max(v.ln().abs().widen()));
            if !(drift <= ABSORB_LIMIT) {
                self.absorb(eps);
            }
        } else {
            let inv = T::one() / eps;
            for i in 0..self.n {
                let lr = log_mass(self.cost.row(i), &self.g, self.f[i], inv);
                self.f[i] = self.f[i] + w * eps * (self.log_mass - lr);
            }
        }
    }

    /// Damped Newton ascent on the dual objective. Returns `Some(converged)`
    /// after running, or `None` if no step made progress.
    fn newton(&mut self, eps: T, tol: f64, budget: &mut Budget, stop: usize) -> Option<bool> {
        self.absorb(eps);
        let n = self.n;
        let inv = T::one() / eps;
        let cutoff = self.log_mass - T::of(SUPPORT_CUTOFF);
        let mut plan = vec![T::zero(); n * n];
        let mut progressed = false;
        for _ in 0..NEWTON_MAX_STEPS {
            if budget.used >= stop {
                break;
            }
            // Plan, marginals and gradient at the current potentials.
            let (rows, cols) = self.dense_plan(eps, &mut plan);
            let violation = rows.iter().chain(&cols).map(|&s| (s - self.mass).abs().widen()).fold(0.0, f64::max);
            if violation <= tol {
                self.kernel_eps = None;
                return Some(true);
            }
            let support: Vec<Vec<(usize, T)>> = (0..n)
                .map(|i| {
                    let c = self.cost.row(i);
                    (0..n)
                        .filter(|&j| (self.f[i] + self.g[j] - c[j]) * inv > cutoff)
                        .map(|j| (j, plan[i * n + j]))
                        .collect()
                })
                .collect();

            // Schur complement on the column potentials, last one pinned.
            let m = n - 1;
            let mut schur = vec![T::zero(); m * m];
            for j in 0..m {
                schur[j * m + j] = cols[j];
            }
            for (i, entries) in support.iter().enumerate() {
                let r = rows[i];
                for &(j, pj) in entries {
                    if j == m {
                        continue;
                    }
                    let scale = pj / r;
                    for &(k, pk) in entries {
                        if k < m {
                            schur[j * m + k] = schur[j * m + k] - scale * pk;
                        }
                    }
                }
            }
            if !cholesky_factor(&mut schur, m, T::of(1e-12)) {
                return if progressed { Some(false) } else { None };
            }

            let mass = self.mass;
            let (df, dg) = self.newton_direction(&support, &schur, &rows, &cols, eps);
            let slope: T = df.iter().zip(&rows).map(|(&d, &r)| d * (mass - r)).sum::<T>()
                + dg.iter().zip(&cols).map(|(&d, &c)| d * (mass - c)).sum::<T>();
            if !(slope > T::zero()) {
                return if progressed { Some(false) } else { None };
            }

            // Backtracking on the exact change of the dual objective,
            // D(f, g) = mass (sum f + sum g) - eps sum_ij P_ij. A full step
            // that is accepted is then extended by doubling while D keeps
            // growing: nearly decoupled blocks of the plan drift along the
            // same direction for many steps otherwise.
            let sum_d: T = df.iter().chain(&dg).copied().sum();
            let gain_at = |t: T| {
                let mut loss = T::zero();
                for (i, row) in plan.chunks_exact(n).enumerate() {
                    for (&p, &dj) in row.iter().zip(&dg) {
                        if p > T::zero() {
                            loss = loss + p * ((t * (df[i] + dj)) * inv).exp_m1();
                        }
                    }
                }
                t * mass * sum_d - eps * loss
            };
            let mut t = T::one();
            let mut accepted = false;
            let mut gain = T::zero();
            for _ in 0..40 {
                gain = gain_at(t);
                if gain.is_finite() && gain >= T::of(1e-4) * t * slope {
                    accepted = true;
                    break;
                }
                t = t * T::of(0.5);
            }
            if accepted && t == T::one() {
                for _ in 0..MAX_DOUBLINGS {
                    let longer = gain_at(t + t);
                    if !(longer.is_finite() && longer > gain) {
                        break;
                    }
                    t = t + t;
                    gain = longer;
                }
            }
            budget.used += 1;
            if !accepted {
                return if progressed { Some(false) } else { None };
            }
            progressed = true;
            for (f, d) in self.f.iter_mut().zip(&df) {
                *f = *f + t * *d;
            }
            for (g, d) in self.g.iter_mut().zip(&dg) {
                *g = *g + t * *d;
            }
        }
        self.kernel_eps = None;
        Some(false)
    }

    /// Newton step for the marginal residual `eps (mass - marginal)` given
    /// the factored Schur complement.
    fn newton_direction(
        &self,
        support: &[Vec<(usize, T)>],
        factor: &[T],
        rows: &[T],
        cols: &[T],
        eps: T,
    ) -> (Vec<T>, Vec<T>) {
        let residual = |s: T| eps * (self.mass - s);
        let m = self.n - 1;
        let row_res: Vec<T> = rows.iter().map(|&r| residual(r)).collect();
        let mut dg: Vec<T> = cols[..m].iter().map(|&c| residual(c)).collect();
        for (i, entries) in support.iter().enumerate() {
            let scaled = row_res[i] / rows[i];
            for &(j, pj) in entries {
                if j < m {
                    dg[j] = dg[j] - pj * scaled;
                }
            }
        }
        cholesky_apply(factor, &mut dg, m);
        dg.push(T::zero());
        let df = support
            .iter()
            .zip(rows)
            .zip(&row_res)
            .map(|((entries, &r), &res)| {
                let coupled: T = entries.iter().map(|&(j, p)| p * dg[j]).sum();
                (res - coupled) / r
            })
            .collect();
        (df, dg)
    }

    /// Fills `plan` from the potentials and returns its row and column sums.
    fn dense_plan(&self, eps: T, plan: &mut [T]) -> (Vec<T>, Vec<T>) {
        let inv = T::one() / eps;
        let n = self.n;
        let mut rows = vec![T::zero(); n];
        let mut cols = vec![T::zero(); n];
        for i in 0..n {
            let c = self.cost.row(i);
            let out = &mut plan[i * n..(i + 1) * n];
            let mut s = T::zero();
            for (j, p) in out.iter_mut().enumerate() {
                *p = ((self.f[i] + self.g[j] - c[j]) * inv).exp();
                s = s + *p;
                cols[j] = cols[j] + *p;
            }
            rows[i] = s;
        }
        (rows, cols)
    }

    fn coupling(&mut self, eps: T) -> Matrix<T> {
        self.absorb(eps);
        let mut plan = vec![T::zero(); self.n * self.n];
        self.dense_plan(eps, &mut plan);
        Matrix::from_vec(self.n, self.n, plan).expect("square plan")
    }
}

/// Next over-relaxation factor from the violation decay over `sweeps` sweeps
/// run with factor `omega`.
///
/// Near the fixed point the alternating updates are block Gauss-Seidel on a
/// two-block (bipartite) system, so Young's relation
/// `(rate + omega - 1)^2 = rate * omega^2 * lambda` links the observed rate to
/// the plain-sweep rate `lambda`, and the optimal factor is
/// `2 / (1 + sqrt(1 - lambda))`. A non-contracting window halves the excess
/// over 1 instead.
fn adapt_relaxation(omega: f64, start: f64, end: f64, sweeps: usize) -> f64 {
    let rate = (end / start).powf(1.0 / sweeps as f64);
    if !(rate.is_finite() && rate > 0.0) {
        return omega;
    }
    if rate >= 1.0 {
        let shrunk = 1.0 + 0.5 * (omega - 1.0);
        return if shrunk < 1.05 { 1.0 } else { shrunk };
    }
    let lambda = ((rate + omega - 1.0).powi(2) / (rate * omega * omega)).min(1.0);
    (2.0 / (1.0 + (1.0 - lambda).sqrt())).clamp(1.0, MAX_OMEGA)
}

/// `ln sum_k exp((own + other_k - cost_k) / eps)`, max-shifted.
#[inline]
fn log_mass<T: Scalar>(costs: &[T], other: &[T], own: T, inv: T) -> T {
    let max = costs.iter().zip(other).map(|(&c, &o)| (own + o - c) * inv).fold(T::neg_infinity(), T::max);
    let sum: T = costs.iter().zip(other).map(|(&c, &o)| ((own + o - c) * inv - max).exp()).sum();
    max + sum.ln()
}

/// Column variant of [`log_mass`] reading `cost[., j]`.
fn log_mass_column<T: Scalar>(cost: &Matrix<T>, j: usize, f: &[T], gj: T, inv: T) -> T {
    let max = f.iter().enumerate().map(|(i, &fi)| (fi + gj - cost[(i, j)]) * inv).fold(T::neg_infinity(), T::max);
    let sum: T = f.iter().enumerate().map(|(i, &fi)| ((fi + gj - cost[(i, j)]) * inv - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::solve_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cost(rows: &[[f64; 2]; 2]) -> CostMatrix<f64> {
        CostMatrix::from_matrix(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn random_cost(n: usize, seed: u64) -> CostMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CostMatrix::from_matrix(Matrix::from_fn(n, n, |_, _| rng.gen::<f64>())).unwrap()
    }

    /// Closed form for the 2x2 problem with cost [[0,1],[1,0]]: the plan is
    /// [[a, 1/2-a], [1/2-a, a]] and stationarity gives
    /// ln(a / (1/2 - a)) = 1/eps, i.e. a = 1 / (2 (1 + exp(-1/eps))).
    fn two_by_two_diagonal(eps: f64) -> f64 {
        0.5 / (1.0 + (-1.0 / eps).exp())
    }

    #[test]
    fn constant_cost_gives_product_coupling() {
        for eps in [0.01, 1.0, 100.0] {
            let c = CostMatrix::from_matrix(Matrix::<f64>::zeros(4, 4)).unwrap();
            let s = solve_sinkhorn(&c, &SinkhornConfig::new(eps)).unwrap();
            assert!(s.converged);
            for &p in s.plan.coupling.as_slice() {
                assert!((p - 1.0 / 16.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn large_epsilon_approaches_uniform() {
        let s = solve_sinkhorn(&cost(&[[0.0, 1.0], [1.0, 0.0]]), &SinkhornConfig::new(1e6)).unwrap();
        for &p in s.plan.coupling.as_slice() {
            assert!((p - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn two_by_two_matches_closed_form() {
        for eps in [0.01, 0.3, 1.0, 5.0] {
            let s = solve_sinkhorn(&cost(&[[0.0, 1.0], [1.0, 0.0]]), &SinkhornConfig::new(eps)).unwrap();
            let a = two_by_two_diagonal(eps);
            let expected = [a, 0.5 - a, 0.5 - a, a];
            for (p, e) in s.plan.coupling.as_slice().iter().zip(expected) {
                assert!((p - e).abs() < 1e-9, "eps={eps}: {p} vs {e}");
            }
        }
    }

    #[test]
    fn small_epsilon_is_near_exact_plan() {
        let s = solve_sinkhorn(&cost(&[[0.0, 1.0], [1.0, 0.0]]), &SinkhornConfig::new(0.01)).unwrap();
        for (p, e) in s.plan.coupling.as_slice().iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((p - e).abs() <= 1e-3);
        }
    }

    #[test]
    fn feasible_within_tolerance() {
        for (n, eps) in [(16, 0.01), (40, 0.1), (64, 1.0)] {
            let s = solve_sinkhorn(&random_cost(n, n as u64), &SinkhornConfig::new(eps)).unwrap();
            assert!(s.converged, "n={n} eps={eps} iterations={}", s.iterations);
            assert!(s.plan.marginal_violation <= 1e-6);
            assert!(s.plan.coupling.as_slice().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn transport_cost_grows_with_epsilon() {
        let c = random_cost(24, 3);
        let costs: Vec<f64> = [0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|&eps| solve_sinkhorn(&c, &SinkhornConfig::new(eps)).unwrap().plan.transport_cost(&c))
            .collect();
        for w in costs.windows(2) {
            assert!(w[0] <= w[1] + 1e-12, "{costs:?}");
        }
    }

    #[test]
    fn cost_gap_to_exact_shrinks() {
        let c = random_cost(32, 17);
        let exact = solve_exact(&c).unwrap().transport_cost(&c);
        let soft = solve_sinkhorn(&c, &SinkhornConfig::new(1e-3)).unwrap().plan.transport_cost(&c);
        assert!(soft >= exact - 1e-12);
        assert!((soft - exact) / exact <= 1e-2, "{soft} vs {exact}");
    }

    #[test]
    fn scaling_and_plain_agree() {
        let c = random_cost(20, 5);
        let a = solve_sinkhorn(&c, &SinkhornConfig::new(0.05)).unwrap();
        let b = solve_sinkhorn(&c, &SinkhornConfig::new(0.05).epsilon_scaling(false)).unwrap();
        assert!(a.converged && b.converged);
        for (x, y) in a.plan.coupling.as_slice().iter().zip(b.plan.coupling.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn normalization_rescales_epsilon() {
        let c = random_cost(10, 8);
        let scaled = CostMatrix::from_matrix(c.entries().map(|v| v * 7.0)).unwrap();
        let max = scaled.max_entry();
        let a = solve_sinkhorn(&scaled, &SinkhornConfig::new(0.2).normalize_cost(true)).unwrap();
        let b = solve_sinkhorn(&scaled, &SinkhornConfig::new(0.2 * max)).unwrap();
        for (x, y) in a.plan.coupling.as_slice().iter().zip(b.plan.coupling.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let c = random_cost(30, 9);
        let s = solve_sinkhorn(&c, &SinkhornConfig::new(1e-3).max_iters(2).epsilon_scaling(false)).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 2);
        assert!(s.plan.marginal_violation > 1e-9);
        assert!(matches!(s.require_converged(), Err(Error::NotConverged { iterations: 2, .. })));
    }

    #[test]
    fn bad_configs_rejected() {
        let c = random_cost(3, 1);
        for cfg in [
            SinkhornConfig::new(0.0),
            SinkhornConfig::new(-1.0),
            SinkhornConfig::new(f64::INFINITY),
            SinkhornConfig::new(1.0).tolerance(0.0),
            SinkhornConfig::new(1.0).max_iters(0),
        ] {
            assert!(matches!(solve_sinkhorn(&c, &cfg), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn tiny_epsilon_cold_start_does_not_overflow() {
        let c = CostMatrix::from_matrix(random_cost(8, 4).entries().map(|v| v * 1e3)).unwrap();
        let s = solve_sinkhorn(&c, &SinkhornConfig::new(1e-3).epsilon_scaling(false)).unwrap();
        assert!(s.plan.coupling.is_finite());
        assert!(s.plan.marginal_violation <= 1e-6);
    }

    #[test]
    fn single_precision_converges_loosely() {
        let c = CostMatrix::from_matrix(Matrix::from_rows(&[[0.0f32, 1.0], [1.0, 0.0]]).unwrap()).unwrap();
        let s = solve_sinkhorn(&c, &SinkhornConfig::new(0.5).tolerance(1e-5)).unwrap();
        assert!(s.converged);
        let a = two_by_two_diagonal(0.5) as f32;
        assert!((s.plan.coupling[(0, 0)] - a).abs() < 1e-5);
    }
}
