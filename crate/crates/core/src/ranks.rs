//! Multivariate ranks from optimal transport and the (soft) rank energy
//! two-sample statistic.
//!
//! Both samples are pooled (`xs` first, then `ys`) and transported onto a
//! Halton grid with one point per pooled observation. The hard rank of an
//! observation is the grid point it is matched to by the exact plan; its soft
//! rank is the conditional mean of the grid under the row-normalized entropic
//! plan. The statistic is the energy distance between the two rank clouds:
//!
//! ```text
//! E = 2/(mn) sum_ij |Rx_i - Ry_j| - 1/m^2 sum_ij |Rx_i - Rx_j| - 1/n^2 sum_ij |Ry_i - Ry_j|
//! ```
//!
//! and the test statistic compared against a threshold is `E * mn/(m+n)`.
//!
//! With duplicated observations across the samples the optimal matching is
//! not unique and the hard-rank statistic depends on the solver's
//! tie-breaking; soft ranks of identical observations are always identical.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halton::HaltonGrid;
use crate::matrix::{distance, Matrix};
use crate::ot::{cost_matrix, row_normalize, solve_assignment, solve_sinkhorn, SinkhornConfig};
use crate::scalar::Scalar;

/// Two samples in the same dimension, one observation per row.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSample<T> {
    xs: Matrix<T>,
    ys: Matrix<T>,
}

impl<T: Scalar> TwoSample<T> {
    pub fn new(xs: Matrix<T>, ys: Matrix<T>) -> Result<Self> {
        if xs.rows() == 0 || ys.rows() == 0 {
            return Err(Error::Empty("both samples need at least one observation".into()));
        }
        if xs.cols() != ys.cols() {
            return Err(Error::DimensionMismatch { expected: xs.cols(), found: ys.cols(), context: "two-sample".into() });
        }
        if xs.cols() == 0 {
            return Err(Error::InvalidArgument("observations must have dimension at least 1".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &Matrix<T> {
        &self.xs
    }

    pub fn ys(&self) -> &Matrix<T> {
        &self.ys
    }

    pub fn m(&self) -> usize {
        self.xs.rows()
    }

    pub fn n(&self) -> usize {
        self.ys.rows()
    }

    pub fn dim(&self) -> usize {
        self.xs.cols()
    }

    /// `xs` stacked on top of `ys`.
    pub fn pooled(&self) -> Matrix<T> {
        self.xs.vstack(&self.ys).expect("dimensions checked on construction")
    }

    pub fn swapped(&self) -> Self {
        Self { xs: self.ys.clone(), ys: self.xs.clone() }
    }

    /// The grid this sample is ranked against: `m + n` Halton points in `d`.
    pub fn default_grid(&self) -> Result<HaltonGrid<T>> {
        HaltonGrid::generate(self.m() + self.n(), self.dim())
    }

    fn check_grid(&self, grid: &HaltonGrid<T>) -> Result<()> {
        if grid.count() != self.m() + self.n() {
            return Err(Error::CountMismatch {
                expected: self.m() + self.n(),
                found: grid.count(),
                context: "grid size must equal the pooled sample size".into(),
            });
        }
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: grid.dim(), context: "grid".into() });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankKind {
    Hard,
    Soft,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankSet<T> {
    pub x_ranks: Matrix<T>,
    pub y_ranks: Matrix<T>,
    pub kind: RankKind,
    /// `0` for hard ranks.
    pub epsilon: f64,
    /// Marginal violation of the plan the ranks were read from.
    pub marginal_violation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatisticKind {
    #[serde(rename = "RE")]
    RankEnergy,
    #[serde(rename = "sRE")]
    SoftRankEnergy,
}

impl From<RankKind> for StatisticKind {
    fn from(k: RankKind) -> Self {
        match k {
            RankKind::Hard => StatisticKind::RankEnergy,
            RankKind::Soft => StatisticKind::SoftRankEnergy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    pub raw: f64,
    /// `raw * m n / (m + n)`.
    pub scaled: f64,
    pub kind: StatisticKind,
    pub epsilon: f64,
}

/// Ranks from the exact optimal matching of the pooled sample to `grid`.
pub fn hard_ranks<T: Scalar>(sample: &TwoSample<T>, grid: &HaltonGrid<T>) -> Result<RankSet<T>> {
    sample.check_grid(grid)?;
    let cost = cost_matrix(&sample.pooled(), grid)?;
    let assignment = solve_assignment(&cost)?;
    let ranks = grid.points().select_rows(&assignment.row_to_col);
    let m = sample.m();
    Ok(RankSet {
        x_ranks: ranks.slice_rows(0, m),
        y_ranks: ranks.slice_rows(m, ranks.rows()),
        kind: RankKind::Hard,
        epsilon: 0.0,
        marginal_violation: 0.0,
    })
}

/// Conditional expectation of the grid under the row-normalized entropic plan.
///
/// A Sinkhorn run that exhausts its iteration budget is logged and its plan
/// is used as is; the achieved violation is kept on the returned set.
pub fn soft_ranks<T: Scalar>(
    sample: &TwoSample<T>,
    grid: &HaltonGrid<T>,
    config: &SinkhornConfig,
) -> Result<RankSet<T>> {
    sample.check_grid(grid)?;
    let cost = cost_matrix(&sample.pooled(), grid)?;
    let solution = solve_sinkhorn(&cost, config)?;
    if !solution.converged {
        log::warn!(
            "sinkhorn stopped after {} iterations with marginal violation {:e} (tolerance {:e})",
            solution.iterations,
            solution.plan.marginal_violation,
            config.tolerance
        );
    }
    let conditional = row_normalize(&solution.plan)?;
    let points = grid.points();
    let d = grid.dim();
    let mut ranks = Matrix::zeros(conditional.rows(), d);
    for i in 0..conditional.rows() {
        let out = ranks.row_mut(i);
        for (&w, h) in conditional.row(i).iter().zip(points.iter_rows()) {
            for (o, &hk) in out.iter_mut().zip(h) {
                *o = *o + w * hk;
            }
        }
    }
    let m = sample.m();
    Ok(RankSet {
        x_ranks: ranks.slice_rows(0, m),
        y_ranks: ranks.slice_rows(m, ranks.rows()),
        kind: RankKind::Soft,
        epsilon: config.epsilon,
        marginal_violation: solution.plan.marginal_violation,
    })
}

/// Energy distance between the two rank clouds.
///
/// The cross term is summed in sorted order and the two within-sample terms
/// are added before subtracting, so swapping the samples gives a bit-identical
/// value.
pub fn energy_statistic<T: Scalar>(ranks: &RankSet<T>) -> Result<StatisticValue> {
    let (xr, yr) = (&ranks.x_ranks, &ranks.y_ranks);
    let (m, n) = (xr.rows(), yr.rows());
    if m == 0 || n == 0 {
        return Err(Error::Empty("rank set".into()));
    }
    let mut cross: Vec<T> = Vec::with_capacity(m * n);
    for x in xr.iter_rows() {
        cross.extend(yr.iter_rows().map(|y| distance(x, y)));
    }
    cross.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let cross_sum: T = cross.into_iter().sum();

    let (mf, nf) = (T::of_usize(m), T::of_usize(n));
    let two = T::of(2.0);
    let within = within_sum(xr) / (mf * mf) + within_sum(yr) / (nf * nf);
    let raw = (two * cross_sum / (mf * nf) - within).widen();
    Ok(StatisticValue {
        raw,
        scaled: raw * (m * n) as f64 / (m + n) as f64,
        kind: ranks.kind.into(),
        epsilon: ranks.epsilon,
    })
}

/// `sum_{i,j} |r_i - r_j|` over all ordered pairs (the `i = j` terms are zero).
fn within_sum<T: Scalar>(points: &Matrix<T>) -> T {
    let mut upper = T::zero();
    for i in 0..points.rows() {
        for j in i + 1..points.rows() {
            upper = upper + distance(points.row(i), points.row(j));
        }
    }
    T::of(2.0) * upper
}

/// Which statistic to evaluate on a two-sample problem.
#[derive(Clone, Debug, PartialEq)]
pub enum StatisticSpec {
    /// Hard ranks from the exact plan.
    Rank,
    /// Soft ranks from an entropic plan.
    SoftRank(SinkhornConfig),
}

impl StatisticSpec {
    /// `Rank` for `epsilon == 0`, otherwise `SoftRank` with default solver settings.
    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        if epsilon == 0.0 {
            Ok(Self::Rank)
        } else {
            let cfg = SinkhornConfig::new(epsilon);
            cfg.validate()?;
            Ok(Self::SoftRank(cfg))
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Self::Rank => 0.0,
            Self::SoftRank(cfg) => cfg.epsilon,
        }
    }

    pub fn ranks<T: Scalar>(&self, sample: &TwoSample<T>, grid: &HaltonGrid<T>) -> Result<RankSet<T>> {
        match self {
            Self::Rank => hard_ranks(sample, grid),
            Self::SoftRank(cfg) => soft_ranks(sample, grid, cfg),
        }
    }

    pub fn evaluate<T: Scalar>(&self, sample: &TwoSample<T>, grid: &HaltonGrid<T>) -> Result<StatisticValue> {
        energy_statistic(&self.ranks(sample, grid)?)
    }
}

/// Rank energy against the default `m + n` point Halton grid.
pub fn rank_energy<T: Scalar>(sample: &TwoSample<T>) -> Result<StatisticValue> {
    energy_statistic(&hard_ranks(sample, &sample.default_grid()?)?)
}

/// Soft rank energy against the default `m + n` point Halton grid.
pub fn soft_rank_energy<T: Scalar>(sample: &TwoSample<T>, config: &SinkhornConfig) -> Result<StatisticValue> {
    energy_statistic(&soft_ranks(sample, &sample.default_grid()?, config)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn col(values: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    fn gaussian(rows: usize, dim: usize, shift: f64, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, dim, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z + shift
        })
    }

    fn vdc4() -> HaltonGrid<f64> {
        HaltonGrid::generate(4, 1).unwrap()
    }

    #[test]
    fn worked_one_dimensional_ranks() {
        let s = TwoSample::new(col(&[1.0, 2.0]), col(&[3.0, 4.0])).unwrap();
        let r = hard_ranks(&s, &vdc4()).unwrap();
        assert_eq!(r.x_ranks.as_slice(), &[0.125, 0.25]);
        assert_eq!(r.y_ranks.as_slice(), &[0.5, 0.75]);
        let e = energy_statistic(&r).unwrap();
        assert_eq!(e.raw, 0.6875);
        assert_eq!(e.scaled, 0.6875);
        assert_eq!(e.kind, StatisticKind::RankEnergy);
    }

    #[test]
    fn two_point_ranks() {
        let s = TwoSample::new(col(&[5.0]), col(&[7.0])).unwrap();
        let grid = HaltonGrid::from_points(col(&[0.5, 0.25])).unwrap();
        let r = hard_ranks(&s, &grid).unwrap();
        assert_eq!(r.x_ranks.as_slice(), &[0.25]);
        assert_eq!(r.y_ranks.as_slice(), &[0.5]);
        // m = n = 1: the within terms vanish and raw = 2 |Rx - Ry|.
        assert_eq!(energy_statistic(&r).unwrap().raw, 0.5);
    }

    #[test]
    fn hard_ranks_permute_the_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = TwoSample::new(gaussian(7, 2, 0.0, &mut rng), gaussian(5, 2, 1.0, &mut rng)).unwrap();
        let grid = s.default_grid().unwrap();
        let r = hard_ranks(&s, &grid).unwrap();
        let key = |m: &Matrix<f64>| {
            let mut v: Vec<Vec<u64>> = m.iter_rows().map(|p| p.iter().map(|x| x.to_bits()).collect()).collect();
            v.sort();
            v
        };
        assert_eq!(key(&r.x_ranks.vstack(&r.y_ranks).unwrap()), key(grid.points()));
    }

    #[test]
    fn identical_rank_lists_give_zero() {
        let pts = Matrix::from_rows(&[[0.1, 0.2], [0.7, 0.4], [0.3, 0.9]]).unwrap();
        let r = RankSet { x_ranks: pts.clone(), y_ranks: pts, kind: RankKind::Soft, epsilon: 1.0, marginal_violation: 0.0 };
        assert!(energy_statistic(&r).unwrap().raw.abs() < 1e-15);
    }

    #[test]
    fn swapping_samples_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = TwoSample::new(gaussian(9, 3, 0.0, &mut rng), gaussian(6, 3, 0.5, &mut rng)).unwrap();
        let a = rank_energy(&s).unwrap();
        let b = rank_energy(&s.swapped()).unwrap();
        assert_eq!(a.raw.to_bits(), b.raw.to_bits());
        let cfg = SinkhornConfig::new(0.1);
        let a = soft_rank_energy(&s, &cfg).unwrap();
        let b = soft_rank_energy(&s.swapped(), &cfg).unwrap();
        assert!((a.raw - b.raw).abs() < 1e-9);
    }

    #[test]
    fn soft_ranks_collapse_at_huge_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = TwoSample::new(gaussian(10, 2, 0.0, &mut rng).map(|v| v * 0.2 + 0.5), gaussian(10, 2, 0.0, &mut rng).map(|v| v * 0.2 + 0.5))
            .unwrap();
        let grid = s.default_grid().unwrap();
        let centroid = grid.centroid();
        let cfg = SinkhornConfig::new(1e6).normalize_cost(true);
        let r = soft_ranks(&s, &grid, &cfg).unwrap();
        for p in r.x_ranks.iter_rows().chain(r.y_ranks.iter_rows()) {
            for (a, b) in p.iter().zip(&centroid) {
                assert!((a - b).abs() < 1e-3);
            }
        }
        assert!(energy_statistic(&r).unwrap().raw <= 1e-6);
    }

    #[test]
    fn soft_ranks_stay_in_grid_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = TwoSample::new(gaussian(8, 3, 0.0, &mut rng), gaussian(8, 3, 2.0, &mut rng)).unwrap();
        let grid = s.default_grid().unwrap();
        let bounds = grid.bounds();
        for eps in [0.01, 1.0, 50.0] {
            let r = soft_ranks(&s, &grid, &SinkhornConfig::new(eps)).unwrap();
            for p in r.x_ranks.iter_rows().chain(r.y_ranks.iter_rows()) {
                for (&v, &(lo, hi)) in p.iter().zip(&bounds) {
                    assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn soft_ranks_near_hard_at_small_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = TwoSample::new(gaussian(12, 3, 0.0, &mut rng), gaussian(12, 3, 0.7, &mut rng)).unwrap();
        let grid = s.default_grid().unwrap();
        let hard = hard_ranks(&s, &grid).unwrap();
        let soft = soft_ranks(&s, &grid, &SinkhornConfig::new(1e-4).normalize_cost(true)).unwrap();
        for (a, b) in hard.x_ranks.as_slice().iter().zip(soft.x_ranks.as_slice()) {
            assert!((a - b).abs() <= 1e-2);
        }
        for (a, b) in hard.y_ranks.as_slice().iter().zip(soft.y_ranks.as_slice()) {
            assert!((a - b).abs() <= 1e-2);
        }
    }

    #[test]
    fn duplicated_samples_have_zero_soft_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs = gaussian(15, 3, 0.0, &mut rng);
        let s = TwoSample::new(xs.clone(), xs).unwrap();
        let v = soft_rank_energy(&s, &SinkhornConfig::new(0.5)).unwrap();
        assert!(v.raw.abs() <= 1e-10, "{}", v.raw);
    }

    #[test]
    fn single_points_each_side() {
        let s = TwoSample::new(Matrix::from_rows(&[[0.0, 1.0]]).unwrap(), Matrix::from_rows(&[[2.0, -1.0]]).unwrap()).unwrap();
        let grid = s.default_grid().unwrap();
        let r = hard_ranks(&s, &grid).unwrap();
        let v = energy_statistic(&r).unwrap();
        assert_eq!(v.raw, 2.0 * distance(r.x_ranks.row(0), r.y_ranks.row(0)));
        assert!(v.raw >= 0.0);
        assert_eq!(v.scaled, v.raw * 0.5);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let s = TwoSample::new(col(&[1.0]), col(&[2.0])).unwrap();
        assert!(matches!(hard_ranks(&s, &vdc4()), Err(Error::CountMismatch { .. })));
        assert!(TwoSample::new(col(&[1.0]), Matrix::<f64>::zeros(0, 1)).is_err());
        assert!(TwoSample::new(col(&[1.0]), Matrix::<f64>::zeros(1, 2)).is_err());
    }

    #[test]
    fn empty_rank_set_rejected() {
        let r = RankSet {
            x_ranks: Matrix::<f64>::zeros(0, 1),
            y_ranks: col(&[0.5]),
            kind: RankKind::Hard,
            epsilon: 0.0,
            marginal_violation: 0.0,
        };
        assert!(matches!(energy_statistic(&r), Err(Error::Empty(_))));
    }

    #[test]
    fn spec_from_epsilon() {
        assert_eq!(StatisticSpec::from_epsilon(0.0).unwrap(), StatisticSpec::Rank);
        assert_eq!(StatisticSpec::from_epsilon(2.0).unwrap().epsilon(), 2.0);
        assert!(StatisticSpec::from_epsilon(-1.0).is_err());
    }

    #[test]
    fn single_precision_statistic() {
        let s = TwoSample::new(Matrix::from_vec(2, 1, vec![1.0f32, 2.0]).unwrap(), Matrix::from_vec(2, 1, vec![3.0f32, 4.0]).unwrap())
            .unwrap();
        assert_eq!(rank_energy(&s).unwrap().raw, 0.6875);
    }
}
