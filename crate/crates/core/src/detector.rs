//! Sliding-window change-point detection.
//!
//! At each evaluated index `t` the left window `X[t] = Z[t-n .. t-1]` is
//! compared with the right window `Y[t] = Z[t .. t+n-1]` (so `Z[t]` belongs to
//! the right window) using the rank energy (`epsilon == 0`) or the soft rank
//! energy. Evaluated indices run from `n` to `T - n` in steps of `stride`; all
//! windows are ranked against one Halton grid of `2n` points.
//!
//! A change point is declared at `t` when `sigma(t) > eta` and `sigma(t)` is
//! the largest value among evaluated indices within `delta` of `t`. Exactly
//! equal values inside one neighborhood go to the earliest index.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halton::HaltonGrid;
use crate::matrix::Matrix;
use crate::ot::{SinkhornConfig, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE};
use crate::ranks::{StatisticSpec, StatisticValue, TwoSample};
use crate::scalar::Scalar;

/// `T x d` observations in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries<T> {
    values: Matrix<T>,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn new(values: Matrix<T>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::Empty("time series needs at least one observation of dimension >= 1".into()));
        }
        for (i, row) in values.iter_rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn into_values(self) -> Matrix<T> {
        self.values
    }

    /// Observations `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Matrix<T> {
        self.values.slice_rows(start, end)
    }

    /// The left and right windows around `t`.
    pub fn window_pair(&self, t: usize, window: usize) -> Result<TwoSample<T>> {
        if t < window || t + window > self.len() {
            return Err(Error::InvalidArgument(format!(
                "windows of {window} around t = {t} do not fit a series of length {}",
                self.len()
            )));
        }
        TwoSample::new(self.slice(t - window, t), self.slice(t, t + window))
    }
}

/// A zero-padded series; indices in `series` are original indices plus `shift`.
#[derive(Clone, Debug, PartialEq)]
pub struct Padded<T> {
    pub series: TimeSeries<T>,
    pub shift: usize,
}

impl<T: Scalar> Padded<T> {
    /// Drops the padding rows again.
    pub fn unpadded(&self) -> TimeSeries<T> {
        let end = self.series.len() - self.shift;
        TimeSeries { values: self.series.slice(self.shift, end) }
    }
}

/// Prepends and appends `pad` all-zero rows.
pub fn zero_pad<T: Scalar>(series: &TimeSeries<T>, pad: usize) -> Result<Padded<T>> {
    if pad == 0 {
        return Err(Error::InvalidArgument("pad must be at least 1".into()));
    }
    let zeros = Matrix::zeros(pad, series.dim());
    let values = zeros.vstack(series.values())?.vstack(&zeros)?;
    Ok(Padded { series: TimeSeries { values }, shift: pad })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Window size `n`; each window pair pools `2n` observations.
    pub window: usize,
    /// `0` selects the rank energy, a positive value the soft rank energy.
    pub epsilon: f64,
    /// Detection range: half-width of the local-maximum neighborhood.
    pub delta: usize,
    /// Threshold; serialized as `null` when infinite.
    pub eta: f64,
    /// Threshold the `mn/(m+n)`-scaled statistic instead of the raw one.
    pub use_scaled: bool,
    pub stride: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub normalize_cost: bool,
}

impl DetectorConfig {
    pub fn new(window: usize, epsilon: f64, delta: usize, eta: f64) -> Self {
        Self {
            window,
            epsilon,
            delta,
            eta,
            use_scaled: false,
            stride: 1,
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
            normalize_cost: false,
        }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn use_scaled(mut self, on: bool) -> Self {
        self.use_scaled = on;
        self
    }

    pub fn eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidArgument("window must be at least 1".into()));
        }
        if self.delta == 0 {
            return Err(Error::InvalidArgument("delta must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if self.eta.is_nan() {
            return Err(Error::InvalidArgument("eta must not be NaN".into()));
        }
        self.statistic().map(|_| ())
    }

    /// The two-sample statistic evaluated at each window pair.
    pub fn statistic(&self) -> Result<StatisticSpec> {
        if self.epsilon == 0.0 {
            return Ok(StatisticSpec::Rank);
        }
        let cfg = SinkhornConfig::new(self.epsilon)
            .max_iters(self.max_iters)
            .tolerance(self.tolerance)
            .normalize_cost(self.normalize_cost);
        cfg.validate()?;
        Ok(StatisticSpec::SoftRank(cfg))
    }

    fn pick(&self, value: &StatisticValue) -> f64 {
        if self.use_scaled {
            value.scaled
        } else {
            value.raw
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticTrace {
    pub times: Vec<usize>,
    pub values: Vec<f64>,
    pub config: DetectorConfig,
}

impl StatisticTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Moves every time index by `-shift`, e.g. back to unpadded coordinates.
    /// Indices that would become negative are dropped.
    pub fn unshifted(&self, shift: usize) -> Self {
        let (times, values) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(&t, _)| t >= shift)
            .map(|(&t, &v)| (t - shift, v))
            .unzip();
        Self { times, values, config: self.config.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detections {
    pub change_points: Vec<usize>,
}

impl Detections {
    /// Moves every index by `-shift`, dropping those that would be negative.
    pub fn unshifted(&self, shift: usize) -> Self {
        Self { change_points: self.change_points.iter().filter(|&&t| t >= shift).map(|&t| t - shift).collect() }
    }
}

/// Evaluates the statistic at every window position. Positions are
/// evaluated in parallel on the current rayon pool; the trace is assembled
/// in time order and does not depend on the number of threads.
pub fn scan<T: Scalar>(series: &TimeSeries<T>, config: &DetectorConfig) -> Result<StatisticTrace> {
    config.validate()?;
    let n = config.window;
    let len = series.len();
    if len < 2 * n {
        return Err(Error::SeriesTooShort { length: len, window: n });
    }
    let statistic = config.statistic()?;
    let grid = HaltonGrid::generate(2 * n, series.dim())?;
    let times: Vec<usize> = (n..=len - n).step_by(config.stride).collect();
    let values = times
        .par_iter()
        .map(|&t| {
            let sample = series.window_pair(t, n)?;
            let value = statistic.evaluate(&sample, &grid)?;
            Ok(config.pick(&value))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(StatisticTrace { times, values, config: config.clone() })
}

/// Change points of `trace` under its own configuration's `eta` and `delta`.
pub fn detect_peaks(trace: &StatisticTrace) -> Detections {
    detect_peaks_with(trace, trace.config.eta, trace.config.delta)
}

/// Indices whose value exceeds `eta` and is the earliest maximum within
/// `delta` of itself.
pub fn detect_peaks_with(trace: &StatisticTrace, eta: f64, delta: usize) -> Detections {
    let change_points = local_maxima(&trace.times, &trace.values, delta)
        .into_iter()
        .filter(|&k| trace.values[k] > eta)
        .map(|k| trace.times[k])
        .collect();
    Detections { change_points }
}

/// Positions `k` (into `times`) that are the earliest maximum of their
/// `delta` neighborhood.
pub(crate) fn local_maxima(times: &[usize], values: &[f64], delta: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut lo = 0;
    for k in 0..times.len() {
        while times[k] - times[lo] > delta {
            lo += 1;
        }
        let v = values[k];
        let earlier_ok = values[lo..k].iter().all(|&w| w < v);
        let later_ok = values[k + 1..]
            .iter()
            .zip(&times[k + 1..])
            .take_while(|(_, &s)| s - times[k] <= delta)
            .all(|(&w, _)| w <= v);
        if earlier_ok && later_ok {
            out.push(k);
        }
    }
    out
}

/// Threshold from a permutation null: the pooled `2n` observations of the
/// window pair at `t` are shuffled `permutations` times and split into two
/// halves; returns the empirical `level` quantile (nearest rank) of the
/// statistic over the shuffles.
///
/// Each shuffle uses its own ChaCha8 stream of `seed`, so the result does not
/// depend on the number of threads.
pub fn calibrate_null<T: Scalar>(
    pool: &Matrix<T>,
    config: &DetectorConfig,
    permutations: usize,
    level: f64,
    seed: u64,
) -> Result<f64> {
    config.validate()?;
    if permutations == 0 {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level must be in (0, 1], got {level}")));
    }
    let size = pool.rows();
    if size < 2 {
        return Err(Error::Empty("null pool needs at least two observations".into()));
    }
    let half = size / 2;
    let statistic = config.statistic()?;
    let grid = HaltonGrid::generate(size, pool.cols())?;
    let mut values = (0..permutations)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut order: Vec<usize> = (0..size).collect();
            order.shuffle(&mut rng);
            let sample = TwoSample::new(pool.select_rows(&order[..half]), pool.select_rows(&order[half..]))?;
            Ok(config.pick(&statistic.evaluate(&sample, &grid)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    let rank = ((level * permutations as f64).ceil() as usize).clamp(1, permutations);
    Ok(values[rank - 1])
}

/// [`calibrate_null`] on the first window pair of `series`.
pub fn calibrate_first_window<T: Scalar>(
    series: &TimeSeries<T>,
    config: &DetectorConfig,
    permutations: usize,
    level: f64,
    seed: u64,
) -> Result<f64> {
    let n = config.window;
    if series.len() < 2 * n {
        return Err(Error::SeriesTooShort { length: series.len(), window: n });
    }
    calibrate_null(&series.slice(0, 2 * n), config, permutations, level, seed)
}
