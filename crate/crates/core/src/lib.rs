//! Multivariate rank statistics from optimal transport and their use for
//! offline change-point detection.
//!
//! Pooled two-sample data is transported onto a Halton grid in the unit
//! cube. The exact plan gives hard ranks and the rank energy (RE); an
//! entropic plan gives soft ranks and the soft rank energy (sRE). The
//! [`detector`] slides a pair of windows over a series and declares change
//! points at thresholded local maxima of the statistic.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for the common case.
//!
//! ```
//! use softrank::{rank_energy, Matrix, TwoSample};
//!
//! let xs = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
//! let ys = Matrix::from_rows(&[[3.0], [4.0]]).unwrap();
//! let value = rank_energy(&TwoSample::new(xs, ys).unwrap()).unwrap();
//! assert_eq!(value.raw, 0.6875);
//! ```

// `!(x > 0)` is used on purpose so that NaN is rejected with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod detector;
pub mod error;
pub mod halton;
pub mod matrix;
pub mod metrics;
pub mod ot;
pub mod ranks;
pub mod scalar;

pub use detector::{detect_peaks, scan, zero_pad, DetectorConfig, Detections, StatisticTrace, TimeSeries};
pub use error::{Error, Result};
pub use halton::HaltonGrid;
pub use matrix::Matrix;
pub use metrics::{cp_auc, f1_score, match_detections, EvalReport, GroundTruth};
pub use ot::{SinkhornConfig, TransportPlan};
pub use ranks::{rank_energy, soft_rank_energy, RankSet, StatisticValue, TwoSample};
pub use scalar::Scalar;

pub type MatrixF64 = Matrix<f64>;
pub type MatrixF32 = Matrix<f32>;
pub type HaltonGridF64 = HaltonGrid<f64>;
pub type HaltonGridF32 = HaltonGrid<f32>;
pub type TransportPlanF64 = TransportPlan<f64>;
pub type TransportPlanF32 = TransportPlan<f32>;
pub type RankSetF64 = RankSet<f64>;
pub type RankSetF32 = RankSet<f32>;
pub type TwoSampleF64 = TwoSample<f64>;
pub type TwoSampleF32 = TwoSample<f32>;
pub type TimeSeriesF64 = TimeSeries<f64>;
pub type TimeSeriesF32 = TimeSeries<f32>;
