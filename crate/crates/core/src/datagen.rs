//! Synthetic segment-wise Gaussian series and CSV ingestion.
//!
//! Segment `k` of a generated series draws from its own ChaCha8 stream
//! (`seed`, stream `k`), so editing one segment leaves the draws of the
//! others untouched. Normals come from `rand_distr`'s ziggurat sampler, which
//! is deterministic across platforms for a given generator.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detector::TimeSeries;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::GroundTruth;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Gaussian,
    Zeros,
}

/// `length` i.i.d. draws from `N(mean, covariance_scale * I)`, or zero rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub length: usize,
    pub mean: Vec<f64>,
    pub covariance_scale: f64,
    pub kind: SegmentKind,
}

impl SegmentSpec {
    pub fn gaussian(length: usize, mean: Vec<f64>, covariance_scale: f64) -> Self {
        Self { length, mean, covariance_scale, kind: SegmentKind::Gaussian }
    }

    pub fn zeros(length: usize, dim: usize) -> Self {
        Self { length, mean: vec![0.0; dim], covariance_scale: 0.0, kind: SegmentKind::Zeros }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSeries<T> {
    pub series: TimeSeries<T>,
    pub truth: GroundTruth,
    pub seed: u64,
}

/// Concatenates the segments; the truth holds the start index of every
/// segment after the first.
pub fn generate_segments<T: Scalar>(specs: &[SegmentSpec], seed: u64) -> Result<LabeledSeries<T>> {
    let first = specs.first().ok_or_else(|| Error::Empty("no segments".into()))?;
    let dim = first.dim();
    if dim == 0 {
        return Err(Error::InvalidArgument("segments need dimension >= 1".into()));
    }
    let total: usize = specs.iter().map(|s| s.length).sum();
    let mut data = Vec::with_capacity(total * dim);
    let mut boundaries = Vec::with_capacity(specs.len() - 1);
    for (k, spec) in specs.iter().enumerate() {
        if spec.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: spec.dim(), context: format!("segment {k}") });
        }
        if spec.length == 0 {
            return Err(Error::InvalidArgument(format!("segment {k} has length 0")));
        }
        if !(spec.covariance_scale >= 0.0 && spec.covariance_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("segment {k} has covariance scale {}", spec.covariance_scale)));
        }
        if k > 0 {
            boundaries.push(data.len() / dim);
        }
        match spec.kind {
            SegmentKind::Zeros => data.extend(std::iter::repeat_n(T::zero(), spec.length * dim)),
            SegmentKind::Gaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let sd = spec.covariance_scale.sqrt();
                for _ in 0..spec.length {
                    for &mu in &spec.mean {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        data.push(T::of(mu + sd * z));
                    }
                }
            }
        }
    }
    let series = TimeSeries::new(Matrix::from_vec(total, dim, data)?)?;
    let truth = GroundTruth::new(boundaries, Some(total))?;
    Ok(LabeledSeries { series, truth, seed })
}

/// Means and covariance scales of the five Gaussian segments of the toy
/// benchmark, in order, in `d = 3`.
pub const FIG1_GAUSSIANS: [([f64; 3], f64); 5] = [
    ([0.0, 0.0, 0.0], 0.001),
    ([2.0, 2.0, 2.0], 1.0),
    ([0.0, 0.0, 0.0], 4.0),
    ([-2.0, -2.0, -2.0], 0.25),
    ([0.0, 0.0, 0.0], 0.001),
];

/// Zero baseline, five Gaussian segments, zero baseline; all of
/// `segment_length`. The first and last Gaussians have tiny covariance and
/// differ from the adjacent baselines only in spread.
pub fn fig1_segments(segment_length: usize) -> Vec<SegmentSpec> {
    let mut specs = vec![SegmentSpec::zeros(segment_length, 3)];
    specs.extend(FIG1_GAUSSIANS.iter().map(|(mean, scale)| SegmentSpec::gaussian(segment_length, mean.to_vec(), *scale)));
    specs.push(SegmentSpec::zeros(segment_length, 3));
    specs
}

pub fn fig1_preset<T: Scalar>(segment_length: usize, seed: u64) -> Result<LabeledSeries<T>> {
    generate_segments(&fig1_segments(segment_length), seed)
}

/// Reads a comma-separated series, one observation per row. Rows and
/// columns in errors are 1-based and count the header line when present.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, has_header: bool) -> Result<TimeSeries<T>> {
    let file = File::open(path.as_ref())?;
    read_csv(file, has_header)
}

pub fn read_csv<T: Scalar, R: std::io::Read>(reader: R, has_header: bool) -> Result<TimeSeries<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(has_header).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut data = Vec::new();
    let mut dim = None;
    let offset = usize::from(has_header) + 1;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + offset;
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(Error::Parse {
                    row,
                    col: record.len().min(d) + 1,
                    message: format!("expected {d} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: j + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, col: j + 1, message: format!("non-finite value {cell:?}") });
            }
            data.push(T::of(v));
        }
    }
    let dim = dim.ok_or_else(|| Error::Empty("no observations in CSV input".into()))?;
    let rows = data.len() / dim.max(1);
    TimeSeries::new(Matrix::from_vec(rows, dim, data)?)
}

/// Writes one observation per row with shortest round-trip float formatting.
pub fn write_csv<T: Scalar>(path: impl AsRef<Path>, series: &TimeSeries<T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(BufWriter::new(File::create(path.as_ref())?));
    for row in series.values().iter_rows() {
        w.write_record(row.iter().map(|v| v.widen().to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one nonnegative integer per line; blank lines are skipped.
pub fn load_labels(path: impl AsRef<Path>) -> Result<GroundTruth> {
    read_labels(File::open(path.as_ref())?)
}

pub fn read_labels<R: std::io::Read>(reader: R) -> Result<GroundTruth> {
    let mut points = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        let v: usize = cell.parse().map_err(|_| Error::Parse {
            row: i + 1,
            col: 1,
            message: format!("not a nonnegative integer: {cell:?}"),
        })?;
        points.push(v);
    }
    GroundTruth::new(points, None)
}

pub fn write_labels(path: impl AsRef<Path>, truth: &GroundTruth) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for t in &truth.change_points {
        writeln!(w, "{t}")?;
    }
    w.flush()?;
    Ok(())
}
