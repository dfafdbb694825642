use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use softrank::datagen::{self, SegmentSpec};
use softrank::detector::{self, DetectorConfig, Detections, StatisticTrace};
use softrank::metrics::{self, EvalReport};
use softrank::ranks::{StatisticSpec, StatisticValue};
use softrank::{HaltonGrid, Matrix, TimeSeries, TwoSample};

use crate::manifest::{Manifest, Stopwatch};
use crate::{DetectArgs, EvaluateArgs, SimulateArgs, SolverArgs, StatArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    fn data(path: impl AsRef<Path>, err: impl ToString) -> Self {
        CliError::Data { path: display(path), message: err.to_string() }
    }

    /// Sorts a library error into I/O versus data.
    fn from_lib(path: impl AsRef<Path>, err: softrank::Error) -> Self {
        match err {
            softrank::Error::Io(source) => CliError::Io { path: display(path), source },
            other => CliError::data(path, other),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn display(path: impl AsRef<Path>) -> String {
    path.as_ref().display().to_string()
}

fn io<T>(path: impl AsRef<Path>, r: std::io::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::Io { path: display(path), source })
}

fn read_series(path: &Path, header: bool) -> CliResult<TimeSeries<f64>> {
    datagen::load_csv(path, header).map_err(|e| CliError::from_lib(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("output types serialize");
    io(path, fs::write(path, text + "\n"))
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("output types serialize"));
}

fn statistic(solver: &SolverArgs) -> CliResult<StatisticSpec> {
    let mut cfg = DetectorConfig::new(1, solver.epsilon, 1, 0.0);
    cfg.max_iters = solver.max_iters;
    cfg.tolerance = solver.tolerance;
    cfg.normalize_cost = solver.normalize_cost;
    cfg.statistic().map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    series: String,
    labels: String,
    length: usize,
    change_points: &'a [usize],
    manifest: Manifest,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let clock = Stopwatch::start("simulate");
    let (specs, inputs) = match &args.spec {
        Some(path) => {
            let text = io(path, fs::read_to_string(path))?;
            let specs: Vec<SegmentSpec> = serde_json::from_str(&text).map_err(|e| CliError::data(path, e))?;
            (specs, vec![display(path)])
        }
        None => (datagen::fig1_segments(args.segment_length), Vec::new()),
    };
    if args.spec.is_none() && args.segment_length == 0 {
        return Err(CliError::Usage("--segment-length must be at least 1".into()));
    }
    let labeled = datagen::generate_segments::<f64>(&specs, args.seed).map_err(|e| match &args.spec {
        Some(path) => CliError::from_lib(path, e),
        None => CliError::Usage(e.to_string()),
    })?;

    io(&args.out, fs::create_dir_all(&args.out))?;
    let series_path = args.out.join("series.csv");
    let labels_path = args.out.join("labels.txt");
    datagen::write_csv(&series_path, &labeled.series).map_err(|e| CliError::from_lib(&series_path, e))?;
    datagen::write_labels(&labels_path, &labeled.truth).map_err(|e| CliError::from_lib(&labels_path, e))?;

    let config = json!({
        "preset": args.preset,
        "segment_length": args.spec.is_none().then_some(args.segment_length),
        "segments": specs,
    });
    let output = SimulateOutput {
        series: display(&series_path),
        labels: display(&labels_path),
        length: labeled.series.len(),
        change_points: &labeled.truth.change_points,
        manifest: clock.manifest(config, inputs, Some(args.seed)),
    };
    write_json(&args.out.join("manifest.json"), &output)?;
    print_json(&output);
    Ok(())
}

#[derive(Serialize)]
struct StatOutput {
    #[serde(flatten)]
    value: StatisticValue,
    manifest: Manifest,
}

pub fn stat(args: &StatArgs) -> CliResult<()> {
    let clock = Stopwatch::start("stat");
    let spec = statistic(&args.solver)?;
    let xs = read_series(&args.x, args.header)?.into_values();
    let ys = read_series(&args.y, args.header)?.into_values();
    let sample = TwoSample::new(xs, ys).map_err(|e| CliError::data(&args.y, e))?;
    let mut inputs = vec![display(&args.x), display(&args.y)];
    let grid = match &args.grid {
        Some(path) => {
            inputs.push(display(path));
            let points = read_series(path, args.header)?.into_values();
            HaltonGrid::from_points(points).map_err(|e| CliError::data(path, e))?
        }
        None => sample.default_grid().map_err(|e| CliError::data(&args.x, e))?,
    };
    let value = spec.evaluate(&sample, &grid).map_err(|e| CliError::data(&args.x, e))?;
    let config = json!({
        "epsilon": args.solver.epsilon,
        "max_iters": args.solver.max_iters,
        "tolerance": args.solver.tolerance,
        "normalize_cost": args.solver.normalize_cost,
        "custom_grid": args.grid.is_some(),
    });
    print_json(&StatOutput { value, manifest: clock.manifest(config, inputs, None) });
    Ok(())
}

#[derive(Serialize)]
struct DetectOutput {
    change_points: Vec<usize>,
    /// `null` when infinite.
    eta: f64,
    trace: String,
    manifest: Manifest,
}

pub fn detect(args: &DetectArgs) -> CliResult<()> {
    let clock = Stopwatch::start("detect");
    let mut config = DetectorConfig::new(args.window, args.solver.epsilon, args.delta, args.eta.unwrap_or(0.0))
        .stride(args.stride)
        .use_scaled(args.scaled);
    config.max_iters = args.solver.max_iters;
    config.tolerance = args.solver.tolerance;
    config.normalize_cost = args.solver.normalize_cost;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.pad == Some(0) {
        return Err(CliError::Usage("--pad must be at least 1".into()));
    }
    if !(args.null_level > 0.0 && args.null_level <= 1.0) {
        return Err(CliError::Usage("--null-level must be in (0, 1]".into()));
    }

    let original = read_series(&args.series, args.header)?;
    let padded = match args.pad {
        Some(pad) => Some(detector::zero_pad(&original, pad).map_err(|e| CliError::Usage(e.to_string()))?),
        None => None,
    };
    let (scanned, shift) = match &padded {
        Some(p) => (&p.series, p.shift),
        None => (&original, 0),
    };

    if let Some(k) = args.calibrate_null {
        // The first window pair of the data itself; padding rows would make
        // the null degenerate.
        let source = if original.len() >= 2 * args.window { &original } else { scanned };
        let pool = source.slice(0, (2 * args.window).min(source.len()));
        warn_if_degenerate(&pool);
        config.eta = detector::calibrate_null(&pool, &config, k, args.null_level, args.seed)
            .map_err(|e| CliError::data(&args.series, e))?;
        log::info!("calibrated eta = {}", config.eta);
    }

    let trace = detector::scan(scanned, &config).map_err(|e| CliError::data(&args.series, e))?;
    let detections = detector::detect_peaks(&trace).unshifted(shift);
    let trace = trace.unshifted(shift);

    io(&args.out, fs::create_dir_all(&args.out))?;
    let trace_path = args.out.join("trace.csv");
    write_trace(&trace_path, &trace)?;
    let run_config = json!({
        "detector": config,
        "pad": args.pad,
        "calibrate_null": args.calibrate_null,
        "null_level": args.calibrate_null.map(|_| args.null_level),
        "header": args.header,
    });
    let output = DetectOutput {
        change_points: detections.change_points,
        eta: config.eta,
        trace: display(&trace_path),
        manifest: clock.manifest(run_config, vec![display(&args.series)], args.calibrate_null.map(|_| args.seed)),
    };
    write_json(&args.out.join("detections.json"), &output)?;
    print_json(&output);
    Ok(())
}

fn warn_if_degenerate(pool: &Matrix<f64>) {
    let mut rows: Vec<&[f64]> = pool.iter_rows().collect();
    rows.sort_by(|a, b| a.iter().zip(*b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    rows.dedup();
    if 2 * rows.len() < pool.rows() {
        log::warn!(
            "null calibration pool has only {} distinct rows out of {}; the calibrated threshold may be degenerate",
            rows.len(),
            pool.rows()
        );
    }
}

fn write_trace(path: &Path, trace: &StatisticTrace) -> CliResult<()> {
    let mut text = String::from("t,sigma\n");
    for (t, v) in trace.times.iter().zip(&trace.values) {
        text.push_str(&format!("{t},{v}\n"));
    }
    io(path, fs::write(path, text))
}

fn read_trace(path: &Path) -> CliResult<(Vec<usize>, Vec<f64>)> {
    let text = io(path, fs::read_to_string(path))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(t, v)| Some((t.trim().parse().ok()?, v.trim().parse().ok()?)));
        let (t, v): (usize, f64) = parsed.ok_or_else(|| CliError::data(path, format!("line {}: expected `t,sigma`", i + 1)))?;
        if times.last().is_some_and(|&last| t <= last) {
            return Err(CliError::data(path, format!("line {}: times must increase", i + 1)));
        }
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(CliError::data(path, "empty trace"));
    }
    Ok((times, values))
}

#[derive(Deserialize)]
struct DetectionsFile {
    change_points: Vec<usize>,
}

#[derive(Serialize)]
struct EvaluateOutput {
    #[serde(flatten)]
    report: EvalReport,
    manifest: Manifest,
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let clock = Stopwatch::start("evaluate");
    let margin = args
        .margin
        .or(args.delta)
        .ok_or_else(|| CliError::Usage("give --margin or --delta".into()))?;
    if margin == 0 {
        return Err(CliError::Usage("--margin must be at least 1".into()));
    }
    let truth = datagen::load_labels(&args.labels).map_err(|e| CliError::from_lib(&args.labels, e))?;
    let mut inputs = vec![display(&args.labels)];
    let report = match (&args.trace, &args.detections) {
        (Some(path), _) => {
            let eta = args.eta.ok_or_else(|| CliError::Usage("--eta is required with --trace".into()))?;
            let delta = args.delta.unwrap_or(margin);
            let (times, values) = read_trace(path)?;
            inputs.insert(0, display(path));
            let trace = StatisticTrace { times, values, config: DetectorConfig::new(1, 0.0, delta, eta) };
            metrics::evaluate_trace(&trace, &truth, margin, delta)
        }
        (None, Some(path)) => {
            let text = io(path, fs::read_to_string(path))?;
            let file: DetectionsFile = serde_json::from_str(&text).map_err(|e| CliError::data(path, e))?;
            inputs.insert(0, display(path));
            metrics::f1_score(&Detections { change_points: file.change_points }, &truth, margin)
        }
        (None, None) => return Err(CliError::Usage("give --trace or --detections".into())),
    };
    let config = json!({ "margin": margin, "delta": args.delta, "eta": args.eta });
    print_json(&EvaluateOutput { report, manifest: clock.manifest(config, inputs, None) });
    Ok(())
}
