use std::time::Instant;

use serde::Serialize;

/// Reproducibility record embedded in every JSON output.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub version: &'static str,
    /// Wall-clock time of the command up to writing its outputs.
    pub duration_seconds: f64,
}

pub struct Stopwatch {
    command: &'static str,
    started: Instant,
}

impl Stopwatch {
    pub fn start(command: &'static str) -> Self {
        Self { command, started: Instant::now() }
    }

    pub fn manifest(&self, config: serde_json::Value, inputs: Vec<String>, seed: Option<u64>) -> Manifest {
        Manifest {
            command: self.command,
            config,
            inputs,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}
