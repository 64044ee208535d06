//! JSON run reports. `params` holds the effective configuration after all
//! defaulting, so feeding a report back through `--config` replays the run.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rpca_core::{IterationRecord, KktResiduals, SolverConfig, SolverResult};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub params: SolverConfig,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub rank_estimate: usize,
    pub elapsed_seconds: f64,
    pub kkt: KktResiduals,
    pub history: Vec<IterationRecord>,
}

impl RunReport {
    pub fn new(params: SolverConfig, result: &SolverResult) -> Self {
        RunReport {
            params,
            iterations: result.iterations,
            converged: result.converged,
            final_residual: result.final_residual(),
            rank_estimate: result.final_rank(),
            elapsed_seconds: result.elapsed_seconds,
            kkt: result.kkt,
            history: result.history.clone(),
        }
    }
}

/// One solver's line in a `bench` comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub params: SolverConfig,
    pub rank_estimate: usize,
    pub final_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub elapsed_seconds: f64,
    /// Relative error against the generating low-rank part, when known.
    pub low_rank_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: usize,
    pub cols: usize,
    /// Seed of the synthetic instance; absent for user-supplied matrices.
    pub seed: Option<u64>,
    pub true_rank: Option<usize>,
    pub gamma: BenchEntry,
    pub nuclear: BenchEntry,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::output(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|e| CliError::output(path, std::io::Error::other(e)))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::input(path, e.to_string()))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| CliError::input(path, e.to_string()))
}
