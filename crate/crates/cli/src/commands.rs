use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rpca_core::{
    anomaly_scores, detect_anomalies, generate_synthetic, rank_curve, recovery_errors, solve, stack_frames,
    Corruption, LambdaPolicy, DEFAULT_GAMMA, Matrix, RankSurrogate, SolverConfig, SolverResult, SparsePenalty, SyntheticSpec,
};
use serde::{Deserialize, Serialize};

use crate::csv_io::{read_matrix_csv, write_matrix_csv};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};
use crate::pgm::read_pgm;
use crate::report::{read_json, write_json, BenchEntry, BenchReport, RunReport};

#[derive(Debug, Parser)]
#[command(name = "rpca", version, about = "Low-rank plus sparse matrix decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a CSV matrix into low-rank L and sparse S.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Generate a corrupted low-rank instance with its ground truth.
    Synth {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Decompose, then score columns by the norm of their sparse part.
    Anomaly {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Flag columns whose score exceeds this.
        #[arg(long, default_value_t = 1e-6, conflicts_with = "top")]
        threshold: f64,
        /// Flag the `top` highest-scoring columns instead.
        #[arg(long)]
        top: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Sample the scalar rank penalties on a grid, for plotting.
    Curve {
        /// Gamma values; repeat for several curves.
        #[arg(long = "gamma", default_values_t = [0.01])]
        gammas: Vec<f64>,
        /// Add a nuclear-norm column.
        #[arg(long)]
        nuclear: bool,
        /// Add the rank indicator column `[sigma > 0]`.
        #[arg(long)]
        rank: bool,
        #[arg(long, default_value_t = 10.0)]
        max: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        /// Explicit comma-separated grid, overriding --max/--points.
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the gamma-norm solver and a nuclear-norm baseline on one instance.
    Bench {
        /// CSV matrix; a synthetic instance is generated when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        problem: ProblemArgs,
        /// `preset`: the usual inexact-ALM settings for the convex problem;
        /// `same`: the gamma run's parameters with the nuclear norm swapped in.
        #[arg(long, value_enum, default_value_t = Baseline::Preset)]
        baseline: Baseline,
        #[arg(long, default_value = "bench.json")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Stack a directory of same-sized PGM frames into one CSV matrix, one
    /// column-major frame per column, in file-name order.
    Stack {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PenaltyArg {
    L1,
    L21,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SurrogateArg {
    Gamma,
    Nuclear,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Fixed,
    Scale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Preset,
    Same,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CorruptionArg {
    Entrywise,
    Columnwise,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long, value_enum)]
    penalty: Option<PenaltyArg>,
    #[arg(long, value_enum)]
    surrogate: Option<SurrogateArg>,
    #[arg(long, value_enum)]
    lambda_policy: Option<PolicyArg>,
    /// Start from the parameters of an earlier report.json (or a bare
    /// parameter object); explicit flags still override.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Report(Box<RunReport>),
    Params(SolverConfig),
}

impl SolverArgs {
    /// Effective configuration for a `rows x cols` input.
    fn resolve(&self, rows: usize, cols: usize, default_penalty: SparsePenalty) -> CliResult<SolverConfig> {
        let mut cfg = match &self.config {
            Some(path) => match read_json::<ConfigFile>(path)? {
                ConfigFile::Report(r) => r.params,
                ConfigFile::Params(p) => p,
            },
            None => SolverConfig { penalty: default_penalty, ..Default::default() },
        };
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.mu0 {
            cfg.mu0 = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.mu_max {
            cfg.mu_max = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(p) = self.penalty {
            cfg.penalty = match p {
                PenaltyArg::L1 => SparsePenalty::EntrywiseL1,
                PenaltyArg::L21 => SparsePenalty::ColumnwiseL21,
            };
        }
        let current_gamma = match cfg.surrogate {
            RankSurrogate::Gamma { gamma } => gamma,
            RankSurrogate::Nuclear => DEFAULT_GAMMA,
        };
        cfg.surrogate = match (self.surrogate, self.gamma) {
            (Some(SurrogateArg::Nuclear), Some(_)) => {
                return Err(CliError::Usage("--gamma has no effect with --surrogate nuclear".into()))
            }
            (Some(SurrogateArg::Nuclear), None) => RankSurrogate::Nuclear,
            (Some(SurrogateArg::Gamma), g) => RankSurrogate::Gamma { gamma: g.unwrap_or(current_gamma) },
            (None, Some(g)) => RankSurrogate::Gamma { gamma: g },
            (None, None) => cfg.surrogate,
        };
        if let Some(PolicyArg::Scale) = self.lambda_policy {
            if self.lambda.is_some() {
                return Err(CliError::Usage("--lambda conflicts with --lambda-policy scale".into()));
            }
            cfg = cfg.with_lambda_policy(LambdaPolicy::Scale, rows, cols);
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct ProblemArgs {
    #[arg(long, default_value_t = 200)]
    rows: usize,
    #[arg(long, default_value_t = 200)]
    cols: usize,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    /// Fraction of corrupted entries (or columns).
    #[arg(long, default_value_t = 0.05)]
    sparsity: f64,
    #[arg(long, default_value_t = 1.0)]
    magnitude_low: f64,
    #[arg(long, default_value_t = 10.0)]
    magnitude_high: f64,
    #[arg(long, value_enum, default_value_t = CorruptionArg::Entrywise)]
    corruption: CorruptionArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ProblemArgs {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            m: self.rows,
            n: self.cols,
            rank: self.rank,
            sparsity: self.sparsity,
            magnitude_low: self.magnitude_low,
            magnitude_high: self.magnitude_high,
            corruption: match self.corruption {
                CorruptionArg::Entrywise => Corruption::Entrywise,
                CorruptionArg::Columnwise => Corruption::Columnwise,
            },
        }
    }
}

/// Echo written next to a synthetic instance.
#[derive(Serialize)]
struct SynthEcho {
    spec: SyntheticSpec,
    seed: u64,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status. Messages go to stdout, errors to stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Decompose { input, out_dir, solver } => {
            let x = read_matrix_csv(&input)?;
            let cfg = solver.resolve(x.rows(), x.cols(), SparsePenalty::EntrywiseL1)?;
            let result = decompose_to(&x, &cfg, &out_dir)?;
            println!(
                "{} after {} iterations: rank {}, relative residual {:.3e}",
                if result.converged { "converged" } else { "stopped" },
                result.iterations,
                result.final_rank(),
                result.final_residual()
            );
            check_converged(&result, &cfg)
        }
        Command::Synth { problem, out_dir } => {
            let spec = problem.spec();
            let inst = generate_synthetic(&spec, problem.seed)?;
            create_dir(&out_dir)?;
            write_matrix_csv(&out_dir.join("X.csv"), &inst.x)?;
            write_matrix_csv(&out_dir.join("L_star.csv"), &inst.l_star)?;
            write_matrix_csv(&out_dir.join("S_star.csv"), &inst.s_star)?;
            write_json(&out_dir.join("spec.json"), &SynthEcho { spec, seed: problem.seed })?;
            println!("wrote {}x{} instance of rank {} to {}", spec.m, spec.n, spec.rank, out_dir.display());
            Ok(())
        }
        Command::Anomaly { input, out_dir, threshold, top, solver } => {
            let x = read_matrix_csv(&input)?;
            let cfg = solver.resolve(x.rows(), x.cols(), SparsePenalty::ColumnwiseL21)?;
            let result = decompose_to(&x, &cfg, &out_dir)?;
            let scores = anomaly_scores(&result.s);
            let flagged = match top {
                Some(k) => top_indices(&scores, k),
                None => detect_anomalies(&scores, threshold).map_err(|e| CliError::Usage(e.to_string()))?,
            };
            let path = out_dir.join("scores.csv");
            let mut body = String::new();
            for (j, s) in scores.iter().enumerate() {
                body.push_str(&format!("{j},{s:.16e}\n"));
            }
            fs::write(&path, body).map_err(|e| CliError::output(&path, e))?;
            let path = out_dir.join("flagged.csv");
            let body: String = flagged.iter().map(|j| format!("{j}\n")).collect();
            fs::write(&path, body).map_err(|e| CliError::output(&path, e))?;
            println!("flagged {} of {} columns", flagged.len(), scores.len());
            check_converged(&result, &cfg)
        }
        Command::Curve { gammas, nuclear, rank, max, points, sigma, out } => {
            let grid = match sigma {
                Some(g) => g,
                None => {
                    if points < 2 || !(max > 0.0 && max.is_finite()) {
                        return Err(CliError::Usage("need --points >= 2 and a positive --max".into()));
                    }
                    (0..points).map(|i| max * i as f64 / (points - 1) as f64).collect()
                }
            };
            let mut columns = Vec::new();
            let mut header = vec!["sigma".to_string()];
            for g in gammas {
                let s = RankSurrogate::gamma(g).map_err(|e| CliError::Usage(e.to_string()))?;
                columns.push(curve_values(s, &grid)?);
                header.push(format!("gamma={g}"));
            }
            if nuclear {
                columns.push(curve_values(RankSurrogate::Nuclear, &grid)?);
                header.push("nuclear".into());
            }
            if rank {
                columns.push(grid.iter().map(|&s| if s > 0.0 { 1.0 } else { 0.0 }).collect());
                header.push("rank".into());
            }
            let mut text = header.join(",") + "\n";
            for (i, s) in grid.iter().enumerate() {
                text.push_str(&format!("{s:.16e}"));
                for c in &columns {
                    text.push_str(&format!(",{:.16e}", c[i]));
                }
                text.push('\n');
            }
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| CliError::output(&path, e)),
                None => std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::output(Path::new("<stdout>"), e)),
            }
        }
        Command::Bench { input, problem, baseline, out, solver } => {
            let (x, truth, seed) = match &input {
                Some(path) => (read_matrix_csv(path)?, None, None),
                None => {
                    let inst = generate_synthetic(&problem.spec(), problem.seed)?;
                    (inst.x.clone(), Some(inst), Some(problem.seed))
                }
            };
            let cfg = solver.resolve(x.rows(), x.cols(), SparsePenalty::EntrywiseL1)?;
            let base_cfg = match baseline {
                Baseline::Preset => cfg.convex_baseline(&x)?,
                Baseline::Same => cfg.with_nuclear(),
            };
            let entry = |c: SolverConfig| -> CliResult<BenchEntry> {
                let r = solve(&x, &c)?;
                let low_rank_error = match &truth {
                    Some(t) => Some(recovery_errors(&r.l, &t.l_star, &r.s, &t.s_star)?.low_rank),
                    None => None,
                };
                Ok(BenchEntry {
                    params: c,
                    rank_estimate: r.final_rank(),
                    final_residual: r.final_residual(),
                    iterations: r.iterations,
                    converged: r.converged,
                    elapsed_seconds: r.elapsed_seconds,
                    low_rank_error,
                })
            };
            let report = BenchReport {
                rows: x.rows(),
                cols: x.cols(),
                seed,
                true_rank: truth.as_ref().map(|_| problem.rank),
                gamma: entry(cfg)?,
                nuclear: entry(base_cfg)?,
            };
            write_json(&out, &report)?;
            println!("{:<8} {:>5} {:>11} {:>6} {:>9}", "solver", "rank", "residual", "iters", "seconds");
            for (name, e) in [("gamma", &report.gamma), ("nuclear", &report.nuclear)] {
                println!(
                    "{name:<8} {:>5} {:>11.3e} {:>6} {:>9.3}",
                    e.rank_estimate, e.final_residual, e.iterations, e.elapsed_seconds
                );
            }
            Ok(())
        }
        Command::Stack { dir, out } => {
            let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| CliError::input(&dir, e.to_string()))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("pgm")))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(CliError::input(&dir, "no .pgm files"));
            }
            let frames = paths.iter().map(|p| read_pgm(p)).collect::<CliResult<Vec<Matrix>>>()?;
            let stacked = stack_frames(&frames).map_err(|e| CliError::input(&dir, e.to_string()))?;
            write_matrix_csv(&out, &stacked)?;
            let (h, w) = frames[0].shape();
            println!("stacked {} frames of {h}x{w} into a {}x{} matrix", frames.len(), stacked.rows(), stacked.cols());
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

/// Solves and writes `L.csv`, `S.csv` and `report.json` into `out_dir`.
fn decompose_to(x: &Matrix, cfg: &SolverConfig, out_dir: &Path) -> CliResult<SolverResult> {
    let result = solve(x, cfg)?;
    create_dir(out_dir)?;
    write_matrix_csv(&out_dir.join("L.csv"), &result.l)?;
    write_matrix_csv(&out_dir.join("S.csv"), &result.s)?;
    write_json(&out_dir.join("report.json"), &RunReport::new(*cfg, &result))?;
    Ok(result)
}

fn check_converged(result: &SolverResult, cfg: &SolverConfig) -> CliResult<()> {
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged { iterations: result.iterations, residual: result.final_residual(), tol: cfg.tol })
    }
}

fn curve_values(s: RankSurrogate, grid: &[f64]) -> CliResult<Vec<f64>> {
    let samples = rank_curve(s, grid).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(samples.into_iter().map(|(_, v)| v).collect())
}

/// Indices of the `k` largest scores (ties broken by index), ascending.
fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}
