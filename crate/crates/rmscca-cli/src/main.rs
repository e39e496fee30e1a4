//! `rmscca` command line: simulate synthetic datasets, fit sparse canonical
//! pairs, test their significance by permutation, and score recovered
//! structure against the simulated ground truth.
//!
//! Exit codes: 0 success, 2 input/parse error, 3 numerical degeneracy,
//! 4 configuration error.

mod commands;
mod config;
mod documents;
mod error;
mod matrix_io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{parse_grid, parse_groups, RunConfig};
use error::AppError;
use rmscca::{EstimatorMode, TailDivisor, TailMode};

#[derive(Parser)]
#[command(
    name = "rmscca",
    version,
    about = "Resistant multiple sparse canonical correlation analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted canonical groups
    Simulate(SimulateArgs),
    /// Fit sparse canonical pairs to two CSV matrices
    Fit(FitArgs),
    /// Fit and assess pair significance against permuted refits
    Permtest(PermtestArgs),
    /// Score fitted runs against their simulated ground truth
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pearson,
    Spearman,
}

impl From<ModeArg> for EstimatorMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Pearson => EstimatorMode::Pearson,
            ModeArg::Spearman => EstimatorMode::Spearman,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TailArg {
    Clean,
    Tlike,
}

#[derive(Clone, Copy, ValueEnum)]
enum TailDivisorArg {
    Sqrt,
    Linear,
}

#[derive(Args)]
struct CommonOpts {
    /// JSON run-configuration file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Covariance estimator
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Number of cross-validation folds
    #[arg(long)]
    ncv: Option<usize>,
    /// Comma-separated penalty grid in [0,2], e.g. 0,0.1,0.2,0.3,0.4,0.5
    #[arg(long)]
    grid: Option<String>,
    /// Number of canonical pairs (default min(p, q, 10))
    #[arg(long)]
    pq: Option<usize>,
    /// Seed for fold assignment and permutation streams
    #[arg(long)]
    seed: Option<u64>,
    /// Center and scale columns before estimation (default true)
    #[arg(long)]
    standardize: Option<bool>,
    /// Correlation used on held-out data (default: same as --mode)
    #[arg(long, value_enum)]
    test_cor: Option<ModeArg>,
    /// Worker threads (default: all cores); never affects results
    #[arg(long)]
    threads: Option<usize>,
    /// Convergence tolerance of the power iteration
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap of the power iteration
    #[arg(long)]
    max_iter: Option<usize>,
}

impl CommonOpts {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), AppError> {
        if let Some(mode) = self.mode {
            cfg.mode = mode.into();
        }
        if let Some(ncv) = self.ncv {
            cfg.n_cv = ncv;
        }
        if let Some(grid) = &self.grid {
            cfg.lambda_grid = parse_grid(grid).map_err(AppError::config)?;
        }
        if let Some(pq) = self.pq {
            cfg.pq_star = Some(pq);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(standardize) = self.standardize {
            cfg.standardize = standardize;
        }
        if let Some(test_cor) = self.test_cor {
            cfg.test_cor = Some(test_cor.into());
        }
        if let Some(threads) = self.threads {
            cfg.threads = Some(threads);
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(max_iter) = self.max_iter {
            cfg.max_iter = max_iter;
        }
        Ok(())
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Directory receiving x.csv, y.csv, truth.json
    #[arg(long)]
    out_dir: PathBuf,
    /// JSON run-configuration file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Observations
    #[arg(long)]
    n: Option<usize>,
    /// x dimensions
    #[arg(long)]
    p: Option<usize>,
    /// y dimensions
    #[arg(long)]
    q: Option<usize>,
    /// Within-group correlation in (0, 1)
    #[arg(long)]
    rho: Option<f64>,
    /// Planted groups: "default", "none", or "10x20,5x5"
    #[arg(long)]
    groups: Option<String>,
    /// Tail behavior of the x rows
    #[arg(long, value_enum)]
    tail: Option<TailArg>,
    /// Heavy-tail divisor form
    #[arg(long, value_enum)]
    tail_divisor: Option<TailDivisorArg>,
    /// Divide the y noise by the same per-row tail divisor
    #[arg(long)]
    contaminate_noise: Option<bool>,
    /// Chi-squared degrees of freedom of the tail divisor
    #[arg(long)]
    df: Option<f64>,
    /// Value written into the nonzero blocks of B
    #[arg(long)]
    b_value: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    /// x matrix CSV (rows = samples)
    #[arg(long)]
    x: PathBuf,
    /// y matrix CSV (rows = samples)
    #[arg(long)]
    y: PathBuf,
    /// Output fit JSON
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct PermtestArgs {
    /// x matrix CSV (rows = samples)
    #[arg(long)]
    x: PathBuf,
    /// y matrix CSV (rows = samples)
    #[arg(long)]
    y: PathBuf,
    /// Output permutation-summary JSON
    #[arg(long)]
    out: PathBuf,
    /// Output fan-plot TSV of per-pair permutation quantiles
    #[arg(long)]
    fan: Option<PathBuf>,
    /// Also write the observed fit JSON here
    #[arg(long)]
    fit_out: Option<PathBuf>,
    /// Number of permutations
    #[arg(long)]
    nperm: Option<usize>,
    /// Quantile level of the significance cutoff, in (0, 1)
    #[arg(long)]
    q: Option<f64>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run directory containing fit.json, permtest.json, truth.json (repeatable)
    #[arg(long, required = true)]
    run: Vec<PathBuf>,
    /// Output per-run metrics TSV
    #[arg(long)]
    metrics: PathBuf,
    /// Output batch-aggregate TSV
    #[arg(long)]
    summary: PathBuf,
    /// Label recorded in the aggregate row
    #[arg(long, default_value = "batch")]
    label: String,
}

fn load_base_config(path: &Option<PathBuf>) -> Result<RunConfig, AppError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| AppError::config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| AppError::config(format!("{}: {e}", path.display())))
        }
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        // a later duplicate initialization is harmless; results never depend
        // on the pool size anyway
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate(args) => {
            let mut cfg = load_base_config(&args.config)?;
            if let Some(n) = args.n {
                cfg.n = n;
            }
            if let Some(p) = args.p {
                cfg.p = p;
            }
            if let Some(q) = args.q {
                cfg.q = q;
            }
            if let Some(rho) = args.rho {
                cfg.rho = rho;
            }
            if let Some(groups) = &args.groups {
                cfg.groups = parse_groups(groups).map_err(AppError::config)?;
            }
            if let Some(tail) = args.tail {
                cfg.tail = match tail {
                    TailArg::Clean => TailMode::Clean,
                    TailArg::Tlike => TailMode::TLike,
                };
            }
            if let Some(divisor) = args.tail_divisor {
                cfg.tail_divisor = match divisor {
                    TailDivisorArg::Sqrt => TailDivisor::Sqrt,
                    TailDivisorArg::Linear => TailDivisor::Linear,
                };
            }
            if let Some(contaminate) = args.contaminate_noise {
                cfg.contaminate_noise = contaminate;
            }
            if let Some(df) = args.df {
                cfg.df = df;
            }
            if let Some(b_value) = args.b_value {
                cfg.b_value = b_value;
            }
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            cfg.out_dir = Some(args.out_dir);
            commands::cmd_simulate(&cfg)
        }
        Command::Fit(args) => {
            let mut cfg = load_base_config(&args.common.config)?;
            args.common.apply(&mut cfg)?;
            cfg.x_path = Some(args.x);
            cfg.y_path = Some(args.y);
            cfg.out_path = Some(args.out);
            init_threads(cfg.threads);
            commands::cmd_fit(&cfg)
        }
        Command::Permtest(args) => {
            let mut cfg = load_base_config(&args.common.config)?;
            args.common.apply(&mut cfg)?;
            if let Some(nperm) = args.nperm {
                cfg.n_perm = nperm;
            }
            if let Some(q) = args.q {
                cfg.q_level = q;
            }
            cfg.x_path = Some(args.x);
            cfg.y_path = Some(args.y);
            cfg.out_path = Some(args.out);
            cfg.fan_path = args.fan;
            cfg.fit_out_path = args.fit_out;
            init_threads(cfg.threads);
            commands::cmd_permtest(&cfg)
        }
        Command::Evaluate(args) => {
            commands::cmd_evaluate(&args.run, &args.label, &args.metrics, &args.summary)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code);
    }
}
