use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pendantss::io::{read_signal, write_benchmark, write_signal};
use pendantss::solver::default_init;
use pendantss::synth::{run_benchmark, select_cutoff, tune_hyperparams, ExperimentConfig};
use pendantss::{solve, Decomposition, HighPassOperator, SolverConfig, SpoqParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<pendantss::Error> for CliError {
    fn from(e: pendantss::Error) -> Self {
        use pendantss::Error as E;
        match &e {
            E::Io(_) => CliError::Io(e.to_string()),
            E::Csv(inner) if matches!(inner.kind(), csv::ErrorKind::Io(_)) => {
                CliError::Io(e.to_string())
            }
            _ if e.is_numeric() => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "pendantss",
    version,
    about = "Joint trend removal and sparse blind deconvolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic observation with its ground truth.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed of the generated instance (defaults to the config's base seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decompose an observed signal.
    Solve {
        /// Observation CSV.
        #[arg(long)]
        y: PathBuf,
        /// Solver parameter JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the multi-realization benchmark.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Grid-search the penalty parameters on the reference realization.
    Tune {
        #[arg(long)]
        config: PathBuf,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Clone, Copy, Debug, Default, Serialize)]
struct Overrides {
    /// Penalty exponent of the numerator quasi-norm.
    #[arg(long)]
    p: Option<f64>,
    /// Penalty exponent of the denominator norm.
    #[arg(long)]
    q: Option<f64>,
    /// High-pass cutoff bin.
    #[arg(long)]
    fc: Option<usize>,
}

impl Overrides {
    fn apply(&self, prm: &mut SpoqParams<f64>) {
        if let Some(p) = self.p {
            prm.p = p;
        }
        if let Some(q) = self.q {
            prm.q = q;
        }
    }
}

fn default_kernel_len() -> usize {
    21
}

/// Parameters of a single `solve` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    spoq: SpoqParams<f64>,
    #[serde(default)]
    solver: SolverConfig<f64>,
    #[serde(default)]
    cutoff: Option<usize>,
    #[serde(default = "default_kernel_len")]
    kernel_len: usize,
    /// Expected number of samples in the observation.
    #[serde(default)]
    len: Option<usize>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn load_experiment(
    path: &Path,
    seed: Option<u64>,
    overrides: &Overrides,
) -> CliResult<ExperimentConfig> {
    let mut cfg: ExperimentConfig = read_json(path)?;
    if let Some(seed) = seed {
        cfg.base_seed = seed;
    }
    overrides.apply(&mut cfg.spoq);
    if let Some(fc) = overrides.fc {
        cfg.cutoff = Some(fc);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_synth(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_experiment(config, seed, &Overrides::default())?;
    let gt = cfg.ground_truth(0)?;
    ensure_dir(out)?;
    write_signal(&out.join("y.csv"), &gt.y)?;
    write_signal(&out.join("s_true.csv"), &gt.s_true)?;
    write_signal(&out.join("pi_true.csv"), &gt.pi_true)?;
    write_signal(&out.join("t_true.csv"), &gt.t_true)?;
    let meta = json!({
        "seed": gt.seed,
        "sigma": gt.sigma,
        "noise_percent": gt.noise_percent,
        "len": gt.y.len(),
        "kernel_len": gt.pi_true.len(),
        "support": gt.support,
        "dataset_style": cfg.dataset_style,
    });
    write_json(&out.join("meta.json"), &meta)
}

fn cmd_solve(y_path: &Path, config: &Path, out: &Path, overrides: &Overrides) -> CliResult<()> {
    let mut cfg: SolveConfig = read_json(config)?;
    overrides.apply(&mut cfg.spoq);
    let cutoff = overrides.fc.or(cfg.cutoff).ok_or_else(|| {
        CliError::Config("no cutoff: set `cutoff` in the config or pass --fc".into())
    })?;
    let y = read_signal::<f64>(y_path).map_err(|e| match e {
        pendantss::Error::Io(io) => CliError::Io(format!("{}: {io}", y_path.display())),
        other => CliError::from(other),
    })?;
    if let Some(expected) = cfg.len.filter(|&n| n != y.len()) {
        return Err(CliError::Config(format!(
            "{} has {} samples but the config expects {expected}",
            y_path.display(),
            y.len()
        )));
    }
    let h = HighPassOperator::new(y.len(), cutoff)?;
    let (s0, k0) = default_init::<f64>(y.len(), cfg.kernel_len)?;
    let dec: Decomposition<f64> = solve(&y, &s0, &k0, &h, &cfg.spoq, &cfg.solver)?;

    ensure_dir(out)?;
    write_signal(&out.join("s_hat.csv"), &dec.s_hat)?;
    write_signal(&out.join("pi_hat.csv"), &dec.pi_hat)?;
    write_signal(&out.join("t_hat.csv"), &dec.t_hat)?;
    let mut doc = serde_json::to_value(&dec).map_err(|e| CliError::Io(e.to_string()))?;
    if let Value::Object(map) = &mut doc {
        map.insert(
            "provenance".into(),
            json!({
                "input": y_path.display().to_string(),
                "config": config.display().to_string(),
                "spoq": cfg.spoq,
                "solver": cfg.solver,
                "cutoff": cutoff,
                "kernel_len": cfg.kernel_len,
                "overrides": overrides,
                "version": env!("CARGO_PKG_VERSION"),
            }),
        );
    }
    write_json(&out.join("decomposition.json"), &doc)
}

fn cmd_bench(
    config: &Path,
    out: &Path,
    jobs: usize,
    seed: Option<u64>,
    overrides: &Overrides,
) -> CliResult<()> {
    let cfg = load_experiment(config, seed, overrides)?;
    let table = run_benchmark(&cfg, jobs)?;
    ensure_dir(out)?;
    write_benchmark(&out.join("benchmark.csv"), &table)?;
    write_json(&out.join("summary.json"), &table.summary())?;
    let run = json!({
        "cutoff": table.cutoff,
        "spoq": cfg.spoq,
        "solver": cfg.solver,
        "base_seed": cfg.base_seed,
        "realizations": cfg.realizations,
        "failures": table.failures,
    });
    write_json(&out.join("run.json"), &run)?;
    if !table.failures.is_empty() {
        eprintln!(
            "warning: {} of {} realizations failed; see run.json",
            table.failures.len(),
            cfg.realizations
        );
    }
    Ok(())
}

fn cmd_tune(
    config: &Path,
    out: &Path,
    jobs: usize,
    seed: Option<u64>,
    overrides: &Overrides,
) -> CliResult<()> {
    let cfg = load_experiment(config, seed, overrides)?;
    let grid = cfg
        .grid
        .clone()
        .ok_or_else(|| CliError::Config("config has no `grid` section".into()))?;
    if grid.points(&cfg.spoq).is_empty() {
        return Err(CliError::Config("tuning grid is empty".into()));
    }
    let tuning = cfg.tuning_truth()?;
    let (cutoff, cutoff_scoreboard) = match cfg.cutoff {
        Some(fc) => (fc, Vec::new()),
        None => {
            let candidates = cfg.candidates_for(&tuning.y)?;
            let sel = select_cutoff(&candidates, &tuning, &cfg.spoq, &cfg.solver, jobs)?;
            (sel.cutoff, sel.scoreboard)
        }
    };
    let outcome = tune_hyperparams(&grid, &cfg.spoq, &tuning, &cfg.solver, cutoff, jobs)?;
    let doc = json!({
        "lambda": outcome.best.lambda,
        "beta": outcome.best.beta,
        "eta": outcome.best.eta,
        "cutoff": cutoff,
        "k_max": outcome.k_max,
        "spoq": outcome.best,
        "tuning_seed": tuning.seed,
        "scoreboard": outcome.scoreboard,
        "cutoff_scoreboard": cutoff_scoreboard,
    });
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_json(out, &doc)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth { config, out, seed } => cmd_synth(&config, &out, seed),
        Command::Solve {
            y,
            config,
            out,
            overrides,
        } => cmd_solve(&y, &config, &out, &overrides),
        Command::Bench {
            config,
            out,
            jobs,
            seed,
            overrides,
        } => cmd_bench(&config, &out, jobs, seed, &overrides),
        Command::Tune {
            config,
            out,
            jobs,
            seed,
            overrides,
        } => cmd_tune(&config, &out, jobs, seed, &overrides),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
