use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quasiboot::harness::{
    run_cdf_experiment, run_coverage, run_moment_fit, run_regression_coverage, run_weights_check,
    ExperimentConfig, Kind, OutputFormat,
};
use quasiboot::Error;

/// Weighted bootstrap coverage and CDF experiments.
///
/// Each subcommand reads a flat `key = value` config file; command-line
/// options override the matching keys.
#[derive(Parser)]
#[command(name = "quasiboot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage of bootstrap quantiles for the norm of a scaled sum
    Coverage(RunArgs),
    /// Empirical CDFs of the scaled sum and its quasi-Gaussian counterpart
    Cdf(RunArgs),
    /// Coverage of wild bootstrap quantiles in a linear model
    Regression(RunArgs),
    /// Exact moments of a weight scheme against the multiplier conditions
    WeightsCheck(RunArgs),
    /// Gaussian-plus-residual fits to the moments of a law
    MomentFit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file
    #[arg(long)]
    config: PathBuf,
    /// Master seed [config default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores [config default: 0]
    #[arg(long)]
    threads: Option<usize>,
    /// Output path; results go to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo repetitions R [config default: 7000]
    #[arg(long)]
    reps: Option<usize>,
    /// Bootstrap replicates B [config default: 1000]
    #[arg(long)]
    boot: Option<usize>,
    /// Run even when R * B * n * p exceeds `max_work` [config default: 5e11]
    #[arg(long)]
    force: bool,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

fn load(kind: Kind, args: &RunArgs) -> quasiboot::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text, Some(kind))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(b) = args.boot {
        cfg.boot = b;
    }
    cfg.force |= args.force;
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(value: &T, cfg: &ExperimentConfig) -> quasiboot::Result<()> {
    match &cfg.out {
        Some(path) => serde_json::to_writer_pretty(std::fs::File::create(path)?, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn run(kind: Kind, cfg: &ExperimentConfig) -> quasiboot::Result<()> {
    match kind {
        Kind::Coverage | Kind::Regression => {
            let table = if kind == Kind::Coverage {
                run_coverage(cfg)?
            } else {
                run_regression_coverage(cfg)?
            };
            match (&cfg.out, cfg.format) {
                (Some(path), format) => table.emit(format, path)?,
                (None, OutputFormat::Csv) => table.write_csv(std::io::stdout().lock())?,
                (None, OutputFormat::Json) => write_json(&table, cfg)?,
            }
        }
        Kind::Cdf => {
            let data = run_cdf_experiment(cfg)?;
            match &cfg.out {
                Some(path) => data.emit(cfg.format, path)?,
                None => println!("{}", serde_json::to_string_pretty(&data.summary)?),
            }
        }
        Kind::WeightsCheck => {
            let report = run_weights_check(cfg)?;
            write_json(&report, cfg)?;
            if !report.passed() {
                eprintln!("scheme {} fails the multiplier moment conditions", report.scheme);
            }
        }
        Kind::MomentFit => {
            let report = run_moment_fit(cfg)?;
            match (&cfg.out, cfg.format) {
                (_, OutputFormat::Json) => write_json(&report, cfg)?,
                (Some(path), OutputFormat::Csv) => std::fs::write(path, report.to_text())?,
                (None, OutputFormat::Csv) => print!("{}", report.to_text()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Coverage(a) => (Kind::Coverage, a),
        Command::Cdf(a) => (Kind::Cdf, a),
        Command::Regression(a) => (Kind::Regression, a),
        Command::WeightsCheck(a) => (Kind::WeightsCheck, a),
        Command::MomentFit(a) => (Kind::MomentFit, a),
    };
    let cfg = match load(kind, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(kind, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Budget { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
