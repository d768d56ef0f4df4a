//! `kato`: runs the verification suites and writes CSV/NDJSON artifacts.
//!
//! Exit status: 0 when every report holds, 1 when any is violated or
//! inconclusive, 2 on invalid configuration or a failed computation.

mod artifacts;
mod config;
mod suites;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kato_core::report::Verdict;
use kato_core::rng::with_workers;

use artifacts::Artifacts;
use config::SuiteConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Run(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(name = "kato", version, about = "Seeded verification suites for Kato-class Schrödinger semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON config; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed. Required here or as `run.seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config field, e.g. `--set n_paths=20000` or `--set integrator.grid_step=0.005`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Heat kernel mass, symmetry, Chapman-Kolmogorov, sphere polar law.
    KernelChecks(RunArgs),
    /// Distance moments of the transition law.
    Moments(RunArgs),
    /// Coupling maximality, marginals and the equivalence ladder.
    Couple(RunArgs),
    /// Kato certificates and classification.
    Kato(RunArgs),
    /// Feynman-Kac semigroup estimates.
    Fk(RunArgs),
    /// Certified exponential moment against Monte Carlo.
    Khashminskii(RunArgs),
    /// Perturbation identity residuals.
    Duhamel(RunArgs),
    /// Lipschitz and Hölder quotients of the heat semigroup.
    Holder(RunArgs),
    /// Hölder smoothing estimate for the Schrödinger semigroup.
    Theorem(RunArgs),
    /// Molecular constants and the α → 1 blow-up fit.
    Molecule(RunArgs),
    /// Aggregates the verdicts of an artifact directory.
    Report {
        dir: PathBuf,
    },
}

fn execute<C: SuiteConfig + Sync>(
    args: &RunArgs,
    run: fn(&C, u64) -> Result<Artifacts, CliError>,
) -> Result<Verdict, CliError> {
    let mut cfg: C = config::load(args.config.as_deref(), &args.sets)?;
    let opts = cfg.run_mut();
    if args.seed.is_some() {
        opts.seed = args.seed;
    }
    if args.workers.is_some() {
        opts.workers = args.workers;
    }
    if args.out.is_some() {
        opts.out = args.out.clone();
    }
    cfg.validate().map_err(CliError::Config)?;
    let seed = cfg
        .run()
        .seed
        .ok_or_else(|| CliError::Config("a seed is required: pass --seed N or set run.seed".into()))?;
    let workers = match cfg.run().workers {
        Some(0) => return Err(CliError::Config("workers must be positive".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let out = cfg.run().out.clone().unwrap_or_else(|| PathBuf::from("out"));

    let art = with_workers(workers, || run(&cfg, seed))?;
    let meta = serde_json::json!({
        "seed": seed,
        "workers": workers,
        "resolved": serde_json::to_value(&cfg).expect("config is serializable"),
    });
    art.write(&out, meta)?;

    for r in art.reports.iter().filter(|r| !r.holds()) {
        println!("{} {}: {}", r.verdict.as_str().to_uppercase(), r.bound_name, r.to_json_line());
    }
    let verdict = art.verdict();
    println!(
        "{}: {} reports, {} -> {}",
        art.suite,
        art.reports.len(),
        verdict.as_str(),
        out.display()
    );
    Ok(verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::KernelChecks(a) => execute(a, suites::kernel::run),
        Command::Moments(a) => execute(a, suites::moments::run),
        Command::Couple(a) => execute(a, suites::couple::run),
        Command::Kato(a) => execute(a, suites::kato::run),
        Command::Fk(a) => execute(a, suites::fk::run),
        Command::Khashminskii(a) => execute(a, suites::khashminskii::run),
        Command::Duhamel(a) => execute(a, suites::duhamel::run),
        Command::Holder(a) => execute(a, suites::holder::run),
        Command::Theorem(a) => execute(a, suites::theorem::run),
        Command::Molecule(a) => execute(a, suites::molecule::run),
        Command::Report { dir } => summary::summarize(dir).map(|s| {
            if summary::print(&s) {
                Verdict::Holds
            } else {
                Verdict::Violated
            }
        }),
    };
    match result {
        Ok(Verdict::Holds) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
