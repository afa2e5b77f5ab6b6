use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use manifold_langevin::experiments::{
    error_record, run_to_file, summarize, w1_between_files, with_threads, write_atomic, ExperimentConfig,
    ExperimentKind, LemmaSuite, Status,
};
use manifold_langevin::{Error, Result};

#[derive(Parser)]
#[command(name = "mlangevin", version, about = "Geodesic Langevin sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to unset fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory (replaces the directory of the configured output).
    #[arg(long, global = true, env = "MANIFOLD_LANGEVIN_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Final points of independent geodesic Euler-Maruyama chains.
    Sample,
    /// Final points of independent SGLD chains.
    Sgld,
    /// Stepsize and level scans.
    Scan {
        #[command(subcommand)]
        scan: Scan,
    },
    /// Coupled pairs of chains (distance series).
    Couple,
    /// Randomized inequality checks.
    LemmaCheck { suite: Suite },
    /// Running-maximum tail exceedance of SGLD against its bound.
    TailCheck,
    /// Exact W1 between two cloud files.
    W1 { a: PathBuf, b: PathBuf },
    /// Fitted slopes and pass/fail lines for result files.
    Summarize {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum Scan {
    OneStep,
    Levels,
    W1,
    SgldBias,
}

#[derive(ValueEnum, Clone, Copy)]
enum Suite {
    Lyapunov,
    Jacobi,
    MatrixOde,
    Triangle,
    TwoPoint,
}

impl From<Suite> for LemmaSuite {
    fn from(s: Suite) -> Self {
        match s {
            Suite::Lyapunov => LemmaSuite::Lyapunov,
            Suite::Jacobi => LemmaSuite::Jacobi,
            Suite::MatrixOde => LemmaSuite::MatrixOde,
            Suite::Triangle => LemmaSuite::Triangle,
            Suite::TwoPoint => LemmaSuite::TwoPoint,
        }
    }
}

fn experiment(common: &Common, kind: ExperimentKind, suite: Option<LemmaSuite>) -> Result<PathBuf> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(kind),
    };
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "config describes a {} experiment, not {}",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if suite.is_some() {
        cfg.suite = suite;
    }
    with_threads(common.threads, || run_to_file(&cfg, common.out.as_deref()))?
}

fn w1(common: &Common, a: &Path, b: &Path) -> Result<()> {
    let (value, csv) = w1_between_files(a, b)?;
    println!("{value}");
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let path = dir.join("w1-assignment.csv");
    write_atomic(&path, &csv)?;
    log::info!("assignment written to {}", path.display());
    Ok(())
}

fn summarize_files(files: &[PathBuf]) -> Result<bool> {
    let mut ok = true;
    println!("{:<28} {:<40} {:<8} {:<34} measured", "source", "quantity", "status", "criterion");
    for f in files {
        let text = std::fs::read_to_string(f)?;
        let name = f.file_name().map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into_owned());
        for l in summarize(&name, &text)? {
            ok &= l.status != Status::Fail;
            println!("{:<28} {:<40} {:<8} {:<34} {}", l.source, l.quantity, l.status.label(), l.criterion, l.measured);
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    let written = match &cli.command {
        Command::Sample => experiment(c, ExperimentKind::Sample, None),
        Command::Sgld => experiment(c, ExperimentKind::Sgld, None),
        Command::Scan { scan } => {
            let kind = match scan {
                Scan::OneStep => ExperimentKind::OneStepError,
                Scan::Levels => ExperimentKind::AdjacentLevel,
                Scan::W1 => ExperimentKind::W1Scaling,
                Scan::SgldBias => ExperimentKind::SgldBias,
            };
            experiment(c, kind, None)
        }
        Command::Couple => experiment(c, ExperimentKind::Coupling, None),
        Command::LemmaCheck { suite } => experiment(c, ExperimentKind::LemmaCheck, Some((*suite).into())),
        Command::TailCheck => experiment(c, ExperimentKind::TailCheck, None),
        Command::W1 { a, b } => w1(c, a, b).map(|_| PathBuf::new()),
        Command::Summarize { files } => match summarize_files(files) {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match written {
        Ok(p) => {
            if !p.as_os_str().is_empty() {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(2)
        }
    }
}
