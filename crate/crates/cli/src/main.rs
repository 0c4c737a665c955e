use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amx_cli::validate::failures;
use amx_cli::{run_emt, run_mode, run_spectrum, run_validate, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amx", version, about = "Vector-field modes and stress tensor on anisotropic backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML, or JSON when the extension is `.json`).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent and the config names none.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Time series of one mode.
    Mode {
        #[command(flatten)]
        common: Common,
        /// Overrides `mode.method` (suv, second_order, bogoliubov, first_order).
        #[arg(long)]
        method: Option<String>,
    },
    /// Integrated stress-tensor timeline.
    Emt {
        #[command(flatten)]
        common: Common,
        /// Also run the doubled grid and log the change in T00 at t1.
        #[arg(long)]
        refine: bool,
    },
    /// Spectral stress tensor over the grid at one time.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Evaluation time (default: end of the span).
        #[arg(long)]
        time: Option<f64>,
    },
    /// Identity suites and oracle checks as a JSON report.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn prepare(common: &Common) -> Result<(RunConfig, Option<PathBuf>, rayon::ThreadPool), CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().or_else(|| cfg.output.path.as_ref().map(|p| cfg.base_dir.join(p)));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    Ok((cfg, out, pool))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mode { common, method } => {
            let (mut cfg, out, pool) = prepare(&common)?;
            if let Some(m) = method {
                cfg.mode.method = m;
            }
            let text = pool.install(|| run_mode(&cfg))?;
            write_output(out.as_deref(), &text)
        }
        Command::Emt { common, refine } => {
            let (cfg, out, pool) = prepare(&common)?;
            let run = pool.install(|| run_emt(&cfg, refine))?;
            if let Some(r) = run.refine {
                eprintln!("refine: relative change in T00(t1) = {:e}", r.rel_delta);
            }
            write_output(out.as_deref(), &run.csv)
        }
        Command::Spectrum { common, time } => {
            let (cfg, out, pool) = prepare(&common)?;
            let text = pool.install(|| run_spectrum(&cfg, time))?;
            write_output(out.as_deref(), &text)
        }
        Command::Validate { common } => {
            let (cfg, out, pool) = prepare(&common)?;
            let (json, reports) = pool.install(|| run_validate(&cfg))?;
            write_output(out.as_deref(), &json)?;
            let failed = failures(&reports);
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(format!("failing checks: {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amx: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
