use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weylwalk_cli::config::{ExperimentConfig, ExperimentKind};
use weylwalk_cli::{run, run_constants, CliError, EXIT_OTHER, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "weylwalk", version, about = "Exit-time experiments for walks in the Weyl chamber")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML config overriding the built-in recipe.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, env = "WEYLWALK_THREADS")]
    threads: Option<usize>,

    #[arg(long, global = true)]
    particles: Option<usize>,

    #[arg(long, global = true)]
    samples: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Survival tail and exponent fit.
    Tail,
    /// Checks on the estimated invariant function.
    VProps,
    /// Rescaled endpoints of the conditioned walk against the limit law.
    LimitDist,
    /// Dyson Brownian motion against GUE.
    DysonCompare,
    /// Tail exponent under heavy-tailed steps.
    HeavyTail,
    /// Table of the Brownian constants.
    Constants,
}

impl Cmd {
    fn kind(self) -> Option<ExperimentKind> {
        Some(match self {
            Cmd::Tail => ExperimentKind::Tail,
            Cmd::VProps => ExperimentKind::VProperties,
            Cmd::LimitDist => ExperimentKind::LimitDist,
            Cmd::DysonCompare => ExperimentKind::DysonCompare,
            Cmd::HeavyTail => ExperimentKind::HeavyTail,
            Cmd::Constants => return None,
        })
    }
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("threads: {e}")))?;
    }
    let Some(kind) = cli.cmd.kind() else {
        return run_constants(&cli.out);
    };
    let mut cfg = match &cli.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            if c.kind != kind {
                return Err(CliError::Usage(format!("config is for {}, not {}", c.kind.as_str(), kind.as_str())));
            }
            c
        }
        None => {
            let seed = cli.seed.ok_or_else(|| CliError::Usage("--seed is required".into()))?;
            ExperimentConfig::recipe(kind, seed)
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.particles {
        cfg.particles = p;
    }
    if let Some(s) = cli.samples {
        cfg.samples = s;
    }
    let out = cfg.out.clone().filter(|_| cli.out == PathBuf::from("out")).unwrap_or(cli.out);
    run(&cfg, &out)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("weylwalk: {e}");
            let code = e.exit_code();
            ExitCode::from(if code == 0 { EXIT_OTHER } else { code })
        }
    }
}
