use clap::{Parser, Subcommand};
use fracheat_cli::commands::{self, Command, RunOptions};
use fracheat_cli::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fracheat", version, about = "Fractional heat semigroups, capacities and Wolff potentials")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for every random draw; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Double all grids.
    #[arg(long, global = true)]
    refine: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Kernel table with its upper envelope.
    Kernel,
    /// Envelope and derivative-bound constants.
    Bounds,
    /// Cauchy problem by Duhamel's formula.
    Solve,
    /// Capacity of a finite constraint set with its extremal measure.
    Capacity,
    /// Trace-inequality conditions for a discrete measure.
    Trace,
    /// Christ tree, Wolff potentials and maximal functions.
    Dyadic,
    /// Full acceptance suite.
    Report,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Kernel => Command::Kernel,
            Sub::Bounds => Command::Bounds,
            Sub::Solve => Command::Solve,
            Sub::Capacity => Command::Capacity,
            Sub::Trace => Command::Trace,
            Sub::Dyadic => Command::Dyadic,
            Sub::Report => Command::Report,
        }
    }
}

const REPORT_CONFIG: &str = "[operator]\nalpha = 0.5\n";

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = Command::from(cli.command);
    let cfg = match (&cli.config, cmd) {
        (Some(path), _) => RunConfig::load(path),
        (None, Command::Report) => RunConfig::from_toml(REPORT_CONFIG),
        (None, _) => {
            eprintln!("config error: --config is required for `{}`", cmd.name());
            return ExitCode::from(2);
        }
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { seed: cli.seed.or(cfg.seed).unwrap_or(1), refine: cli.refine };
    let result = commands::run(cmd, &cfg, opts).and_then(|out| {
        commands::write_all(&cli.out, &out.artifacts)?;
        Ok(out)
    });
    match result {
        Ok(out) if out.passed => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("acceptance: at least one criterion failed; see {}", cli.out.join("summary.json").display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
