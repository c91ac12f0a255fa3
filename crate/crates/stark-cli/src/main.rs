use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stark_cli::recipes::Command;
use stark_cli::{dispatch, run_recipe, CliError, Overrides, RunConfig, Session};

/// Resonant-state expansion of tunneling after a sudden field switch-on.
///
/// Exit codes: 0 success, 2 configuration error, 3 numerical certification
/// failure, 4 oracle disagreement beyond threshold. The cache directory
/// can be overridden with STARK_CACHE_DIR.
#[derive(Parser)]
#[command(name = "stark", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from a recipe's defaults.
    #[arg(long, global = true)]
    recipe: Option<String>,
    /// Override one value, e.g. `--set contour.s=1/50` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Working precision in decimal digits.
    #[arg(long, global = true)]
    digits: Option<u32>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cache directory (the environment variable takes precedence).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Continue interrupted sweeps from their partial files.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Certified pole set and zero-line map.
    Poles,
    /// Wavefunction at t = 0 against the initial state.
    Reconstruct,
    /// Time series at the detector positions.
    Evolve,
    /// Density on the x × t grid.
    Map,
    /// Arrival times, trajectory fits and norm audit.
    Arrival,
    /// Grid propagator comparison.
    Oracle,
    /// Run a named recipe.
    Recipe { name: String },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let c = cli.common;
    let mut o = Overrides { recipe: c.recipe, file: c.config, set: c.set, digits: c.digits, out: c.out, cache_dir: c.cache_dir };
    if let Cmd::Recipe { name } = &cli.cmd {
        o.recipe = Some(name.clone());
    }
    let cfg = RunConfig::resolve(&o)?;
    if c.print_config {
        print!("# config {}\n{}", cfg.hash(), cfg.to_toml());
        return Ok(());
    }
    let files = match cli.cmd {
        Cmd::Recipe { name } => run_recipe(&name, &o, c.resume)?,
        other => {
            let command = match other {
                Cmd::Poles => Command::Poles,
                Cmd::Reconstruct => Command::Reconstruct,
                Cmd::Evolve => Command::Evolve,
                Cmd::Map => Command::Map,
                Cmd::Arrival => Command::Arrival,
                Cmd::Oracle => Command::Oracle,
                Cmd::Recipe { .. } => unreachable!(),
            };
            let mut s = Session::new(cfg)?;
            s.resume = c.resume;
            dispatch(&s, command)?
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stark: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
