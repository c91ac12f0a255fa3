//! Configuration, caching and orchestration for the `stark` command.

pub mod cache;
pub mod config;
pub mod error;
pub mod recipes;
pub mod run;

use std::path::PathBuf;

pub use config::{Overrides, RunConfig};
pub use error::CliError;
use recipes::Command;
pub use run::Session;

/// Run one command on a session and return the files written.
pub fn dispatch(s: &Session, c: Command) -> Result<Vec<PathBuf>, CliError> {
    match c {
        Command::Poles => s.cmd_poles(),
        Command::Reconstruct => s.cmd_reconstruct(),
        Command::Evolve => s.cmd_evolve(),
        Command::Map => s.cmd_map(),
        Command::Arrival => s.cmd_arrival(),
        Command::Oracle => s.cmd_oracle(),
    }
}

/// Resolve the configuration and run every command of a recipe.
pub fn run_recipe(name: &str, o: &Overrides, resume: bool) -> Result<Vec<PathBuf>, CliError> {
    let o = Overrides { recipe: Some(name.into()), ..o.clone() };
    let cfg = RunConfig::resolve(&o)?;
    let mut s = Session::new(cfg)?;
    s.resume = resume;
    let mut files = Vec::new();
    for c in recipes::commands(name)? {
        files.extend(dispatch(&s, *c)?);
    }
    Ok(files)
}
