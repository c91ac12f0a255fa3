//! Named recipes: a default configuration plus the commands to run.

use std::path::PathBuf;

use stark::analysis::{AuditGrid, FitVariant};
use stark::model::{Ratio, Well};
use stark::oracle::Absorber;

use crate::config::*;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Poles,
    Reconstruct,
    Evolve,
    Map,
    Arrival,
    Oracle,
}

pub const NAMES: [&str; 5] = ["nanotip-s003", "delta-f002", "fig5", "fig7", "oracle-f02"];

fn range(start: f64, stop: f64, step: f64) -> Axis {
    Axis::Range { start, stop, step }
}

fn delta(field: Ratio) -> ModelSection {
    ModelSection { well: Well::Delta, field, state: None }
}

fn nanotip() -> ModelSection {
    ModelSection { well: Well::Finite { l: Ratio::int(100), v0: Ratio::new(25, 68) }, field: Ratio::new(1, 100), state: Some(-0.1848) }
}

/// Settings shared by every recipe.
fn base(name: &str, model: ModelSection, digits: u32) -> RunConfig {
    RunConfig {
        recipe: Some(name.into()),
        model,
        precision: PrecisionSection { digits },
        contour: ContourSection { s: Ratio::new(3, 100), z_max: 2.0, z_min: None, weight_floor: 1e-6, lattice_m: None, amplitude_tol: 1e-20 },
        poles: PoleSection { depth: Ratio::new(3, 100), margin: 0.5, map_nx: 200, map_ny: 60, map_digits: 30 },
        grids: Grids { x: Axis::List(vec![0.0]), t: Axis::List(vec![0.0]), detectors: vec![], t_series: Axis::List(vec![0.0]) },
        analysis: AnalysisSection {
            fit: vec![FitVariant::ExitAtZero, FitVariant::ExitAtRest],
            norm_times: vec![],
            audit: AuditGrid { x_right: 150.0, dx_out: 0.05, dx_in: 0.05, dt_flux: 0.05 },
        },
        oracle: OracleSection { dx: 0.02, dt: 0.005, levels: 3, threshold: 1e-2, absorber: Absorber { strength: 0.5, onset: 10.0, width: 120.0 } },
        outputs: Outputs { dir: PathBuf::from("out").join(name), full_precision: false },
        cache: CacheSection { dir: None },
    }
}

/// Default configuration of a recipe.
pub fn defaults(name: &str) -> Result<RunConfig, CliError> {
    let mut c = match name {
        // pole census in the nanotip strip up to the contour truncation
        "nanotip-s003" => {
            let mut c = base(name, nanotip(), 200);
            c.contour.z_max = 1.5;
            c.poles.margin = 0.0;
            c
        }
        "delta-f002" => {
            let mut c = base(name, delta(Ratio::new(1, 50)), 100);
            c.grids.x = range(0.0, 40.0, 0.25);
            c
        }
        "fig5" => {
            let mut c = base(name, delta(Ratio::new(1, 50)), 100);
            c.grids.detectors = vec![25.0, 60.0];
            c.grids.t_series = range(0.0, 120.0, 0.5);
            c
        }
        "fig7" => {
            let mut c = base(name, nanotip(), 200);
            c.contour.z_max = 1.5;
            c.poles.margin = 0.1;
            c.grids.x = range(0.0, 150.0, 1.0);
            c.grids.t = range(0.0, 200.0, 1.0);
            c.grids.detectors = (2..=15).map(|i| 10.0 * i as f64).collect();
            c.grids.t_series = range(0.0, 200.0, 0.5);
            c
        }
        // the expansion side only needs to beat the grid's own error
        "oracle-f02" => {
            let mut c = base(name, delta(Ratio::new(1, 5)), 30);
            c.contour.z_max = 16.0;
            c.grids.x = range(2.0, 40.0, 0.5);
            c.grids.t = range(0.0, 30.0, 0.5);
            c
        }
        other => return Err(CliError::Config(format!("unknown recipe `{other}`; known: {}", NAMES.join(", ")))),
    };
    c.recipe = Some(name.into());
    Ok(c)
}

/// Commands a recipe runs, in order.
pub fn commands(name: &str) -> Result<&'static [Command], CliError> {
    Ok(match name {
        "nanotip-s003" => &[Command::Poles],
        "delta-f002" => &[Command::Poles, Command::Reconstruct],
        "fig5" => &[Command::Evolve],
        "fig7" => &[Command::Map, Command::Arrival],
        "oracle-f02" => &[Command::Oracle],
        other => return Err(CliError::Config(format!("unknown recipe `{other}`"))),
    })
}
