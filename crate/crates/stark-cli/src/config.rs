//! Run configuration: TOML file, recipe defaults and command-line overrides.
//!
//! Precedence, lowest first: recipe defaults (from `--recipe` or the file's
//! `recipe` key), the config file, `--set section.key=value` overrides, and
//! finally the dedicated flags (`--digits`, `--out`, `--cache-dir`).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stark::analysis::{AuditGrid, FitVariant};
use stark::model::{Ratio, Well};
use stark::oracle::Absorber;

use crate::error::CliError;
use crate::recipes;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<String>,
    pub model: ModelSection,
    pub precision: PrecisionSection,
    pub contour: ContourSection,
    pub poles: PoleSection,
    pub grids: Grids,
    pub analysis: AnalysisSection,
    pub oracle: OracleSection,
    pub outputs: Outputs,
    pub cache: CacheSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub well: Well,
    pub field: Ratio,
    /// Energy hint for the initial state; the nearest bound state is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionSection {
    pub digits: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSection {
    /// Depth of the deformed contour.
    pub s: Ratio,
    /// Upper energy truncation; the contour ends in the pole gap nearest it.
    pub z_max: f64,
    /// Lower truncation. Derived from `weight_floor` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_min: Option<f64>,
    /// Relative spectral weight below which the lower tail is dropped.
    pub weight_floor: f64,
    /// Lattice points per unit length. Derived from the grids when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_m: Option<u32>,
    pub amplitude_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleSection {
    /// Search depth; must be at least the contour depth.
    pub depth: Ratio,
    /// Extra search range beyond the upper truncation.
    pub margin: f64,
    /// Resolution and precision of the zero-line map.
    pub map_nx: usize,
    pub map_ny: usize,
    pub map_digits: u32,
}

/// Either an inclusive arithmetic range or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Axis::List(v) => Ok(v.clone()),
            Axis::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(CliError::Config(format!("bad range {start}..{stop} step {step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub x: Axis,
    pub t: Axis,
    /// Detector positions for time series and arrival analysis.
    pub detectors: Vec<f64>,
    /// Time grid for detector series.
    pub t_series: Axis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub fit: Vec<FitVariant>,
    /// Times for the norm audit; empty skips it.
    pub norm_times: Vec<f64>,
    pub audit: AuditGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub dx: f64,
    pub dt: f64,
    /// Number of grids for the self-convergence check (each halves dx and dt).
    pub levels: u32,
    /// Allowed relative L2 difference of |ψ|² between the two methods.
    pub threshold: f64,
    pub absorber: Absorber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub dir: PathBuf,
    /// Also write ψ at working precision next to the 17-digit files.
    #[serde(default)]
    pub full_precision: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Environment variable that overrides the cache directory.
pub const CACHE_ENV: &str = "STARK_CACHE_DIR";

/// Where and how the command line modifies the configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub recipe: Option<String>,
    pub file: Option<PathBuf>,
    pub set: Vec<String>,
    pub digits: Option<u32>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Resolve defaults, file and overrides into one configuration.
    pub fn resolve(o: &Overrides) -> Result<RunConfig, CliError> {
        let file = match &o.file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Some(text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)
            }
            None => None,
        };
        let recipe = o.recipe.clone().or_else(|| file.as_ref().and_then(|t| t.get("recipe")).and_then(|v| v.as_str()).map(String::from));
        let mut table = match &recipe {
            Some(name) => to_table(&recipes::defaults(name)?)?,
            None if file.is_none() => return Err(CliError::Config("no configuration: pass --config or --recipe".into())),
            None => toml::Table::new(),
        };
        if let Some(f) = file {
            merge(&mut table, f);
        }
        if let Some(name) = &o.recipe {
            table.insert("recipe".into(), toml::Value::String(name.clone()));
        }
        for item in &o.set {
            apply_set(&mut table, item)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(d) = o.digits {
            cfg.precision.digits = d;
        }
        if let Some(out) = &o.out {
            cfg.outputs.dir = out.clone();
        }
        if let Some(c) = &o.cache_dir {
            cfg.cache.dir = Some(c.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if !self.contour.s.is_positive() {
            return bad("contour.s must be positive");
        }
        if self.poles.depth.to_f64() < self.contour.s.to_f64() {
            return bad("poles.depth must be at least contour.s");
        }
        if !(self.contour.weight_floor > 0.0 && self.contour.weight_floor < 1.0) {
            return bad("contour.weight_floor must lie in (0, 1)");
        }
        if let Some(a) = self.contour.z_min {
            if a >= self.contour.z_max {
                return bad("contour.z_min must be below contour.z_max");
            }
        }
        if !(self.contour.amplitude_tol > 0.0) {
            return bad("contour.amplitude_tol must be positive");
        }
        if !(self.oracle.dx > 0.0 && self.oracle.dt > 0.0 && self.oracle.threshold > 0.0) {
            return bad("oracle.dx, oracle.dt and oracle.threshold must be positive");
        }
        self.grids.x.values()?;
        self.grids.t.values()?;
        self.grids.t_series.values()?;
        Ok(())
    }

    /// Canonical TOML text of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Hash of everything that affects the numbers: output and cache
    /// locations, the debug dump switch and the recipe label are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.outputs.dir = PathBuf::new();
        c.outputs.full_precision = false;
        c.cache.dir = None;
        c.recipe = None;
        hex16(c.to_toml().as_bytes())
    }

    /// Cache directory: environment variable, then config, then `.stark-cache`.
    pub fn cache_dir(&self) -> PathBuf {
        if let Some(v) = std::env::var_os(CACHE_ENV) {
            return PathBuf::from(v);
        }
        self.cache.dir.clone().unwrap_or_else(|| PathBuf::from(".stark-cache"))
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn hex16(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn to_table(cfg: &RunConfig) -> Result<toml::Table, CliError> {
    toml::Table::try_from(cfg).map_err(|e| CliError::Config(e.to_string()))
}

/// Recursive merge; tables merge key by key, everything else replaces.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            // a well of another kind must not inherit the old parameters
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if k != "well" => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `a.b.c=value`; the value is read as a TOML literal, or as a string if
/// that fails.
fn apply_set(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (path, raw) = item.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{item}`")))?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let next = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next.as_table_mut().ok_or_else(|| CliError::Config(format!("`{k}` in `{path}` is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
