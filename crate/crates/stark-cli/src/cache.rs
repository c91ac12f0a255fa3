//! On-disk cache and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use stark::model::{ModelParams, Ratio};
use stark::poles::{enumerate_poles_in, PoleSet};

use crate::config::hex16;
use crate::error::CliError;

/// Write `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub struct Cache {
    pub root: PathBuf,
}

/// What a cached pole set was computed for.
#[derive(Clone, Debug)]
pub struct PoleKey {
    pub depth: Ratio,
    pub w_min: f64,
    pub w_max: f64,
}

impl Cache {
    pub fn new(root: PathBuf) -> Cache {
        Cache { root }
    }

    fn pole_path(&self, m: &ModelParams, k: &PoleKey) -> (PathBuf, String) {
        let id = hex16(format!("{:?}|{}|{}|{}|{:e}|{:e}", m.well, m.field, m.ctx.digits, k.depth, k.w_min, k.w_max).as_bytes());
        (self.root.join("poles").join(format!("{id}.txt")), id)
    }

    /// Pole set for `m` and `k`, from the cache if present. Returns the set
    /// and its id. The set always comes from the text form, so cold and
    /// warm runs see identical values.
    pub fn poles(&self, m: &ModelParams, k: &PoleKey) -> Result<(PoleSet, String, bool), CliError> {
        let (path, id) = self.pole_path(m, k);
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(set) = PoleSet::from_text(&text, m) {
                return Ok((set, id, true));
            }
        }
        let set = enumerate_poles_in(m, k.depth, k.w_min, k.w_max)?;
        let text = set.to_text(m.ctx.digits as usize, &id);
        write_atomic(&path, text.as_bytes())?;
        Ok((PoleSet::from_text(&text, m)?, id, false))
    }

    /// Path of the partial-results file for a sweep.
    pub fn sweep_path(&self, config_hash: &str, what: &str) -> PathBuf {
        self.root.join("sweeps").join(format!("{config_hash}-{what}.partial"))
    }
}
