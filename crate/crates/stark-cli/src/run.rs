//! Commands of the pipeline. A [`Session`] holds the resolved model and a
//! lazily built expansion so that a recipe running several commands pays
//! for the expansion once.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, OnceLock};

use rug::Float;
use stark::analysis::{fit_trajectory, norm_audit, peak_arrival, ArrivalRecord};
use stark::evolve::{fmt17, lower_cut, ContourSpec, Expansion, FieldMeta, WavefunctionField};
use stark::model::{BoundState, ModelParams};
use stark::mpnum::{MpComplex, PrecisionContext};
use stark::oracle::{density_l2, evolve_grid, Absorber, GridSpec};
use stark::poles::{default_w_min, zero_contour_map, PoleSet, Rect};

use crate::cache::{write_atomic, Cache, PoleKey};
use crate::config::RunConfig;
use crate::error::CliError;

/// Largest denominator tried when reading grid values as fractions.
const MAX_DEN: i64 = 1000;

pub struct Session {
    pub cfg: RunConfig,
    pub hash: String,
    pub m: ModelParams,
    pub state: BoundState,
    pub cache: Cache,
    /// Continue sweeps from their partial files.
    pub resume: bool,
    built: OnceLock<(Expansion, String)>,
}

/// A grid value as n/d when it is one, for exact lattice placement.
fn fraction(v: f64) -> Option<(i64, i64)> {
    (1..=MAX_DEN).find_map(|d| {
        let n = (v * d as f64).round();
        ((v * d as f64 - n).abs() < 1e-9 * (1.0 + n.abs())).then_some((n as i64, d))
    })
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Session {
    pub fn new(cfg: RunConfig) -> Result<Session, CliError> {
        let ctx = PrecisionContext::new(cfg.precision.digits)?;
        let m = ModelParams::new(cfg.model.well, cfg.model.field, ctx)?;
        let states = m.bound_states();
        let state = match cfg.model.state {
            Some(q) => states.into_iter().min_by(|a, b| (a.q.to_f64() - q).abs().total_cmp(&(b.q.to_f64() - q).abs())),
            None => states.into_iter().max_by(|a, b| a.q.total_cmp(&b.q)),
        }
        .ok_or_else(|| CliError::Config("the well has no bound state".into()))?;
        let cache = Cache::new(cfg.cache_dir());
        Ok(Session { hash: cfg.hash(), cfg, m, state, cache, resume: false, built: OnceLock::new() })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.outputs.dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let p = self.out(name);
        write_atomic(&p, text.as_bytes())?;
        Ok(p)
    }

    /// `name.csv`, plus `name.full.csv` when the full-precision dump is on.
    fn write_field(&self, name: &str, field: &WavefunctionField) -> Result<Vec<PathBuf>, CliError> {
        let mut files = vec![self.write(&format!("{name}.csv"), &field.to_csv())?];
        if self.cfg.outputs.full_precision {
            files.push(self.write(&format!("{name}.full.csv"), &field.to_csv_full(self.m.ctx.digits as usize))?);
        }
        Ok(files)
    }

    /// Exact MPFR value of a grid coordinate.
    pub fn float(&self, v: f64) -> Float {
        let p = self.m.bits();
        match fraction(v) {
            Some((n, d)) => Float::with_val(p, Float::with_val(p, n) / d),
            None => Float::with_val(p, v),
        }
    }

    /// Lower truncation from the config or from the spectral weight.
    pub fn z_min(&self) -> Result<f64, CliError> {
        match self.cfg.contour.z_min {
            Some(a) => Ok(a),
            None => {
                let from = default_w_min(&self.m, self.cfg.contour.s.to_f64());
                Ok(lower_cut(&self.m, &self.state, from, self.cfg.contour.weight_floor)?)
            }
        }
    }

    /// Certified pole set covering the contour window.
    pub fn pole_set(&self) -> Result<(PoleSet, String), CliError> {
        let key = PoleKey { depth: self.cfg.poles.depth, w_min: self.z_min()?, w_max: self.cfg.contour.z_max + self.cfg.poles.margin };
        let (set, id, _) = self.cache.poles(&self.m, &key)?;
        Ok((set, id))
    }

    fn x_values(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.cfg.grids;
        let mut xs = g.x.values()?;
        xs.extend(&g.detectors);
        if !self.cfg.analysis.norm_times.is_empty() {
            // the audit samples multiples of its step
            xs.push(self.cfg.analysis.audit.x_right);
            xs.push(self.cfg.analysis.audit.dx_out);
        }
        Ok(xs)
    }

    fn t_max(&self) -> Result<f64, CliError> {
        let g = &self.cfg.grids;
        let mut ts = g.t.values()?;
        ts.extend(g.t_series.values()?);
        ts.extend(&self.cfg.analysis.norm_times);
        Ok(ts.into_iter().fold(0.0, f64::max))
    }

    /// Contour for the configured grids, aligned so that grid points are
    /// lattice points.
    pub fn contour(&self, poles: &PoleSet) -> Result<ContourSpec, CliError> {
        let c = &self.cfg.contour;
        let xs = self.x_values()?;
        let x_max = xs.iter().copied().fold(0.0, f64::max);
        let mut spec = ContourSpec::design(&self.m, c.s, self.z_min()?, c.z_max, self.t_max()?, x_max, poles)?;
        if let Some(lm) = c.lattice_m {
            let f = self.m.field.to_f64();
            let b = spec.z_max(&self.m);
            let y_step = spec.y_stride as f64 / f64::from(spec.lattice_m);
            spec.n_bottom = ((b - spec.z_min) * f64::from(lm) / f).round() as usize;
            spec.y_stride = ((y_step * f64::from(lm)).floor() as usize).max(1);
            spec.lattice_m = lm;
        }
        let mut den = 1i64;
        for x in xs.iter().filter(|x| **x >= 0.0) {
            if let Some((_, d)) = fraction(*x) {
                den = den / gcd(den, d) * d;
            }
        }
        if den > MAX_DEN {
            return Err(CliError::Config(format!("grid positions need a lattice refinement of {den}")));
        }
        Ok(if c.lattice_m.is_some() { spec } else { spec.aligned(&self.m, den as u32) })
    }

    /// Expansion for this configuration, built on first use.
    pub fn expansion(&self) -> Result<&(Expansion, String), CliError> {
        if let Some(e) = self.built.get() {
            return Ok(e);
        }
        let (poles, id) = self.pole_set()?;
        let spec = self.contour(&poles)?;
        let e = Expansion::new(&self.m, &self.state, &spec, &poles, self.cfg.contour.amplitude_tol)?;
        Ok(self.built.get_or_init(|| (e, id)))
    }

    /// Amplitude table of the expansion, next to the other outputs.
    fn amplitudes(&self) -> Result<PathBuf, CliError> {
        let (e, _) = self.expansion()?;
        self.write("amplitudes.txt", &e.amplitude_text(self.m.ctx.digits as usize, &self.hash))
    }

    fn meta(&self) -> Result<FieldMeta, CliError> {
        let (e, id) = self.expansion()?;
        Ok(FieldMeta { config_hash: self.hash.clone(), pole_set_id: id.clone(), contour_id: e.spec.id() })
    }

    /// ψ on xs × ts, one table per x, spread over a bounded pool of worker
    /// threads. Finished columns are appended to a partial file so that an
    /// interrupted sweep can be resumed.
    pub fn sweep(&self, label: &str, xs: &[f64], ts: &[f64]) -> Result<WavefunctionField, CliError> {
        let (e, _) = self.expansion()?;
        let p = self.m.bits();
        let xf: Vec<Float> = xs.iter().map(|x| self.float(*x)).collect();
        let tf: Vec<Float> = ts.iter().map(|t| self.float(*t)).collect();
        let (nx, nt) = (xs.len(), ts.len());
        let mut columns: Vec<Option<Vec<MpComplex>>> = vec![None; nx];
        let path = self.cache.sweep_path(&self.hash, label);
        let header = format!("# sweep {} {label} {nx} {nt} {p}", self.hash);
        if self.resume {
            if let Ok(text) = fs::read_to_string(&path) {
                read_partial(&text, &header, p, nt, &mut columns);
            }
        }
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut log = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut text = format!("{header}\n");
        for (ix, c) in columns.iter().enumerate() {
            if let Some(c) = c {
                text.push_str(&partial_line(ix, c));
            }
        }
        log.write_all(text.as_bytes()).map_err(|e| CliError::io(&path, e))?;

        let pending: Vec<usize> = (0..nx).filter(|&i| columns[i].is_none()).collect();
        let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(pending.len()).max(1);
        let next = AtomicUsize::new(0);
        let column = |ix: usize| -> Result<Vec<MpComplex>, CliError> {
            let tab = e.table(&xf[ix])?;
            Ok(tf.iter().map(|t| tab.psi(t)).collect())
        };
        let mut failure = None;
        std::thread::scope(|sc| {
            let (tx, rx) = mpsc::channel();
            for _ in 0..threads {
                let tx = tx.clone();
                let (next, pending, column) = (&next, &pending, &column);
                sc.spawn(move || loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    if k >= pending.len() {
                        break;
                    }
                    if tx.send((pending[k], column(pending[k]))).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for (ix, r) in rx {
                match r {
                    Ok(c) => {
                        if let Err(err) = log.write_all(partial_line(ix, &c).as_bytes()).and_then(|_| log.flush()) {
                            failure.get_or_insert(CliError::io(&path, err));
                        }
                        columns[ix] = Some(c);
                    }
                    Err(err) => {
                        next.store(usize::MAX / 2, Ordering::SeqCst);
                        failure.get_or_insert(err);
                    }
                }
            }
        });
        if let Some(err) = failure {
            return Err(err);
        }
        drop(log);
        let _ = fs::remove_file(&path);
        let mut values = vec![MpComplex::zero(p); nx * nt];
        for (ix, c) in columns.into_iter().enumerate() {
            for (it, v) in c.expect("every column computed").into_iter().enumerate() {
                values[it * nx + ix] = v;
            }
        }
        Ok(WavefunctionField { x_grid: xf, t_grid: tf, values, meta: self.meta()? })
    }

    /// Pole-set file and zero-line map.
    pub fn cmd_poles(&self) -> Result<Vec<PathBuf>, CliError> {
        let (set, _) = self.pole_set()?;
        let digits = self.m.ctx.digits as usize;
        let mut files = vec![self.write("poles.txt", &set.to_text(digits, &self.hash))?];
        let depth = self.cfg.poles.depth.to_f64();
        let window = Rect { re_min: set.w_min, re_max: set.w_max, im_min: -1.5 * depth, im_max: 0.5 * depth };
        let coarse = self.m.with_ctx(PrecisionContext::new(self.cfg.poles.map_digits)?);
        let map = zero_contour_map(&coarse, &window, self.cfg.poles.map_nx, self.cfg.poles.map_ny)?;
        let mut s = format!("# config {}\nre_w,im_w,re_d,im_d\n", self.hash);
        for (i, y) in map.im_axis.iter().enumerate() {
            for (j, x) in map.re_axis.iter().enumerate() {
                let k = i * map.re_axis.len() + j;
                let _ = writeln!(s, "{},{},{},{}", fmt17(*x), fmt17(*y), fmt17(map.re_part[k]), fmt17(map.im_part[k]));
            }
        }
        files.push(self.write("zero_map.csv", &s)?);
        Ok(files)
    }

    /// ψ(x, 0) on the x grid with the error against the initial state.
    pub fn cmd_reconstruct(&self) -> Result<Vec<PathBuf>, CliError> {
        let xs = self.cfg.grids.x.values()?;
        let field = self.sweep("reconstruct", &xs, &[0.0])?;
        let (mut err, mut peak, mut imag) = (0.0f64, 0.0f64, 0.0f64);
        for (ix, x) in field.x_grid.iter().enumerate() {
            let exact = self.m.psi_bound(x, &self.state)?.to_f64();
            let v = field.at(0, ix);
            err = err.max((v.re.to_f64() - exact).abs());
            peak = peak.max(exact.abs());
            imag = imag.max(v.im.to_f64().abs());
        }
        let summary = format!(
            "# config {}\nmax_abs_error {}\nmax_rel_error {}\nmax_abs_imag {}\n",
            self.hash,
            fmt17(err),
            fmt17(err / peak),
            fmt17(imag)
        );
        let mut files = self.write_field("reconstruct", &field)?;
        files.extend([self.write("reconstruct_summary.txt", &summary)?, self.amplitudes()?]);
        Ok(files)
    }

    fn arrivals(&self, field: &WavefunctionField) -> Result<(Vec<ArrivalRecord>, String), CliError> {
        let (q, f) = (self.state.q.to_f64(), self.m.field.to_f64());
        let mut recs = Vec::new();
        let mut s = format!("# config {}\nx_obs,t_eta,t_peak,fwhm,peak_density,truncated\n", self.hash);
        for x in &self.cfg.grids.detectors {
            let r = peak_arrival(field, *x, q, f)?;
            let eta = r.t_eta.map(fmt17).unwrap_or_else(|| "nan".into());
            let _ = writeln!(s, "{},{},{},{},{},{}", fmt17(r.x_obs), eta, fmt17(r.t_peak), fmt17(r.fwhm), fmt17(r.peak_density), r.truncated);
            recs.push(r);
        }
        Ok((recs, s))
    }

    /// Time series at the detectors, with simple-man arrival times alongside.
    pub fn cmd_evolve(&self) -> Result<Vec<PathBuf>, CliError> {
        let field = self.sweep("series", &self.cfg.grids.detectors, &self.cfg.grids.t_series.values()?)?;
        let (_, table) = self.arrivals(&field)?;
        let mut files = self.write_field("series", &field)?;
        files.extend([self.write("arrivals.csv", &table)?, self.amplitudes()?]);
        Ok(files)
    }

    /// Density on the x × t grid.
    pub fn cmd_map(&self) -> Result<Vec<PathBuf>, CliError> {
        let field = self.sweep("map", &self.cfg.grids.x.values()?, &self.cfg.grids.t.values()?)?;
        let mut files = self.write_field("map", &field)?;
        files.extend([self.write("map.mat", &field.to_matrix())?, self.amplitudes()?]);
        Ok(files)
    }

    /// Arrival table, trajectory fits and, if requested, the norm audit.
    pub fn cmd_arrival(&self) -> Result<Vec<PathBuf>, CliError> {
        let field = self.sweep("series", &self.cfg.grids.detectors, &self.cfg.grids.t_series.values()?)?;
        let (recs, table) = self.arrivals(&field)?;
        let mut files = vec![self.write("arrivals.csv", &table)?, self.amplitudes()?];
        let f = self.m.field.to_f64();
        let usable: Vec<ArrivalRecord> = recs.into_iter().filter(|r| !r.truncated && r.t_eta.is_some()).collect();
        let mut s = format!("# config {}\nvariant,x0,v0,t0,residual,sigma_0,sigma_1,detectors\n", self.hash);
        for v in &self.cfg.analysis.fit {
            let fit = fit_trajectory(&usable, f, *v)?;
            let _ = writeln!(
                s,
                "{:?},{},{},{},{},{},{},{}",
                v,
                fmt17(fit.x0),
                fmt17(fit.v0),
                fmt17(fit.t0),
                fmt17(fit.residual),
                fmt17(fit.sigma[0]),
                fmt17(fit.sigma[1]),
                usable.len()
            );
        }
        files.push(self.write("fit.csv", &s)?);
        if !self.cfg.analysis.norm_times.is_empty() {
            let (e, _) = self.expansion()?;
            let recs = norm_audit(e, &self.cfg.analysis.norm_times, &self.cfg.analysis.audit)?;
            let mut s = format!("# config {}\nt,inside,outside,escaped,deviation\n", self.hash);
            for r in recs {
                let _ = writeln!(s, "{},{},{},{},{}", fmt17(r.t), fmt17(r.inside), fmt17(r.outside), fmt17(r.escaped), fmt17(r.deviation));
            }
            files.push(self.write("norm.csv", &s)?);
        }
        Ok(files)
    }

    /// Grid runs at successively halved steps compared with the expansion.
    /// Exceeding the threshold is reported after the files are written.
    pub fn cmd_oracle(&self) -> Result<Vec<PathBuf>, CliError> {
        let o = &self.cfg.oracle;
        let xs = self.cfg.grids.x.values()?;
        let ts = self.cfg.grids.t.values()?;
        if o.levels < 1 {
            return Err(CliError::Config("oracle.levels must be at least 1".into()));
        }
        let x_view = xs.iter().copied().fold(0.0, f64::max);
        // the configured onset is an offset beyond the largest output x
        let absorber = Absorber { onset: x_view + o.absorber.onset, ..o.absorber };
        let base = GridSpec { x_lo: -self.m.l().to_f64(), x_hi: absorber.onset + absorber.width, dx: o.dx, dt: o.dt, absorber };
        let runs = (0..o.levels).map(|k| evolve_grid(&self.m, &self.state, &base.refined(1 << k), &xs, &ts, true)).collect::<Result<Vec<_>, _>>()?;
        let finest = runs.last().expect("at least one level");
        let spectral = self.sweep("oracle", &xs, &ts)?;
        let l2 = density_l2(&finest.field, &spectral)?;
        let mut s = format!("# config {}\n", self.hash);
        let _ = writeln!(s, "l2_grid_vs_expansion {}", fmt17(l2));
        let _ = writeln!(s, "threshold {}", fmt17(o.threshold));
        for (k, r) in runs.iter().enumerate() {
            let _ = writeln!(s, "level {k} dx {} dt {} accounting_error {} absorbed {}", fmt17(o.dx / f64::from(1u32 << k)), fmt17(o.dt / f64::from(1u32 << k)), fmt17(r.accounting_error()), fmt17(r.absorbed));
        }
        for k in 2..runs.len() {
            let a = density_l2(&runs[k - 2].field, &runs[k - 1].field)?;
            let b = density_l2(&runs[k - 1].field, &runs[k].field)?;
            let _ = writeln!(s, "convergence_ratio {k} {}", fmt17(a / b));
        }
        let mut grid = finest.field.clone();
        grid.meta = FieldMeta { config_hash: self.hash.clone(), ..grid.meta };
        let files = vec![self.write("oracle_report.txt", &s)?, self.write("oracle_grid.csv", &grid.to_csv())?, self.write("oracle_expansion.csv", &spectral.to_csv())?, self.amplitudes()?];
        if l2 > o.threshold {
            return Err(CliError::Disagreement { l2, threshold: o.threshold });
        }
        Ok(files)
    }
}

fn partial_line(ix: usize, c: &[MpComplex]) -> String {
    let mut s = ix.to_string();
    for v in c {
        s.push(' ');
        s.push_str(&v.re.to_string_radix(16, None));
        s.push(' ');
        s.push_str(&v.im.to_string_radix(16, None));
    }
    s.push('\n');
    s
}

/// Columns from a partial file written by the same configuration. Lines
/// that are cut short or malformed are ignored.
fn read_partial(text: &str, header: &str, p: u32, nt: usize, columns: &mut [Option<Vec<MpComplex>>]) {
    let mut lines = text.split_inclusive('\n');
    if lines.next().map(str::trim_end) != Some(header) {
        return;
    }
    // a line without its newline may end inside a number
    for line in lines.filter(|l| l.ends_with('\n')) {
        let f: Vec<&str> = line.trim_end().split(' ').collect();
        if f.len() != 1 + 2 * nt {
            continue;
        }
        let Ok(ix) = f[0].parse::<usize>() else { continue };
        if ix >= columns.len() {
            continue;
        }
        let parse = |s: &str| Float::parse_radix(s, 16).ok().map(|v| Float::with_val(p, v));
        let vals: Option<Vec<MpComplex>> = (0..nt).map(|k| Some(MpComplex::from_parts(parse(f[1 + 2 * k])?, parse(f[2 + 2 * k])?))).collect();
        if let Some(v) = vals {
            columns[ix] = Some(v);
        }
    }
}
