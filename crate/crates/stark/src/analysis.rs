//! Observables from evolved wavefunctions: simple-man arrival times, pulse
//! peaks, exit-trajectory fits and norm bookkeeping.

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::evolve::{EvolveError, Expansion, WavefunctionField};
use crate::quad::gregory_weights;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("x_obs = {x_obs} lies before the exit point {x_exit}")]
    Domain { x_obs: f64, x_exit: f64 },
    #[error("fit is rank deficient: {0}")]
    RankDeficient(String),
    #[error("no pulse at x = {0}")]
    NoPulse(f64),
    #[error("x = {0} is not on the field grid")]
    OffGrid(f64),
    #[error("tail beyond the audited range carries {0:e}")]
    Coverage(f64),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

/// Classical exit x_exit = −Q/F.
pub fn x_exit(q: f64, f: f64) -> f64 {
    -q / f
}

/// Arrival time for a particle released at rest from the exit point.
pub fn t_eta(x_obs: f64, q: f64, f: f64) -> Result<f64, AnalysisError> {
    let xe = x_exit(q, f);
    if x_obs < xe {
        return Err(AnalysisError::Domain { x_obs, x_exit: xe });
    }
    Ok((2.0 * (x_obs - xe) / f).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub x_obs: f64,
    pub t_peak: f64,
    /// None in front of the exit point.
    pub t_eta: Option<f64>,
    pub fwhm: f64,
    pub peak_density: f64,
    /// Peak at the window edge or pulse not closed on one side.
    pub truncated: bool,
    /// Time of a secondary maximum above half the main one.
    pub secondary: Option<f64>,
}

/// Peak and width of a density pulse sampled on ascending times.
pub fn pulse(ts: &[f64], dens: &[f64], x_obs: f64) -> Result<ArrivalRecord, AnalysisError> {
    let n = ts.len();
    if n < 3 || dens.len() != n {
        return Err(AnalysisError::NoPulse(x_obs));
    }
    let (imax, &dmax) = dens.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
    if dmax <= 0.0 {
        return Err(AnalysisError::NoPulse(x_obs));
    }
    let mut truncated = imax == 0 || imax == n - 1;
    // parabola through the three samples around the maximum
    let t_peak = if truncated {
        ts[imax]
    } else {
        let (y0, y1, y2) = (dens[imax - 1], dens[imax], dens[imax + 1]);
        let (t0, t1, t2) = (ts[imax - 1], ts[imax], ts[imax + 1]);
        let num = (t1 - t0).powi(2) * (y1 - y2) - (t1 - t2).powi(2) * (y1 - y0);
        let den = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0);
        if den != 0.0 {
            t1 - 0.5 * num / den
        } else {
            t1
        }
    };
    let half = 0.5 * dmax;
    let cross = |i: usize, j: usize| ts[i] + (half - dens[i]) * (ts[j] - ts[i]) / (dens[j] - dens[i]);
    let left = (0..imax).rev().find(|&i| dens[i] < half).map(|i| cross(i, i + 1));
    let right = (imax + 1..n).find(|&i| dens[i] < half).map(|i| cross(i - 1, i));
    if left.is_none() || right.is_none() {
        truncated = true;
    }
    let fwhm = right.unwrap_or(ts[n - 1]) - left.unwrap_or(ts[0]);
    // local maxima outside the main pulse that reach half height
    let lo = left.unwrap_or(ts[0]);
    let hi = right.unwrap_or(ts[n - 1]);
    let secondary = (1..n - 1)
        .filter(|&i| (ts[i] < lo || ts[i] > hi) && dens[i] >= half && dens[i] >= dens[i - 1] && dens[i] >= dens[i + 1])
        .max_by(|&a, &b| dens[a].total_cmp(&dens[b]))
        .map(|i| ts[i]);
    Ok(ArrivalRecord { x_obs, t_peak, t_eta: None, fwhm, peak_density: dmax, truncated, secondary })
}

/// Arrival record for the grid column nearest `x_obs` (must be within 1e-9).
pub fn peak_arrival(field: &WavefunctionField, x_obs: f64, q: f64, f: f64) -> Result<ArrivalRecord, AnalysisError> {
    let ix = field
        .x_grid
        .iter()
        .position(|x| (x.to_f64() - x_obs).abs() < 1e-9)
        .ok_or(AnalysisError::OffGrid(x_obs))?;
    let ts: Vec<f64> = field.t_grid.iter().map(Float::to_f64).collect();
    let dens: Vec<f64> = (0..ts.len()).map(|it| field.density(it, ix)).collect();
    let mut r = pulse(&ts, &dens, x_obs)?;
    r.t_eta = t_eta(x_obs, q, f).ok();
    Ok(r)
}

/// Which of the three trajectory parameters is pinned. With the
/// acceleration fixed, x(t) has only two free coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitVariant {
    /// t0 = 0: fit x0 and v0.
    ExitAtZero,
    /// v0 = 0: fit x0 and t0.
    ExitAtRest,
    /// All three free; always rank deficient, kept so callers get a clear error.
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFit {
    pub variant: FitVariant,
    pub x0: f64,
    pub v0: f64,
    pub t0: f64,
    /// Root-mean-square residual in x.
    pub residual: f64,
    /// Standard errors of (x0, v0) or (x0, t0).
    pub sigma: [f64; 2],
}

/// Least squares for x = x0 + v0(t − t0) + F(t − t0)²/2 on (t_peak, x_obs).
pub fn fit_trajectory(records: &[ArrivalRecord], f: f64, variant: FitVariant) -> Result<TrajectoryFit, AnalysisError> {
    if variant == FitVariant::Free {
        return Err(AnalysisError::RankDeficient("x0, v0 and t0 enter through two coefficients only".into()));
    }
    if records.len() < 3 {
        return Err(AnalysisError::RankDeficient(format!("{} records, need at least 3", records.len())));
    }
    // x − F t²/2 = c0 + c1 t, with c0 = x0 − v0 t0 + F t0²/2 and c1 = v0 − F t0
    let n = records.len() as f64;
    let (mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for r in records {
        let y = r.x_obs - 0.5 * f * r.t_peak * r.t_peak;
        st += r.t_peak;
        stt += r.t_peak * r.t_peak;
        sy += y;
        sty += r.t_peak * y;
    }
    let det = n * stt - st * st;
    let spread = stt / n - (st / n).powi(2);
    if spread <= 1e-12 * (1.0 + stt / n) || det.abs() < 1e-300 {
        return Err(AnalysisError::RankDeficient("arrival times do not spread".into()));
    }
    let c1 = (n * sty - st * sy) / det;
    let c0 = (sy - c1 * st) / n;
    let rss: f64 = records
        .iter()
        .map(|r| {
            let y = r.x_obs - 0.5 * f * r.t_peak * r.t_peak;
            (y - c0 - c1 * r.t_peak).powi(2)
        })
        .sum();
    let dof = (records.len() as f64 - 2.0).max(1.0);
    let s2 = rss / dof;
    // covariance of (c0, c1) is s²·(AᵀA)⁻¹
    let var_c0 = s2 * stt / det;
    let var_c1 = s2 * n / det;
    let cov01 = -s2 * st / det;
    let residual = (rss / n).sqrt();
    Ok(match variant {
        FitVariant::ExitAtZero => TrajectoryFit { variant, x0: c0, v0: c1, t0: 0.0, residual, sigma: [var_c0.sqrt(), var_c1.sqrt()] },
        _ => {
            // v0 = 0: t0 = −c1/F and x0 = c0 − F t0²/2
            let t0 = -c1 / f;
            let x0 = c0 - 0.5 * f * t0 * t0;
            // x0 = c0 − c1²/(2F): gradient (1, −c1/F)
            let g = -c1 / f;
            let var_x0 = var_c0 + 2.0 * g * cov01 + g * g * var_c1;
            TrajectoryFit { variant, x0, v0: 0.0, t0, residual, sigma: [var_x0.max(0.0).sqrt(), var_c1.sqrt() / f] }
        }
    })
}

/// Norm bookkeeping at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    pub inside: f64,
    pub outside: f64,
    /// Probability that has crossed the right edge, ∫ j(x_right, τ) dτ.
    pub escaped: f64,
    pub deviation: f64,
}

/// Grid for a norm audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    /// Outside grid [0, x_right] in steps of `dx_out`.
    pub x_right: f64,
    pub dx_out: f64,
    /// Inside grid [−L, 0] in steps of `dx_in`.
    pub dx_in: f64,
    /// Time step for the flux integral.
    pub dt_flux: f64,
}

/// |∫|ψ|²dx + escaped flux − ‖φ‖²| / ‖φ‖² at each requested time.
/// The requested times must be multiples of `dt_flux`.
pub fn norm_audit(e: &Expansion, times: &[f64], grid: &AuditGrid) -> Result<Vec<NormRecord>, AnalysisError> {
    let m = &e.m;
    let p = m.bits();
    let norm0 = m.bound_norm_sqr(&e.state).to_f64();
    let tfs: Vec<Float> = times.iter().map(|t| Float::with_val(p, *t)).collect();
    let mut inside = vec![0.0; times.len()];
    let mut outside = vec![0.0; times.len()];
    let order = 8;
    if !m.is_delta() {
        let l = m.l().to_f64();
        let n = ((l / grid.dx_in).round() as usize).max(2 * order);
        let dx = l / n as f64;
        let w = gregory_weights(n, order, 64);
        for (i, wi) in w.iter().enumerate() {
            let x = Float::with_val(p, -l + i as f64 * dx);
            let tab = e.table(&x)?;
            for (k, t) in tfs.iter().enumerate() {
                inside[k] += wi.to_f64() * dx * tab.psi(t).norm_sqr().to_f64();
            }
        }
    }
    let n = ((grid.x_right / grid.dx_out).round() as usize).max(2 * order);
    let dx = grid.x_right / n as f64;
    let w = gregory_weights(n, order, 64);
    for (i, wi) in w.iter().enumerate() {
        let x = e.lattice_point(i as f64 * dx);
        let tab = e.table(&x)?;
        for (k, t) in tfs.iter().enumerate() {
            outside[k] += wi.to_f64() * dx * tab.psi(t).norm_sqr().to_f64();
        }
    }
    // flux through the right edge, integrated in time
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let nt = ((t_end / grid.dt_flux).round() as usize).max(2 * order);
    let dt = t_end / nt as f64;
    let xr = e.lattice_point(n as f64 * dx);
    let tab = e.table(&xr)?;
    let tab_dx = e.table_dx(&xr)?;
    let flux: Vec<f64> = (0..=nt)
        .map(|i| {
            let t = Float::with_val(p, i as f64 * dt);
            let psi = tab.psi(&t);
            let d = tab_dx.psi(&t);
            // Im(ψ*·ψ′)
            Float::with_val(p, Float::with_val(p, &psi.re * &d.im) - Float::with_val(p, &psi.im * &d.re)).to_f64()
        })
        .collect();
    let cumulative = |upto: usize| -> f64 {
        if upto == 0 {
            return 0.0;
        }
        if upto >= 2 * order {
            let w = gregory_weights(upto, order, 64);
            w.iter().zip(&flux).map(|(w, j)| w.to_f64() * j * dt).sum()
        } else {
            (0..upto).map(|i| 0.5 * (flux[i] + flux[i + 1]) * dt).sum()
        }
    };
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let escaped = cumulative((t / dt).round() as usize);
            let total = inside[k] + outside[k] + escaped;
            NormRecord { t: *t, inside: inside[k], outside: outside[k], escaped, deviation: (total - norm0).abs() / norm0 }
        })
        .collect())
}
