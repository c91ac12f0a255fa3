//! Grid propagator for the same sudden switch-on problem: Crank–Nicolson on
//! a uniform mesh with a complex absorbing potential at the far end.
//!
//! The contact interaction becomes a single-node delta next to a Neumann
//! wall, with its strength chosen so that the discrete bound state r^j has
//! energy exactly −1/2. Norm is measured with trapezoid weights (½ at the
//! wall node), for which the real part of the discrete Hamiltonian is
//! symmetric; the norm lost in one step is then exactly
//! 2·dt·⟨ψ_mid|W|ψ_mid⟩, which is what `absorbed` accumulates.

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::evolve::{FieldMeta, WavefunctionField};
use crate::model::{BoundState, ModelParams, Well};
use crate::mpnum::MpComplex;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid: {0}")]
    Config(String),
    #[error("probability {0:e} reached the outer wall past the absorber")]
    DomainTooSmall(f64),
    #[error("norm grew by {growth:e} in step {step}")]
    Unstable { step: usize, growth: f64 },
}

/// W(x) = strength·((x − onset)/width)² on [onset, onset + width].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Absorber {
    pub strength: f64,
    pub onset: f64,
    pub width: f64,
}

impl Default for Absorber {
    /// Reflects below 1e-6 for free packets with k ≥ 0.3.
    fn default() -> Self {
        Absorber { strength: 0.5, onset: 0.0, width: 120.0 }
    }
}

impl Absorber {
    pub fn at(&self, x: f64) -> f64 {
        if x <= self.onset || self.width <= 0.0 {
            0.0
        } else {
            let u = ((x - self.onset) / self.width).min(1.0);
            self.strength * u * u
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub dx: f64,
    pub dt: f64,
    pub absorber: Absorber,
}

impl GridSpec {
    /// Mesh for observing x ≤ x_view: absorber starts 10 beyond it and the
    /// wall sits one absorber width further.
    pub fn for_view(m: &ModelParams, x_view: f64, dx: f64, dt: f64) -> GridSpec {
        let x_lo = -m.l().to_f64();
        let absorber = Absorber { onset: x_view + 10.0, ..Absorber::default() };
        GridSpec { x_lo, x_hi: absorber.onset + absorber.width, dx, dt, absorber }
    }

    /// Same domain with both steps divided by `k`.
    pub fn refined(&self, k: u32) -> GridSpec {
        GridSpec { dx: self.dx / f64::from(k), dt: self.dt / f64::from(k), ..*self }
    }

    fn nodes(&self) -> Result<usize, OracleError> {
        if !(self.dx > 0.0 && self.dt > 0.0 && self.x_hi > self.x_lo) {
            return Err(OracleError::Config("need dx > 0, dt > 0 and x_hi > x_lo".into()));
        }
        let n = ((self.x_hi - self.x_lo) / self.dx).round();
        if (n * self.dx - (self.x_hi - self.x_lo)).abs() > 1e-9 * (self.x_hi - self.x_lo) {
            return Err(OracleError::Config("domain length is not a multiple of dx".into()));
        }
        Ok(n as usize)
    }

    fn index_of(&self, x: f64) -> Result<usize, OracleError> {
        let r = (x - self.x_lo) / self.dx;
        if (r - r.round()).abs() > 1e-6 || r < -0.5 {
            return Err(OracleError::Config(format!("x = {x} is not a mesh node")));
        }
        Ok(r.round() as usize)
    }
}

/// Tridiagonal system with constant coefficients, factored once.
struct Thomas {
    lower: Vec<Complex64>,
    diag_inv: Vec<Complex64>,
    upper: Vec<Complex64>,
}

impl Thomas {
    fn new(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64]) -> Thomas {
        let n = diag.len();
        let mut c = vec![Complex64::default(); n];
        let mut dinv = vec![Complex64::default(); n];
        dinv[0] = 1.0 / diag[0];
        for i in 1..n {
            c[i - 1] = upper[i - 1] * dinv[i - 1];
            dinv[i] = 1.0 / (diag[i] - lower[i] * c[i - 1]);
        }
        Thomas { lower: lower.to_vec(), diag_inv: dinv, upper: c }
    }

    fn solve(&self, rhs: &mut [Complex64]) {
        let n = rhs.len();
        rhs[0] *= self.diag_inv[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.diag_inv[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] - self.upper[i] * rhs[i + 1];
        }
    }
}

/// Discrete Hamiltonian: wall node 0 with a Neumann ghost, Dirichlet past
/// the last node.
struct Hamiltonian {
    diag: Vec<Complex64>,
    /// H[i][i+1]; H[i+1][i] equals it except H[0][1], which is doubled.
    off: f64,
    weights: Vec<f64>,
    absorb: Vec<f64>,
}

impl Hamiltonian {
    fn new(m: &ModelParams, g: &GridSpec, field_on: bool) -> Result<Hamiltonian, OracleError> {
        let n = g.nodes()? + 1;
        let dx = g.dx;
        let f = if field_on { m.field.to_f64() } else { 0.0 };
        let mut diag = Vec::with_capacity(n);
        let mut absorb = Vec::with_capacity(n);
        for j in 0..n {
            let x = g.x_lo + j as f64 * dx;
            // the field is held constant inside the absorber so that
            // particles do not keep accelerating there
            let mut v = if x > 0.0 { -f * x.min(g.absorber.onset) } else { 0.0 };
            if let Well::Finite { v0, .. } = m.well {
                let v0 = v0.to_f64();
                if x < -1e-12 {
                    v = -v0;
                } else if x.abs() <= 1e-12 {
                    v = -0.5 * v0;
                }
            }
            if j == 0 && m.is_delta() {
                v -= delta_strength(dx) / dx;
            }
            let w = g.absorber.at(x);
            absorb.push(w);
            diag.push(Complex64::new(1.0 / (dx * dx) + v, -w));
        }
        let mut weights = vec![dx; n];
        weights[0] = 0.5 * dx;
        Ok(Hamiltonian { diag, off: -0.5 / (dx * dx), weights, absorb })
    }

    fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let n = psi.len();
        for i in 0..n {
            let mut v = self.diag[i] * psi[i];
            if i > 0 {
                v += psi[i - 1] * self.off;
            }
            if i + 1 < n {
                let c = if i == 0 { 2.0 * self.off } else { self.off };
                v += psi[i + 1] * c;
            }
            out[i] = v;
        }
    }

    fn norm(&self, psi: &[Complex64]) -> f64 {
        psi.iter().zip(&self.weights).map(|(p, w)| p.norm_sqr() * w).sum()
    }
}

/// Delta strength g for which r^j with r + 1/r = 2 + dx² solves the wall row.
pub fn delta_strength(dx: f64) -> f64 {
    let r = discrete_decay(dx);
    (1.0 - r) / dx + 0.5 * dx
}

fn discrete_decay(dx: f64) -> f64 {
    let b = 1.0 + 0.5 * dx * dx;
    b - (b * b - 1.0).sqrt()
}

/// Discrete bound state, scaled to 1 at x = 0.
fn initial_state(m: &ModelParams, st: &BoundState, g: &GridSpec, h0: &Hamiltonian) -> Result<Vec<Complex64>, OracleError> {
    let n = h0.diag.len();
    if m.is_delta() {
        let r = discrete_decay(g.dx);
        return Ok((0..n).map(|j| Complex64::new(r.powi(j as i32), 0.0)).collect());
    }
    // inverse iteration on H − Q at zero field
    let q = st.q.to_f64();
    let lower: Vec<Complex64> = (0..n).map(|_| Complex64::new(h0.off, 0.0)).collect();
    let mut upper = lower.clone();
    upper[0] = Complex64::new(2.0 * h0.off, 0.0);
    let shift = q + 1e-9;
    let diag: Vec<Complex64> = h0.diag.iter().map(|d| Complex64::new(d.re - shift, 0.0)).collect();
    let solver = Thomas::new(&lower, &diag, &upper);
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    for _ in 0..8 {
        solver.solve(&mut v);
        let s = h0.norm(&v).sqrt();
        v.iter_mut().for_each(|c| *c /= s);
    }
    let i0 = g.index_of(0.0)?;
    let scale = v[i0].re;
    Ok(v.into_iter().map(|c| c / scale).collect())
}

/// Grid solution sampled on an output lattice, with norm bookkeeping.
#[derive(Clone, Debug)]
pub struct GridRun {
    pub field: WavefunctionField,
    pub initial_norm: f64,
    /// Norm left on the mesh at the final time.
    pub final_norm: f64,
    /// Norm removed by the absorber.
    pub absorbed: f64,
    /// Energy of the initial state on the mesh at zero field.
    pub initial_energy: f64,
}

impl GridRun {
    /// |final + absorbed − initial| / initial.
    pub fn accounting_error(&self) -> f64 {
        (self.final_norm + self.absorbed - self.initial_norm).abs() / self.initial_norm
    }
}

/// Propagate the bound state `st` after the field is switched on at t = 0.
/// `x_out` must be mesh nodes and `t_out` multiples of dt.
pub fn evolve_grid(m: &ModelParams, st: &BoundState, g: &GridSpec, x_out: &[f64], t_out: &[f64], field_on: bool) -> Result<GridRun, OracleError> {
    let h0 = Hamiltonian::new(m, g, false)?;
    let h = Hamiltonian::new(m, g, field_on)?;
    let mut psi = initial_state(m, st, g, &h0)?;
    let n = psi.len();
    let mut tmp = vec![Complex64::default(); n];
    h0.apply(&psi, &mut tmp);
    let initial_norm = h0.norm(&psi);
    let initial_energy = psi.iter().zip(&tmp).zip(&h0.weights).map(|((p, hp), w)| (p.conj() * hp).re * w).sum::<f64>() / initial_norm;

    let ix: Vec<usize> = x_out.iter().map(|x| g.index_of(*x)).collect::<Result<_, _>>()?;
    if ix.iter().any(|&i| i >= n) {
        return Err(OracleError::Config("output x beyond the mesh".into()));
    }
    let steps_at: Vec<usize> = t_out
        .iter()
        .map(|t| {
            let r = t / g.dt;
            if (r - r.round()).abs() > 1e-6 || r < -0.5 {
                Err(OracleError::Config(format!("t = {t} is not a multiple of dt")))
            } else {
                Ok(r.round() as usize)
            }
        })
        .collect::<Result<_, _>>()?;

    // (1 + i dt H/2) ψ⁺ = (1 − i dt H/2) ψ
    let half = Complex64::new(0.0, 0.5 * g.dt);
    let lower: Vec<Complex64> = (0..n).map(|_| half * h.off).collect();
    let mut upper = lower.clone();
    upper[0] = half * (2.0 * h.off);
    let diag: Vec<Complex64> = h.diag.iter().map(|d| 1.0 + half * d).collect();
    let solver = Thomas::new(&lower, &diag, &upper);

    let nx = x_out.len();
    let mut values = vec![Complex64::default(); nx * t_out.len()];
    let last = steps_at.iter().copied().max().unwrap_or(0);
    let mut absorbed = 0.0;
    let mut norm = initial_norm;
    let record = |step: usize, psi: &[Complex64], values: &mut Vec<Complex64>| {
        for (it, s) in steps_at.iter().enumerate() {
            if *s == step {
                for (k, &i) in ix.iter().enumerate() {
                    values[it * nx + k] = psi[i];
                }
            }
        }
    };
    record(0, &psi, &mut values);
    let edge = ((0.05 * g.absorber.width / g.dx) as usize).max(1).min(n);
    let mut mid = vec![Complex64::default(); n];
    for step in 1..=last {
        h.apply(&psi, &mut tmp);
        let mut rhs: Vec<Complex64> = psi.iter().zip(&tmp).map(|(p, hp)| p - half * hp).collect();
        solver.solve(&mut rhs);
        for i in 0..n {
            mid[i] = 0.5 * (psi[i] + rhs[i]);
        }
        absorbed += 2.0 * g.dt * mid.iter().zip(&h.absorb).zip(&h.weights).map(|((p, a), w)| p.norm_sqr() * a * w).sum::<f64>();
        psi = rhs;
        let new_norm = h.norm(&psi);
        if new_norm - norm > 1e-10 * initial_norm {
            return Err(OracleError::Unstable { step, growth: (new_norm - norm) / initial_norm });
        }
        norm = new_norm;
        record(step, &psi, &mut values);
    }
    let wall: f64 = psi[n - edge..].iter().map(|p| p.norm_sqr() * g.dx).sum();
    if wall > 1e-8 * initial_norm {
        return Err(OracleError::DomainTooSmall(wall / initial_norm));
    }
    let p = 53;
    let field = WavefunctionField {
        x_grid: x_out.iter().map(|x| Float::with_val(p, *x)).collect(),
        t_grid: t_out.iter().map(|t| Float::with_val(p, *t)).collect(),
        values: values.iter().map(|c| MpComplex::from_parts(Float::with_val(p, c.re), Float::with_val(p, c.im))).collect(),
        meta: FieldMeta { config_hash: String::new(), pole_set_id: "grid".into(), contour_id: format!("dx={} dt={}", g.dx, g.dt) },
    };
    Ok(GridRun { field, initial_norm, final_norm: norm, absorbed, initial_energy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    /// (k, reflected fraction).
    pub per_momentum: Vec<(f64, f64)>,
    pub worst: f64,
}

/// Send a free Gaussian packet of momentum k into the absorber and measure
/// the fraction that comes back, for each k.
pub fn absorber_calibrate(absorber: &Absorber, dx: f64, momenta: &[f64]) -> Result<ReflectionReport, OracleError> {
    let mut per = Vec::new();
    for &k in momenta {
        if k <= 0.0 {
            return Err(OracleError::Config("momenta must be positive".into()));
        }
        let sigma = (6.0 / k).max(5.0);
        let x_hi = absorber.onset + absorber.width;
        let x0 = absorber.onset - 6.0 * sigma;
        let x_lo = x0 - 6.0 * sigma;
        let n = ((x_hi - x_lo) / dx).round() as usize;
        let x_lo = x_hi - n as f64 * dx;
        // slowest significant component k/2 must go in and come back out
        let t_run = 2.0 * (x_hi - x0) / (0.5 * k);
        let dt = (0.05 / (k * k)).min(0.1).min(0.5 * dx / k);
        let steps = (t_run / dt).ceil() as usize;
        let xs: Vec<f64> = (0..=n).map(|j| x_lo + j as f64 * dx).collect();
        let mut psi: Vec<Complex64> = xs
            .iter()
            .map(|x| {
                let u = (x - x0) / sigma;
                Complex64::from_polar((-0.5 * u * u).exp(), k * x)
            })
            .collect();
        let off = -0.5 / (dx * dx);
        let half = Complex64::new(0.0, 0.5 * dt);
        let w: Vec<f64> = xs.iter().map(|x| absorber.at(*x)).collect();
        let diag: Vec<Complex64> = w.iter().map(|a| Complex64::new(1.0 / (dx * dx), -a)).collect();
        let lower: Vec<Complex64> = (0..=n).map(|_| half * off).collect();
        let mut upper = lower.clone();
        upper[0] = half * (2.0 * off);
        let d: Vec<Complex64> = diag.iter().map(|x| 1.0 + half * x).collect();
        let solver = Thomas::new(&lower, &d, &upper);
        let norm = |p: &[Complex64]| -> f64 { p.iter().zip(&xs).filter(|(_, x)| **x < absorber.onset).map(|(c, _)| c.norm_sqr() * dx).sum() };
        let n0 = norm(&psi);
        let mut hp = vec![Complex64::default(); n + 1];
        for _ in 0..steps {
            for i in 0..=n {
                let mut v = diag[i] * psi[i];
                if i > 0 {
                    v += psi[i - 1] * off;
                }
                if i < n {
                    v += psi[i + 1] * if i == 0 { 2.0 * off } else { off };
                }
                hp[i] = v;
            }
            let mut rhs: Vec<Complex64> = psi.iter().zip(&hp).map(|(p, h)| p - half * h).collect();
            solver.solve(&mut rhs);
            psi = rhs;
        }
        per.push((k, norm(&psi) / n0));
    }
    let worst = per.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    Ok(ReflectionReport { per_momentum: per, worst })
}

/// ‖a − b‖₂ / ‖b‖₂ over the densities of two fields on the same grid.
pub fn density_l2(a: &WavefunctionField, b: &WavefunctionField) -> Result<f64, OracleError> {
    if a.x_grid.len() != b.x_grid.len() || a.t_grid.len() != b.t_grid.len() {
        return Err(OracleError::Config("fields are on different grids".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for it in 0..a.t_grid.len() {
        for ix in 0..a.x_grid.len() {
            let (da, db) = (a.density(it, ix), b.density(it, ix));
            num += (da - db) * (da - db);
            den += db * db;
        }
    }
    Ok((num / den).sqrt())
}
