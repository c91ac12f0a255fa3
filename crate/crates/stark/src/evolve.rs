//! ψ(x, t) as a residue sum over crossed poles plus a contour integral.
//!
//! The real-energy integral over [a, b] is deformed onto the path
//! a → a − is → b − is → b. The bottom edge uses an endpoint-corrected
//! trapezoid whose nodes sit on one Airy lattice: with spacing h = F·δ, the
//! argument α(x + z_j/F) for x = m·δ is lattice point j + m, and the y-nodes
//! of the amplitude integral land on the same lattice. The short vertical
//! legs use Gauss–Legendre. Zeros of D+ close to the bottom edge are removed
//! by subtracting their simple-pole part and adding back its exact integral.

use std::fmt::Write as _;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::model::{BoundState, ModelError, ModelParams, Ratio};
use crate::mpnum::{airy, consts, sci, AiryLine, AiryValues, MpComplex, MpError, Sign};
use crate::poles::{PoleError, PoleSet};
use crate::quad::{gauss_legendre, gregory_weights};
use crate::spectral::{amplitude, amplitude_with, default_y_step, y_extent, LatticeY, OutsideRule, SpectralError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("amplitude quadrature estimate {estimate:e} exceeds tolerance {tol:e}")]
    Amplitude { estimate: f64, tol: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Pole(#[from] PoleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mp(#[from] MpError),
}

/// Geometry and resolution of the deformed contour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    /// Depth of the bottom edge, Im z = −s.
    pub s: Ratio,
    /// Real truncation a.
    pub z_min: f64,
    /// Lattice unit δ = 1/lattice_m in x and y; the bottom step is F·δ.
    pub lattice_m: u32,
    /// Number of bottom intervals; b = a + n·F·δ.
    pub n_bottom: usize,
    pub leg_nodes: usize,
    pub gregory_order: usize,
    /// y-step of the amplitude integral in lattice units.
    pub y_stride: usize,
    /// Largest |x| the lattice must cover.
    pub x_max: f64,
}

impl ContourSpec {
    pub fn z_max(&self, m: &ModelParams) -> f64 {
        self.z_min + self.n_bottom as f64 * m.field.to_f64() / f64::from(self.lattice_m)
    }

    /// Choose a resolution for times up to `t_max` and positions up to
    /// `x_max`, and put b in the middle of the pole gap nearest `z_max`.
    pub fn design(
        m: &ModelParams,
        s: Ratio,
        z_min: f64,
        z_max: f64,
        t_max: f64,
        x_max: f64,
        poles: &PoleSet,
    ) -> Result<ContourSpec, EvolveError> {
        let f = m.field.to_f64();
        let sf = s.to_f64();
        if !(z_max > z_min) || sf <= 0.0 {
            return Err(EvolveError::Config("contour needs z_max > z_min and s > 0".into()));
        }
        // fastest phase: e^{−itz} together with the flight time to x_max
        let flight = ((2.0 * (z_max + f * x_max)).sqrt() - (2.0 * z_min.max(0.0)).sqrt()) / f;
        let omega = t_max + flight.max(0.0);
        let h_target = (0.25 * sf).min(0.35 / omega.max(1.0)).min(0.01);
        let lattice_m = (f / h_target).ceil().max(1.0) as u32;
        let h = f / f64::from(lattice_m);
        // b midway between the real parts of neighbouring poles
        let mut re: Vec<f64> = poles.poles.iter().filter(|p| p.w.im.to_f64() > -2.0 * sf).map(|p| p.w.re.to_f64()).collect();
        re.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut b = z_max;
        if let Some(i) = re.iter().position(|r| *r > z_max) {
            let lo = if i > 0 { re[i - 1] } else { z_min };
            b = 0.5 * (lo + re[i]);
        }
        let n_bottom = ((b - z_min) / h).round().max(32.0) as usize;
        let y_step = default_y_step(m, b, 100.0);
        let delta = 1.0 / f64::from(lattice_m);
        let y_stride = ((y_step / delta).floor() as usize).max(1);
        Ok(ContourSpec { s, z_min, lattice_m, n_bottom, leg_nodes: 24, gregory_order: 8, y_stride, x_max })
    }

    /// Same lattice and truncation, different depth. The step must still
    /// be fine against the depth.
    pub fn with_depth(&self, m: &ModelParams, s: Ratio) -> Result<ContourSpec, EvolveError> {
        let h = m.field.to_f64() / f64::from(self.lattice_m);
        if h > 0.25 * s.to_f64() {
            return Err(EvolveError::Config(format!("bottom step {h} too coarse for depth {s}")));
        }
        Ok(ContourSpec { s, ..self.clone() })
    }

    /// Refine the lattice so that every multiple of 1/`d` is a lattice
    /// point. a is kept and b moves by less than one bottom step.
    pub fn aligned(&self, m: &ModelParams, d: u32) -> ContourSpec {
        if d <= 1 || self.lattice_m % d == 0 {
            return self.clone();
        }
        let lattice_m = self.lattice_m.div_ceil(d) * d;
        let f = m.field.to_f64();
        let n_bottom = ((self.z_max(m) - self.z_min) * f64::from(lattice_m) / f).round() as usize;
        let y_step = self.y_stride as f64 / f64::from(self.lattice_m);
        let y_stride = ((y_step * f64::from(lattice_m)).floor() as usize).max(1);
        ContourSpec { lattice_m, n_bottom, y_stride, ..self.clone() }
    }

    /// Short textual id of the contour.
    pub fn id(&self) -> String {
        format!("s={} a={} M={} n={} legs={} greg={} ys={}", self.s, self.z_min, self.lattice_m, self.n_bottom, self.leg_nodes, self.gregory_order, self.y_stride)
    }
}

/// Expansion weight |A(W)|/|D+(W)| of the initial state at real W.
pub fn spectral_weight(m: &ModelParams, st: &BoundState, w: f64, tol: f64) -> Result<f64, EvolveError> {
    let z = m.ctx.complex(w, 0.0);
    let a = amplitude(&z, st, m, tol)?;
    let d = m.d_tilde(&z, Sign::Plus)?;
    let half_pi = Float::with_val(m.bits(), &consts(m.bits()).pi / 2u32);
    Ok((a.cleared().abs() / (d.abs() * half_pi)).to_f64())
}

/// Lower energy cut: step down from `from` until the expansion weight is
/// below `rel` times its value at W = 0.
pub fn lower_cut(m: &ModelParams, st: &BoundState, from: f64, rel: f64) -> Result<f64, EvolveError> {
    let tol = 1e-12;
    let target = rel * spectral_weight(m, st, 0.0, tol)?;
    let mut w = from;
    for _ in 0..400 {
        if spectral_weight(m, st, w, tol)? < target {
            return Ok(w);
        }
        w -= 0.05;
    }
    Err(EvolveError::Config(format!("expansion weight still above {target:e} at W = {w}")))
}

/// Per-node data that does not depend on x or t.
#[derive(Clone, Debug)]
struct NodeData {
    z: MpComplex,
    /// Quadrature weight including dz.
    weight: MpComplex,
    /// Ã = cos(kL)·A(z).
    amp: MpComplex,
    /// (2i/(πN))·Ã/D̃±.
    e_plus: MpComplex,
    e_minus: MpComplex,
    /// (4/π²)·Ã/(N·D̃+·D̃−), the interior weight.
    e_in: MpComplex,
    /// k(z) for the interior cosine.
    k: MpComplex,
}

#[derive(Clone, Debug)]
struct PoleData {
    w: MpComplex,
    amp: MpComplex,
    /// −(4/N)·Ã/D̃+′: times Ci+(x) gives the residue term.
    r_out: MpComplex,
    /// −2πi·(4/π²)·Ã/(N·D̃−·D̃+′): times cos(k(L+x)) gives the interior term.
    r_in: MpComplex,
    k: MpComplex,
    crossed: bool,
    /// (L_p − S_p)/(−2πi): exact minus discrete integral of 1/(z − W_p)
    /// along the bottom edge.
    correction: MpComplex,
}

/// Everything needed to evaluate ψ for one model, initial state and contour.
pub struct Expansion {
    pub m: ModelParams,
    pub state: BoundState,
    pub spec: ContourSpec,
    z0: MpComplex,
    h: Float,
    shared: AiryLine,
    bottom: Vec<NodeData>,
    legs: Vec<NodeData>,
    leg_lines: Vec<AiryLine>,
    poles: Vec<PoleData>,
    /// Largest amplitude quadrature estimate over all nodes and poles.
    pub amplitude_error: f64,
    /// Number of poles inside the deformation region.
    pub crossed: usize,
}

/// Which part of the line a table belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Outside,
    Inside,
}

/// t-independent coefficients for one x: ψ(x,t) = Σ c_j e^{−itz_j}
/// over bottom, leg and pole terms.
#[derive(Clone, Debug)]
pub struct Table {
    pub x: Float,
    pub region: Region,
    z0: MpComplex,
    h: Float,
    bottom: Vec<MpComplex>,
    legs: Vec<(MpComplex, MpComplex)>,
    poles: Vec<(MpComplex, MpComplex)>,
}

impl Expansion {
    /// Precompute amplitudes and D̃± on every node. `poles` must cover the
    /// strip down to at least the contour depth and be certified.
    pub fn new(m: &ModelParams, state: &BoundState, spec: &ContourSpec, poles: &PoleSet, tol: f64) -> Result<Expansion, EvolveError> {
        m.require_field()?;
        if poles.completeness_certificate != poles.poles.len() as i64 {
            return Err(EvolveError::Config("pole set is not certified complete".into()));
        }
        if poles.contour_s.to_f64() < spec.s.to_f64() {
            return Err(EvolveError::Config(format!("pole set depth {} is shallower than contour depth {}", poles.contour_s, spec.s)));
        }
        let b = spec.z_max(m);
        if poles.w_min > spec.z_min || poles.w_max < b {
            return Err(EvolveError::Config("pole search window does not cover the contour".into()));
        }
        let p = m.bits();
        let ctx = m.ctx;
        let f = m.f();
        let delta = Float::with_val(p, Float::with_val(p, spec.lattice_m).recip_ref());
        let h = Float::with_val(p, &f * &delta);
        let s = spec.s.to_float(p);
        let a = Float::with_val(p, spec.z_min);
        let z0 = MpComplex::from_parts(a.clone(), -s.clone());
        let pi = consts(p).pi.clone();
        let n_norm = m.norm_n();
        let two_i_pi_n = MpComplex::from_parts(Float::new(p), Float::with_val(p, Float::with_val(p, &pi * &n_norm).recip_ref()) * 2u32);
        let four_pi2_n = Float::with_val(p, Float::with_val(p, Float::with_val(p, &pi * &pi) * &n_norm).recip_ref()) * 4u32;

        // lattice coverage: bottom nodes plus the larger of the x and y reach
        let y_max = y_extent(m, state, &z0, tol);
        let reach = (spec.x_max.max(y_max) * f64::from(spec.lattice_m)).ceil() as usize + 8 * spec.y_stride + 64;
        let count = spec.n_bottom + 1 + reach;
        let step = MpComplex::from_real(Float::with_val(p, &m.alpha() * &delta));
        let shared = AiryLine::build(&m.u0(&z0), &step, count, &ctx)?;
        let h_y = Float::with_val(p, &delta * spec.y_stride as u32);
        let rule = OutsideRule::new(h_y, tol);

        let node = |z: &MpComplex, weight: MpComplex, av: &AiryValues, ys: &LatticeY| -> Result<(NodeData, f64), EvolveError> {
            let amp = amplitude_with(z, state, m, ys, &rule)?;
            let at = amp.cleared();
            let (dp, _) = m.d_tilde_from(z, av, Sign::Plus);
            let (dm, _) = m.d_tilde_from(z, av, Sign::Minus);
            let e_plus = &(&two_i_pi_n * &at) / &dp;
            let e_minus = &(&two_i_pi_n * &at) / &dm;
            let e_in = (&at / &(&dp * &dm)).scale(&four_pi2_n);
            Ok((NodeData { z: z.clone(), weight, amp: at, e_plus, e_minus, e_in, k: m.k_of(z) }, amp.quadrature_error))
        };

        let gw = gregory_weights(spec.n_bottom, spec.gregory_order, p);
        let mut worst = 0.0f64;
        let mut bottom = Vec::with_capacity(spec.n_bottom + 1);
        for (j, wj) in gw.iter().enumerate() {
            let z = &z0 + &MpComplex::from_real(Float::with_val(p, &h * j as u32));
            let weight = MpComplex::from_real(Float::with_val(p, wj * &h));
            let ys = LatticeY { line: &shared, start: j, stride: spec.y_stride };
            let (nd, e) = node(&z, weight, shared.get(j), &ys)?;
            worst = worst.max(e);
            bottom.push(nd);
        }

        // legs: a → a − is (dz = −i dσ) and b − is → b (dz = +i dσ)
        let (gx, gwts) = gauss_legendre(spec.leg_nodes, p);
        let half_s = Float::with_val(p, &s / 2u32);
        let bf = Float::with_val(p, &a + Float::with_val(p, &h * spec.n_bottom as u32));
        let mut legs = Vec::new();
        let mut leg_lines = Vec::new();
        let leg_count = reach + 8;
        for (re, dir) in [(&a, -1i32), (&bf, 1i32)] {
            for (xg, wg) in gx.iter().zip(&gwts) {
                let sigma = Float::with_val(p, &half_s + Float::with_val(p, xg * &half_s));
                let z = MpComplex::from_parts(re.clone(), -sigma);
                let wmag = Float::with_val(p, wg * &half_s);
                let weight = MpComplex::from_parts(Float::new(p), wmag * dir);
                let line = AiryLine::build(&m.u0(&z), &step, leg_count, &ctx)?;
                let ys = LatticeY { line: &line, start: 0, stride: spec.y_stride };
                let (nd, e) = node(&z, weight, line.get(0), &ys)?;
                worst = worst.max(e);
                legs.push(nd);
                leg_lines.push(line);
            }
        }

        // poles: crossed ones carry the residue term; all get the
        // bottom-edge singularity correction
        let zb = &z0 + &MpComplex::from_real(Float::with_val(p, &h * spec.n_bottom as u32));
        let m2pi_i = MpComplex::from_parts(Float::new(p), Float::with_val(p, &pi * -2i32));
        let mut pole_data = Vec::new();
        let mut crossed = 0;
        for pole in &poles.poles {
            let w = pole.w.with_prec(p);
            let (x, y) = w.to_f64_pair();
            let inside_strip = y > -spec.s.to_f64() && y < 0.0 && x > spec.z_min && x < b;
            let amp = amplitude(&w, state, m, tol)?;
            worst = worst.max(amp.quadrature_error);
            let at = amp.cleared();
            let av = airy(&m.u0(&w), &ctx)?;
            let (_, dd) = m.d_tilde_from(&w, &av, Sign::Plus);
            let (dm, _) = m.d_tilde_from(&w, &av, Sign::Minus);
            let r_out = (&at / &dd).scale(&Float::with_val(p, Float::with_val(p, n_norm.recip_ref()) * -4i32));
            let r_in = &(&m2pi_i * &(&at / &(&dm * &dd))).scale(&four_pi2_n) + &MpComplex::zero(p);
            // exact ∫ dz/(z − W) along the bottom edge minus its quadrature
            let exact = (&(&zb - &w) / &(&z0 - &w)).ln();
            let mut discrete = MpComplex::zero(p);
            for nd in &bottom {
                discrete = &discrete + &(&nd.weight / &(&nd.z - &w));
            }
            let correction = &(&exact - &discrete) / &m2pi_i;
            if inside_strip {
                crossed += 1;
            }
            pole_data.push(PoleData { k: m.k_of(&w), w, amp: at, r_out, r_in, crossed: inside_strip, correction });
        }
        if worst > tol {
            return Err(EvolveError::Amplitude { estimate: worst, tol });
        }
        Ok(Expansion { m: *m, state: state.clone(), spec: spec.clone(), z0, h, shared, bottom, legs, leg_lines, poles: pole_data, amplitude_error: worst, crossed })
    }

    /// Amplitude table as text: one line per bottom node, leg node and
    /// pole with z, the quadrature weight (zero for poles) and Ã, at
    /// `digits` significant digits.
    pub fn amplitude_text(&self, digits: usize, config_hash: &str) -> String {
        let mut s = format!("# amplitudes v1\n# config {config_hash}\n# kind re_z im_z re_weight im_weight re_amp im_amp\n");
        let c = |v: &MpComplex| format!("{} {}", sci(&v.re, digits), sci(&v.im, digits));
        let zero = MpComplex::zero(self.m.bits());
        for (kind, nodes) in [("bottom", &self.bottom), ("leg", &self.legs)] {
            for n in nodes {
                let _ = writeln!(s, "{kind} {} {} {}", c(&n.z), c(&n.weight), c(&n.amp));
            }
        }
        for pd in &self.poles {
            let kind = if pd.crossed { "pole_crossed" } else { "pole" };
            let _ = writeln!(s, "{kind} {} {} {}", c(&pd.w), c(&zero), c(&pd.amp));
        }
        s
    }

    pub fn delta(&self) -> Float {
        Float::with_val(self.m.bits(), Float::with_val(self.m.bits(), self.spec.lattice_m).recip_ref())
    }

    /// Lattice index of x if x ≥ 0 is a multiple of δ.
    fn lattice_index(&self, x: &Float) -> Option<usize> {
        if x.is_sign_negative() && !x.is_zero() {
            return None;
        }
        let scaled = Float::with_val(x.prec(), x * self.spec.lattice_m);
        let r = scaled.to_f64().round();
        let back = Float::with_val(x.prec(), &scaled - r);
        (back.is_zero() || back.get_exp().is_some_and(|e| e < -(x.prec() as i32) + 20)).then_some(r as usize)
    }

    /// x as an exact lattice point if it is within 1e-9 of one, so that
    /// positions built from f64 arithmetic reuse the shared Airy line.
    pub fn lattice_point(&self, x: f64) -> Float {
        let p = self.m.bits();
        let m = f64::from(self.spec.lattice_m);
        let r = (x * m).round();
        if x >= 0.0 && (x * m - r).abs() < 1e-9 * m.max(1.0) {
            Float::with_val(p, r) / m
        } else {
            Float::with_val(p, x)
        }
    }

    /// Coefficient table for one position (x ≥ 0 outside, −L ≤ x < 0 inside).
    pub fn table(&self, x: &Float) -> Result<Table, EvolveError> {
        self.table_with(x, false)
    }

    /// Table for ∂ψ/∂x at x ≥ 0, used for the probability flux.
    pub fn table_dx(&self, x: &Float) -> Result<Table, EvolveError> {
        if x.is_sign_negative() && !x.is_zero() {
            return Err(EvolveError::Config("flux tables are only built outside the well".into()));
        }
        self.table_with(x, true)
    }

    fn table_with(&self, x: &Float, deriv: bool) -> Result<Table, EvolveError> {
        let p = self.m.bits();
        let x = Float::with_val(p, x);
        if x.is_sign_negative() && !x.is_zero() {
            if deriv || Float::with_val(p, &x + &self.m.l()).is_sign_negative() {
                return Err(EvolveError::Config(format!("x = {} outside the domain", x.to_f64())));
            }
            return Ok(self.table_inside(&x));
        }
        let alpha = self.m.alpha();
        // Ci∓ or their x-derivatives α·Ci∓′
        let pair = |av: &AiryValues| -> (MpComplex, MpComplex) {
            if deriv {
                (av.ci_prime(Sign::Minus).scale(&alpha), av.ci_prime(Sign::Plus).scale(&alpha))
            } else {
                (av.ci(Sign::Minus), av.ci(Sign::Plus))
            }
        };
        if x.to_f64() > self.spec.x_max + 1e-9 {
            return Err(EvolveError::Config(format!("x = {} beyond the lattice reach {}", x.to_f64(), self.spec.x_max)));
        }
        let off;
        let (src, base): (&AiryLine, usize) = match self.lattice_index(&x) {
            Some(mi) => (&self.shared, mi),
            None => {
                let p = self.m.bits();
                let start = (&self.m.u0(&self.z0) + &MpComplex::from_real(Float::with_val(p, &x * &self.m.alpha()))).with_prec(p);
                let step = MpComplex::from_real(Float::with_val(p, &self.m.alpha() * &self.delta()));
                off = AiryLine::build(&start, &step, self.bottom.len(), &self.m.ctx)?;
                (&off, 0)
            }
        };
        let mut tmp = Float::new(p);
        let bottom = self
            .bottom
            .iter()
            .enumerate()
            .map(|(j, nd)| {
                let (cm, cp) = pair(src.get(base + j));
                let mut v = MpComplex::zero(p);
                v.mul_add_assign(&nd.e_minus, &cm, &mut tmp);
                v.mul_add_assign(&-nd.e_plus.clone(), &cp, &mut tmp);
                &v * &nd.weight
            })
            .collect();
        let mi = self.lattice_index(&x);
        let legs = self
            .legs
            .iter()
            .zip(&self.leg_lines)
            .map(|(nd, line)| -> Result<(MpComplex, MpComplex), EvolveError> {
                let av = match mi {
                    Some(i) => line.get(i).clone(),
                    None => airy(&(&self.m.u0(&nd.z) + &MpComplex::from_real(Float::with_val(p, &x * &self.m.alpha()))), &self.m.ctx)?,
                };
                let (cm, cp) = pair(&av);
                let v = &(&nd.e_minus * &cm) - &(&nd.e_plus * &cp);
                Ok((nd.z.clone(), &v * &nd.weight))
            })
            .collect::<Result<_, _>>()?;
        let poles = self
            .poles
            .iter()
            .map(|pd| -> Result<(MpComplex, MpComplex), EvolveError> {
                let u = &self.m.u0(&pd.w) + &MpComplex::from_real(Float::with_val(p, &x * &self.m.alpha()));
                let (_, cp) = pair(&airy(&u, &self.m.ctx)?);
                let r = &pd.r_out * &cp;
                Ok((pd.w.clone(), pole_coefficient(&r, pd)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Table { x, region: Region::Outside, z0: self.z0.clone(), h: self.h.clone(), bottom, legs, poles })
    }

    fn table_inside(&self, x: &Float) -> Table {
        let p = self.m.bits();
        let lx = Float::with_val(p, &self.m.l() + x);
        let cosk = |k: &MpComplex| k.scale(&lx).cos();
        let bottom = self.bottom.iter().map(|nd| &(&nd.e_in * &cosk(&nd.k)) * &nd.weight).collect();
        let legs = self.legs.iter().map(|nd| (nd.z.clone(), &(&nd.e_in * &cosk(&nd.k)) * &nd.weight)).collect();
        let poles = self
            .poles
            .iter()
            .map(|pd| {
                let r = &pd.r_in * &cosk(&pd.k);
                (pd.w.clone(), pole_coefficient(&r, pd))
            })
            .collect();
        Table { x: x.clone(), region: Region::Inside, z0: self.z0.clone(), h: self.h.clone(), bottom, legs, poles }
    }

    /// ψ(x, t).
    pub fn wavefunction(&self, x: &Float, t: &Float) -> Result<MpComplex, EvolveError> {
        Ok(self.table(x)?.psi(t))
    }

    /// ψ(x, t) by summing the integrand afresh at every node with direct
    /// Airy evaluations (no lattice, no table); for cross-checks.
    pub fn wavefunction_direct(&self, x: &Float, t: &Float) -> Result<MpComplex, EvolveError> {
        let p = self.m.bits();
        let xa = Float::with_val(p, x * &self.m.alpha());
        let mi_t = MpComplex::from_parts(Float::new(p), -Float::with_val(p, t));
        let mut sum = MpComplex::zero(p);
        for nd in self.bottom.iter().chain(&self.legs) {
            let av = airy(&self.m.u0(&nd.z).add_real(&xa), &self.m.ctx)?;
            let v = &(&nd.e_minus * &av.ci(Sign::Minus)) - &(&nd.e_plus * &av.ci(Sign::Plus));
            let ph = (&mi_t * &nd.z).exp();
            sum = &sum + &(&(&v * &nd.weight) * &ph);
        }
        for pd in &self.poles {
            let cp = airy(&self.m.u0(&pd.w).add_real(&xa), &self.m.ctx)?.ci(Sign::Plus);
            let c = pole_coefficient(&(&pd.r_out * &cp), pd);
            sum = &sum + &(&c * &(&mi_t * &pd.w).exp());
        }
        Ok(sum)
    }

    /// Poles inside the deformation region, as (W, family tag).
    pub fn crossed_poles(&self) -> Vec<MpComplex> {
        self.poles.iter().filter(|p| p.crossed).map(|p| p.w.clone()).collect()
    }

    pub fn z_max(&self) -> f64 {
        self.spec.z_max(&self.m)
    }
}

/// Residue term (if crossed) plus the bottom-edge correction, both
/// multiplying e^{−itW_p}.
fn pole_coefficient(r: &MpComplex, pd: &PoleData) -> MpComplex {
    let corr = r * &pd.correction;
    if pd.crossed {
        r + &corr
    } else {
        corr
    }
}

impl Table {
    /// ψ at one time: Horner in e^{−ith} on the bottom edge, direct
    /// exponentials on legs and poles.
    pub fn psi(&self, t: &Float) -> MpComplex {
        let p = self.z0.prec();
        let mi_t = MpComplex::from_parts(Float::new(p), -Float::with_val(p, t));
        let rho = MpComplex::from_parts(Float::new(p), -Float::with_val(p, t * &self.h)).exp();
        let mut acc = MpComplex::zero(p);
        let mut tmp = Float::new(p);
        for c in self.bottom.iter().rev() {
            let mut next = c.clone();
            next.mul_add_assign(&acc, &rho, &mut tmp);
            acc = next;
        }
        let mut sum = &acc * &(&mi_t * &self.z0).exp();
        for (z, c) in self.legs.iter().chain(&self.poles) {
            sum = &sum + &(c * &(&mi_t * z).exp());
        }
        sum
    }

    /// Pole part alone at time t.
    pub fn pole_part(&self, t: &Float) -> MpComplex {
        let p = self.z0.prec();
        let mi_t = MpComplex::from_parts(Float::new(p), -Float::with_val(p, t));
        let mut sum = MpComplex::zero(p);
        for (z, c) in &self.poles {
            sum = &sum + &(c * &(&mi_t * z).exp());
        }
        sum
    }

    /// Multiply every coefficient by c (linearity check helper).
    pub fn scaled(&self, c: &MpComplex) -> Table {
        let mut t = self.clone();
        for v in t.bottom.iter_mut() {
            *v = &*v * c;
        }
        for (_, v) in t.legs.iter_mut().chain(t.poles.iter_mut()) {
            *v = &*v * c;
        }
        t
    }
}

/// Metadata stamped on every field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub config_hash: String,
    pub pole_set_id: String,
    pub contour_id: String,
}

/// ψ samples on a product grid, row-major in t.
#[derive(Clone, Debug)]
pub struct WavefunctionField {
    pub x_grid: Vec<Float>,
    pub t_grid: Vec<Float>,
    pub values: Vec<MpComplex>,
    pub meta: FieldMeta,
}

impl WavefunctionField {
    pub fn at(&self, it: usize, ix: usize) -> &MpComplex {
        &self.values[it * self.x_grid.len() + ix]
    }

    pub fn density(&self, it: usize, ix: usize) -> f64 {
        self.at(it, ix).norm_sqr().to_f64()
    }

    /// (x, t, Re ψ, Im ψ, |ψ|²) rows with a hash header.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# config {}", self.meta.config_hash);
        let _ = writeln!(s, "# poles {}", self.meta.pole_set_id);
        let _ = writeln!(s, "# contour {}", self.meta.contour_id);
        let _ = writeln!(s, "x,t,re_psi,im_psi,density");
        for (it, t) in self.t_grid.iter().enumerate() {
            for (ix, x) in self.x_grid.iter().enumerate() {
                let v = self.at(it, ix);
                let _ = writeln!(s, "{},{},{},{},{}", fmt17(x.to_f64()), fmt17(t.to_f64()), fmt17(v.re.to_f64()), fmt17(v.im.to_f64()), fmt17(v.norm_sqr().to_f64()));
            }
        }
        s
    }

    /// Same rows as [`to_csv`](Self::to_csv) with ψ at `digits` significant
    /// digits, for debugging.
    pub fn to_csv_full(&self, digits: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# config {}", self.meta.config_hash);
        let _ = writeln!(s, "x,t,re_psi,im_psi");
        for (it, t) in self.t_grid.iter().enumerate() {
            for (ix, x) in self.x_grid.iter().enumerate() {
                let v = self.at(it, ix);
                let _ = writeln!(s, "{},{},{},{}", sci(x, digits), sci(t, digits), sci(&v.re, digits), sci(&v.im, digits));
            }
        }
        s
    }

    /// Density matrix: one row per t, one column per x.
    pub fn to_matrix(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# config {}", self.meta.config_hash);
        let xs: Vec<String> = self.x_grid.iter().map(|x| fmt17(x.to_f64())).collect();
        let _ = writeln!(s, "t\\x,{}", xs.join(","));
        for (it, t) in self.t_grid.iter().enumerate() {
            let row: Vec<String> = (0..self.x_grid.len()).map(|ix| fmt17(self.density(it, ix))).collect();
            let _ = writeln!(s, "{},{}", fmt17(t.to_f64()), row.join(","));
        }
        s
    }
}

/// 17 significant digits, enough to round-trip an f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// |ψ|² on the product grid; tables are built once per x.
pub fn density_map(e: &Expansion, x_grid: &[Float], t_grid: &[Float], meta: FieldMeta) -> Result<WavefunctionField, EvolveError> {
    let nx = x_grid.len();
    let mut values = vec![MpComplex::zero(e.m.bits()); nx * t_grid.len()];
    for (ix, x) in x_grid.iter().enumerate() {
        let tab = e.table(x)?;
        for (it, t) in t_grid.iter().enumerate() {
            values[it * nx + ix] = tab.psi(t);
        }
    }
    Ok(WavefunctionField { x_grid: x_grid.to_vec(), t_grid: t_grid.to_vec(), values, meta })
}
