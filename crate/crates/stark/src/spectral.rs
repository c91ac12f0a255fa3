//! Overlap A(W) = A_I(W) + A_O(W) of the initial bound state with the
//! field-on eigenfunctions.
//!
//! A(W) is M(W)/N, where M is the overlap with the eigenfunction normalized
//! to 1 at the junction. Both parts have poles where cos(kL) vanishes, which
//! cancel against D± downstream, so the stored quantities are the cleared
//! products Ã = cos(kL)·A. These are entire in W.
//!
//! The exterior integral is a trapezoid sum on a y-lattice plus
//! Euler–Maclaurin corrections at y = 0. The end derivatives come from the
//! Airy equation, seeded by G(0) = cos(kL)/π and G′(0) = −k·sin(kL)/π.

use std::collections::HashMap;
use std::sync::Mutex;

use rug::Float;

use crate::model::{BoundState, ModelError, ModelParams};
use crate::mpnum::{airy, consts, AiryLine, AiryValues, MpComplex, MpError};
use crate::quad::bernoulli_even;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("exterior quadrature did not converge: estimate {estimate:e} > tol {tol:e}")]
    NonConvergent { estimate: f64, tol: f64 },
    #[error("y-lattice too short for the exponential envelope")]
    LatticeTooShort,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mp(#[from] MpError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralAmplitude {
    pub w: MpComplex,
    /// cos(kL)·A_I(W).
    pub inside: MpComplex,
    /// cos(kL)·A_O(W).
    pub outside: MpComplex,
    /// cos(kL) at W (1 in the contact limit).
    pub cs: MpComplex,
    /// Error estimate of `outside`, relative to max(1, |outside|).
    pub quadrature_error: f64,
}

impl SpectralAmplitude {
    /// Ã = cos(kL)·A(W), the form used by the evolution.
    pub fn cleared(&self) -> MpComplex {
        &self.inside + &self.outside
    }

    pub fn a_inside(&self) -> MpComplex {
        &self.inside / &self.cs
    }

    pub fn a_outside(&self) -> MpComplex {
        &self.outside / &self.cs
    }

    pub fn total(&self) -> MpComplex {
        &self.cleared() / &self.cs
    }
}

/// cos(kL)·A_I(W) = (κ cos(kL) − k sin(kL)) / (2N(Q−W)).
///
/// The numerator vanishes at W = Q, so precision is raised by the bits lost
/// to cancellation; within 2^(−p/2) of Q the derivative ratio is used.
pub fn amp_inside_cleared(w: &MpComplex, st: &BoundState, m: &ModelParams) -> MpComplex {
    let p = m.bits();
    if m.is_delta() {
        return MpComplex::zero(p);
    }
    let q = MpComplex::from_real(st.q.clone());
    let dist = (w - &q).exp2_mag();
    let two_n = Float::with_val(p, m.norm_n() * 2u32);
    let kappa = st.kappa();
    match dist {
        Some(e) if e > -(p as i64) / 2 => {
            let extra = (-e).max(0) as u32 + 16;
            let mr = m.with_ctx(m.ctx.raised(extra));
            let pr = mr.bits();
            let wr = w.with_prec(pr);
            let wf = mr.well_factors(&wr);
            let kr = Float::with_val(pr, Float::with_val(pr, &st.q * -2i32).sqrt());
            let num = &wf.cs.scale(&kr) - &wf.sn;
            let den = (&q.with_prec(pr) - &wr).scale(&Float::with_val(pr, &two_n));
            (&num / &den).with_prec(p)
        }
        _ => {
            let wf = m.well_factors(&q);
            let num = &wf.dcs.scale(&kappa) - &wf.dsn;
            -(num.scale(&Float::with_val(p, two_n.recip_ref())))
        }
    }
}

/// A_I(W) itself (poles where cos(kL) = 0).
pub fn amp_inside(w: &MpComplex, st: &BoundState, m: &ModelParams) -> MpComplex {
    let c = amp_inside_cleared(w, st, m);
    &c / &m.well_factors(w).cs
}

/// Airy values along y = n·h for one W: `get(n)` gives Ai, Bi at
/// α(y + W/F), or None past the end of the lattice.
pub trait YSamples {
    fn sample(&self, n: usize) -> Option<&AiryValues>;
}

/// Every `stride`-th point of a lattice, starting at `start`.
pub struct LatticeY<'a> {
    pub line: &'a AiryLine,
    pub start: usize,
    pub stride: usize,
}

impl YSamples for LatticeY<'_> {
    fn sample(&self, n: usize) -> Option<&AiryValues> {
        let i = self.start + n * self.stride;
        (i < self.line.len()).then(|| self.line.get(i))
    }
}

/// Reusable constants for the exterior sums of one run.
pub struct OutsideRule {
    bern: Vec<Float>,
    pub h: Float,
    pub tol: f64,
}

impl OutsideRule {
    pub fn new(h: Float, tol: f64) -> Self {
        let bits = h.prec();
        OutsideRule { bern: bernoulli_even(120, bits), h, tol }
    }
}

/// cos(kL)·A(W) with the exterior integral taken on the given y-samples
/// (spacing `rule.h`, first sample at y = 0).
pub fn amplitude_with(
    w: &MpComplex,
    st: &BoundState,
    m: &ModelParams,
    ys: &impl YSamples,
    rule: &OutsideRule,
) -> Result<SpectralAmplitude, SpectralError> {
    m.require_field()?;
    let p = m.bits();
    let pi = consts(p).pi.clone();
    let alpha = m.alpha();
    let inv_a = Float::with_val(p, alpha.recip_ref());
    let wf = m.well_factors(w);
    let u0 = m.u0(w);
    let av0 = ys.sample(0).ok_or(SpectralError::LatticeTooShort)?;
    // P̃ = cs·Bi0′ + (sn/α)·Bi0,  R̃ = cs·Ai0′ + (sn/α)·Ai0
    let sn_a = wf.sn.scale(&inv_a);
    let pt = &(&wf.cs * &av0.bip) + &(&sn_a * &av0.bi);
    let rt = &(&wf.cs * &av0.aip) + &(&sn_a * &av0.ai);
    let kappa = st.kappa();
    let h = Float::with_val(p, &rule.h);
    let decay = Float::with_val(p, -Float::with_val(p, &kappa * &h)).exp();

    // f(0)/2 + Σ f(nh), and the same on the doubled spacing
    let g0 = wf.cs.scale(&Float::with_val(p, pi.recip_ref()));
    let mut sum_h = g0.scale_f64(0.5);
    let mut sum_2h = sum_h.clone();
    let mut env = Float::with_val(p, 1);
    let mut quiet = 0;
    let turn = {
        // Re ξ = 0 at y = −Re W / F
        let y = -w.re.to_f64() / m.field.to_f64();
        if y > 0.0 {
            (y / rule.h.to_f64()).ceil() as usize
        } else {
            0
        }
    };
    let thresh = rule.tol * 1e-3 * (kappa.to_f64() * rule.h.to_f64()).min(1.0);
    let neg_rt = -rt.clone();
    let mut tmp = Float::new(p);
    let mut n = 1usize;
    loop {
        let Some(v) = ys.sample(n) else {
            return Err(SpectralError::LatticeTooShort);
        };
        env *= &decay;
        let mut g = &pt * &v.ai;
        g.mul_add_assign(&neg_rt, &v.bi, &mut tmp);
        let f = g.scale(&env);
        sum_h.add_assign_ref(&f);
        if n % 2 == 0 {
            sum_2h.add_assign_ref(&f);
        }
        let (a, b) = f.to_f64_pair();
        let mag = a.abs().max(b.abs());
        // relative to the partial sum once it exceeds one
        let (sa, sb) = sum_h.to_f64_pair();
        let scale = sa.abs().max(sb.abs()).max(1.0);
        if n >= turn && mag < thresh * scale {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= 40 && n % 2 == 0 {
            break;
        }
        n += 1;
    }
    let h2 = Float::with_val(p, &h * 2u32);
    let scale = sum_h.scale(&h).abs().to_f64().max(1.0);
    let mut order = 40;
    let (c_h, e_h, c_2h) = loop {
        let coeffs = end_taylor(&u0, &wf.cs, &wf.sn, &kappa, &alpha, order, p);
        let (c_h, e_h, done) = em_correction(&coeffs, &rule.bern, &h, rule.tol * scale);
        let (c_2h, _, done2) = em_correction(&coeffs, &rule.bern, &h2, rule.tol * scale);
        if (done && done2) || order >= 2 * rule.bern.len() {
            break (c_h, e_h, c_2h);
        }
        order *= 2;
    };
    let t_h = &sum_h.scale(&h) + &c_h;
    let t_2h = &sum_2h.scale(&h2) + &c_2h;
    let n_inv = Float::with_val(p, m.norm_n().recip_ref());
    let pref = Float::with_val(p, &pi * &n_inv);
    let outside = t_h.scale(&pref);
    let diff = (&t_h - &t_2h).abs().to_f64() * pref.to_f64();
    let size = outside.abs().to_f64().max(1.0);
    Ok(SpectralAmplitude {
        w: w.clone(),
        inside: amp_inside_cleared(w, st, m),
        outside,
        cs: wf.cs,
        quadrature_error: diff.max(e_h * pref.to_f64()) / size,
    })
}

/// Taylor coefficients f_n of f(y) = e^{−κy}·G(y) at y = 0, where
/// G″ = α²(u0 + αy)·G, G(0) = cs/π and G′(0) = −sn/π.
fn end_taylor(u0: &MpComplex, cs: &MpComplex, sn: &MpComplex, kappa: &Float, alpha: &Float, n: usize, p: u32) -> Vec<MpComplex> {
    let pi_inv = Float::with_val(p, consts(p).pi.recip_ref());
    let a2 = Float::with_val(p, alpha * alpha);
    let a3 = Float::with_val(p, &a2 * alpha);
    let a2u = u0.scale(&a2);
    let mut g: Vec<MpComplex> = Vec::with_capacity(n + 1);
    g.push(cs.scale(&pi_inv));
    g.push(-sn.scale(&pi_inv));
    for k in 0..n.saturating_sub(1) {
        let mut next = &a2u * &g[k];
        if k >= 1 {
            next = &next + &g[k - 1].scale(&a3);
        }
        g.push(next.div_u(((k + 1) * (k + 2)) as u32));
    }
    // e^{−κy} coefficients
    let mut e = Vec::with_capacity(n + 1);
    let mut c = Float::with_val(p, 1);
    for k in 0..=n {
        e.push(c.clone());
        c = Float::with_val(p, -Float::with_val(p, &c * kappa)) / (k as u32 + 1);
    }
    (0..=n)
        .map(|k| {
            let mut s = MpComplex::zero(p);
            for i in 0..=k {
                s = &s + &g[i].scale(&e[k - i]);
            }
            s
        })
        .collect()
}

/// Σ_k B_2k·h^2k·f_{2k−1}/(2k), stopped once terms fall below tol/10⁶ or
/// start to grow. Returns the sum, the last term as an error guess, and
/// whether the series settled within the available coefficients.
fn em_correction(f: &[MpComplex], bern: &[Float], h: &Float, tol: f64) -> (MpComplex, f64, bool) {
    let p = h.prec();
    let h2 = Float::with_val(p, h * h);
    let mut hp = h2.clone();
    let mut sum = MpComplex::zero(p);
    let mut last = f64::INFINITY;
    for (i, b) in bern.iter().enumerate() {
        let k = i + 1;
        if 2 * k - 1 >= f.len() {
            return (sum, last, false);
        }
        let c = Float::with_val(p, Float::with_val(p, b * &hp) / (2 * k) as u32);
        let term = f[2 * k - 1].scale(&c);
        let mag = term.abs().to_f64();
        if mag > last && mag > tol * 1e-3 {
            // asymptotic series turned around
            return (sum, last, true);
        }
        sum = &sum + &term;
        last = mag;
        if mag < tol * 1e-6 && k >= 2 {
            return (sum, last, true);
        }
        hp *= &h2;
    }
    (sum, last, true)
}

/// y-spacing resolving the exterior oscillation up to energy `w_max`.
pub fn default_y_step(m: &ModelParams, w_re: f64, y_max: f64) -> f64 {
    let pmax = (2.0 * (w_re.max(0.0) + m.field.to_f64() * y_max)).sqrt().max(0.5);
    (0.5 / pmax).min(0.25)
}

/// Length of the y-range needed for tolerance `tol`.
pub fn y_extent(m: &ModelParams, st: &BoundState, w: &MpComplex, tol: f64) -> f64 {
    let kappa = st.kappa().to_f64();
    let f = m.field.to_f64();
    let y_turn = (-w.re.to_f64() / f).max(0.0);
    let u0 = m.u0(w).re.to_f64().max(0.0);
    let tunnel = (4.0 / 3.0) * u0.powf(1.5);
    y_turn.min(tunnel / kappa) + (tol.recip().ln() + tunnel + 40.0) / kappa
}

/// cos(kL)·A(W) on its own y-lattice, refined until the step-doubling
/// estimate is below `tol`.
pub fn amplitude(w: &MpComplex, st: &BoundState, m: &ModelParams, tol: f64) -> Result<SpectralAmplitude, SpectralError> {
    m.require_field()?;
    let p = m.bits();
    let mut y_max = y_extent(m, st, w, tol);
    let mut h = default_y_step(m, w.re.to_f64(), y_max);
    let mut best = f64::INFINITY;
    for _ in 0..6 {
        let count = (y_max / h).ceil() as usize + 64;
        let hf = Float::with_val(p, h);
        let step = MpComplex::from_real(Float::with_val(p, &hf * &m.alpha()));
        let line = AiryLine::build(&m.u0(w), &step, count, &m.ctx)?;
        let rule = OutsideRule::new(hf, tol);
        match amplitude_with(w, st, m, &LatticeY { line: &line, start: 0, stride: 1 }, &rule) {
            Ok(a) if a.quadrature_error <= tol => return Ok(a),
            Ok(a) => {
                best = best.min(a.quadrature_error);
                h *= 0.5;
            }
            Err(SpectralError::LatticeTooShort) => y_max *= 1.5,
            Err(e) => return Err(e),
        }
    }
    Err(SpectralError::NonConvergent { estimate: best, tol })
}

/// A_O(W) (not cleared).
pub fn amp_outside(w: &MpComplex, st: &BoundState, m: &ModelParams, tol: f64) -> Result<MpComplex, SpectralError> {
    Ok(amplitude(w, st, m, tol)?.a_outside())
}

/// Airy values at u0 for a single W (helper for callers holding no lattice).
pub fn airy_at(w: &MpComplex, m: &ModelParams) -> Result<AiryValues, SpectralError> {
    Ok(airy(&m.u0(w), &m.ctx)?)
}

/// Memo table keyed by (W in full precision, configuration hash).
#[derive(Default)]
pub struct AmplitudeCache {
    map: Mutex<HashMap<(String, String), SpectralAmplitude>>,
}

impl AmplitudeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute<E>(
        &self,
        w: &MpComplex,
        config_hash: &str,
        f: impl FnOnce() -> Result<SpectralAmplitude, E>,
    ) -> Result<SpectralAmplitude, E> {
        let key = (w.to_sci(w.prec() as usize / 3 + 2), config_hash.to_string());
        if let Some(v) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = f()?;
        self.map.lock().expect("cache lock").entry(key).or_insert_with(|| v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
