//! Outgoing Stark resonances: zeros of D+ in the lower half-plane.
//!
//! Seeds come from the zero-field bound energies (B family), from box
//! quantization of the well continued by linear extrapolation (A family) and
//! from the zeros of Ci+(αW/F) (C family). Newton refinement runs on the
//! cleared function D̃+ with its analytic derivative. The argument principle
//! on the strip boundary certifies that nothing was missed; if it disagrees,
//! a recursive box search looks for the remainder.

use std::fmt::Write as _;

use rug::Float;

use crate::model::{ModelError, ModelParams, Ratio, Well};
use crate::mpnum::{consts, sci, MpComplex, PrecisionContext, Sign};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    A,
    B,
    C,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
        }
    }

    fn parse(s: &str) -> Option<Family> {
        match s {
            "A" => Some(Family::A),
            "B" => Some(Family::B),
            "C" => Some(Family::C),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonantPole {
    pub w: MpComplex,
    pub family: Family,
    /// D+′(W_p) = (π/2)·D̃+′(W_p)/cos(k L).
    pub dplus_deriv: MpComplex,
    /// D̃+′(W_p) of the cleared function.
    pub dtilde_deriv: MpComplex,
    /// |D+(W_p)| / |D+′(W_p)|.
    pub refinement_residual: f64,
}

/// Axis-aligned rectangle in the complex W plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoleSet {
    pub poles: Vec<ResonantPole>,
    pub contour_s: Ratio,
    pub w_min: f64,
    pub w_max: f64,
    /// Argument-principle zero count over the strip boundary.
    pub completeness_certificate: i64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PoleError {
    #[error("Newton iteration did not converge (last iterate {last_re} {last_im}i)")]
    NoConvergence { last_re: f64, last_im: f64 },
    #[error("near-degenerate root at {re} {im}i: |D+′| below threshold")]
    Degenerate { re: f64, im: f64 },
    #[error("pole census incomplete: argument principle counts {count}, found {found}; suspect boxes {suspects:?}")]
    Incomplete { count: i64, found: usize, suspects: Vec<Rect> },
    #[error("pole file: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Newton refinement of a zero of D+ from `seed`.
pub fn find_pole(seed: &MpComplex, m: &ModelParams) -> Result<ResonantPole, PoleError> {
    let p = m.bits();
    let mut w = seed.with_prec(p);
    let tol_exp = -(i64::from(m.ctx.digits) * 33 / 10) - 8;
    let mut converged = false;
    for it in 0..80 {
        let (d, dd) = m.d_tilde_with_deriv(&w, Sign::Plus)?;
        if dd.is_zero() {
            break;
        }
        let mut step = &d / &dd;
        // damp wild early steps so a seed stays in its basin
        let (sr, si) = step.to_f64_pair();
        let len = sr.hypot(si);
        if it < 6 && len > 0.02 {
            step = step.scale_f64(0.02 / len);
        }
        w = &w - &step;
        let rel = step.exp2_mag().map(|e| e - w.exp2_mag().unwrap_or(0));
        if rel.is_none_or(|r| r < tol_exp) {
            converged = true;
            break;
        }
    }
    let (wr, wi) = w.to_f64_pair();
    if !converged || !w.is_finite() {
        return Err(PoleError::NoConvergence { last_re: wr, last_im: wi });
    }
    let (d, dd) = m.d_tilde_with_deriv(&w, Sign::Plus)?;
    // degeneracy: compare |D̃′|·ρ with |D̃| on a small circle
    let rho = 1e-3;
    let mut scale = 0.0f64;
    for k in 0..4 {
        let a = std::f64::consts::FRAC_PI_2 * f64::from(k) + 0.3;
        let z = &w + &m.ctx.complex(rho * a.cos(), rho * a.sin());
        let v = m.d_tilde(&z, Sign::Plus)?;
        scale = scale.max(v.abs().to_f64());
    }
    if dd.abs().to_f64() * rho < 1e-8 * scale {
        return Err(PoleError::Degenerate { re: wr, im: wi });
    }
    let residual = (d.abs() / dd.abs()).to_f64();
    let wf = m.well_factors(&w);
    let half_pi = Float::with_val(p, &consts(p).pi / 2u32);
    let dplus_deriv = (&dd / &wf.cs).scale(&half_pi);
    Ok(ResonantPole { family: classify(&w, m), w, dplus_deriv, dtilde_deriv: dd, refinement_residual: residual })
}

/// Family rule: B within half a zero-field level spacing of a bound energy,
/// C within 15° of the direction of the Ci+(αW/F) zeros, A otherwise.
pub fn classify(w: &MpComplex, m: &ModelParams) -> Family {
    let (x, y) = w.to_f64_pair();
    let qs: Vec<f64> = m.bound_states().iter().map(|s| s.q.to_f64()).collect();
    let near_b = qs.iter().enumerate().any(|(i, q)| {
        let below = if i > 0 { q - qs[i - 1] } else { f64::INFINITY };
        let above = if i + 1 < qs.len() { qs[i + 1] - q } else { f64::INFINITY };
        let mut half = 0.5 * below.min(above);
        if !half.is_finite() {
            half = 0.5 * q.abs();
        }
        // the top level's upper neighbour is the continuum edge at 0
        if i + 1 == qs.len() {
            half = half.min(0.5 * q.abs());
        }
        (x - q).abs() < half
    });
    if near_b && y.abs() < 0.5 * (x.abs() + 1e-3) {
        return Family::B;
    }
    let ang = y.atan2(x);
    let stokes = -2.0 * std::f64::consts::FRAC_PI_3;
    if (ang - stokes).abs() < std::f64::consts::PI / 12.0 {
        return Family::C;
    }
    Family::A
}

/// Lower edge of the pole search: below every bound energy, every refined
/// B pole (the Stark shift can be large) and the floor of the well.
pub fn default_w_min(m: &ModelParams, s: f64) -> f64 {
    let bound = m.bound_states();
    let mut lo = bound.first().map(|b| b.q.to_f64()).unwrap_or(-0.5);
    if let Well::Finite { v0, .. } = m.well {
        lo = lo.min(-v0.to_f64());
    }
    if let Some(b) = bound.first() {
        if let Ok(p) = find_pole(&MpComplex::from_real(b.q.clone()), m) {
            lo = lo.min(p.w.re.to_f64());
        }
    }
    (lo - 0.05).min(-2.0 * s)
}

/// [`enumerate_poles_in`] with the lower edge from [`default_w_min`].
pub fn enumerate_poles(m: &ModelParams, s: Ratio, w_max: f64) -> Result<PoleSet, PoleError> {
    m.require_field()?;
    enumerate_poles_in(m, s, default_w_min(m, s.to_f64()), w_max)
}

/// All zeros of D+ in {−s < Im W < 0, w_min < Re W < w_max}, certified by
/// the argument principle.
pub fn enumerate_poles_in(m: &ModelParams, s: Ratio, w_min: f64, w_max: f64) -> Result<PoleSet, PoleError> {
    m.require_field()?;
    let sf = s.to_f64();
    let in_strip = |w: &MpComplex| {
        let (x, y) = w.to_f64_pair();
        y < 0.0 && y > -sf && x > w_min && x < w_max
    };
    let mut found: Vec<ResonantPole> = Vec::new();
    let push = |found: &mut Vec<ResonantPole>, p: ResonantPole| -> bool {
        let (x, y) = p.w.to_f64_pair();
        let dup = found.iter().any(|q| {
            let (a, b) = q.w.to_f64_pair();
            (a - x).hypot(b - y) < 1e-9 * (1.0 + x.abs())
        });
        if !dup {
            found.push(p);
        }
        !dup
    };

    // B family: one descendant per bound state
    let bound = m.bound_states();
    for b in &bound {
        let seed = MpComplex::from_real(b.q.clone());
        if let Ok(p) = find_pole(&seed, m) {
            push(&mut found, p);
        }
    }

    // A family: box modes above the top bound level, then extrapolation
    if let Well::Finite { l, v0 } = m.well {
        let (l, v0) = (l.to_f64(), v0.to_f64());
        let top = bound.last().map(|b| b.q.to_f64()).unwrap_or(-v0);
        let mut mode = ((2.0 * (v0 + top.max(0.0))).sqrt() * l / std::f64::consts::PI).floor() as i64;
        let mut chain: Vec<(f64, f64)> = Vec::new();
        let mut outside = 0;
        let mut misses = 0;
        while outside < 3 && misses < 6 {
            let seed = if chain.len() >= 2 {
                let (a, b) = (chain[chain.len() - 2], chain[chain.len() - 1]);
                (2.0 * b.0 - a.0, 2.0 * b.1 - a.1)
            } else {
                let k = (mode as f64 + 0.5) * std::f64::consts::PI / l;
                let w = 0.5 * k * k - v0;
                mode += 1;
                if w <= top {
                    continue;
                }
                (w, chain.last().map(|c| c.1).unwrap_or(-1e-3))
            };
            if seed.0 > w_max + 0.1 {
                break;
            }
            match find_pole(&m.ctx.complex(seed.0, seed.1), m) {
                Ok(p) => {
                    let (x, y) = p.w.to_f64_pair();
                    let fresh = chain.last().is_none_or(|c| x > c.0 + 1e-9);
                    if fresh && p.family == Family::A {
                        chain.push((x, y));
                        if y < -3.0 * sf {
                            outside += 1;
                        } else {
                            outside = 0;
                        }
                        misses = 0;
                        push(&mut found, p);
                    } else {
                        misses += 1;
                        chain.clear();
                    }
                }
                Err(_) => {
                    misses += 1;
                    chain.clear();
                }
            }
            if x_of_last(&chain) > w_max + 0.1 {
                break;
            }
        }
    }

    // C family: near the zeros of Ci+(u0), u0 = |a_k|·e^{iπ/3}
    let f = m.field.to_f64();
    let alpha = -(2.0 * f).cbrt();
    for k in 1..200 {
        let t = 3.0 * std::f64::consts::PI * (4.0 * k as f64 - 1.0) / 8.0;
        let ak = t.powf(2.0 / 3.0) * (1.0 + 5.0 / (48.0 * t * t));
        let (c, sgn) = (std::f64::consts::FRAC_PI_3.cos(), std::f64::consts::FRAC_PI_3.sin());
        let (wr, wi) = (f * ak * c / alpha, f * ak * sgn / alpha);
        if wi < -2.0 * sf || wr < w_min {
            break;
        }
        if let Ok(p) = find_pole(&m.ctx.complex(wr, wi), m) {
            push(&mut found, p);
        }
    }

    found.retain(|p| in_strip(&p.w));
    let rect = Rect { re_min: w_min, re_max: w_max, im_min: -sf, im_max: 0.5 * sf };
    let count = winding_count(m, &rect)?;
    if count != found.len() as i64 {
        box_search(m, &rect, count, &mut found, 0)?;
        found.retain(|p| in_strip(&p.w));
    }
    if count != found.len() as i64 {
        let suspects = suspect_boxes(m, &rect, &found)?;
        return Err(PoleError::Incomplete { count, found: found.len(), suspects });
    }
    found.sort_by(|a, b| a.w.re.partial_cmp(&b.w.re).expect("finite"));
    Ok(PoleSet { poles: found, contour_s: s, w_min, w_max, completeness_certificate: count })
}

fn x_of_last(chain: &[(f64, f64)]) -> f64 {
    chain.last().map(|c| c.0).unwrap_or(f64::NEG_INFINITY)
}

fn count_in(found: &[ResonantPole], r: &Rect) -> i64 {
    found
        .iter()
        .filter(|p| {
            let (x, y) = p.w.to_f64_pair();
            x > r.re_min && x < r.re_max && y > r.im_min && y < r.im_max
        })
        .count() as i64
}

/// Split `r` until each box with a discrepancy holds one zero, then Newton
/// from the box centre.
fn box_search(m: &ModelParams, r: &Rect, count: i64, found: &mut Vec<ResonantPole>, depth: u32) -> Result<(), PoleError> {
    let have = count_in(found, r);
    if have >= count || depth > 24 {
        return Ok(());
    }
    let w = r.re_max - r.re_min;
    let h = r.im_max - r.im_min;
    if count == 1 && w < 0.05 && h < 0.05 {
        let seed = m.ctx.complex(0.5 * (r.re_min + r.re_max), 0.5 * (r.im_min + r.im_max));
        if let Ok(p) = find_pole(&seed, m) {
            let (x, y) = p.w.to_f64_pair();
            let dup = found.iter().any(|q| {
                let (a, b) = q.w.to_f64_pair();
                (a - x).hypot(b - y) < 1e-9 * (1.0 + x.abs())
            });
            if !dup {
                found.push(p);
                return Ok(());
            }
        }
    }
    let halves = if w >= h {
        let c = 0.5 * (r.re_min + r.re_max);
        [Rect { re_max: c, ..*r }, Rect { re_min: c, ..*r }]
    } else {
        let c = 0.5 * (r.im_min + r.im_max);
        [Rect { im_max: c, ..*r }, Rect { im_min: c, ..*r }]
    };
    for b in halves {
        let n = winding_count(m, &b)?;
        if n > 0 {
            box_search(m, &b, n, found, depth + 1)?;
        }
    }
    Ok(())
}

fn suspect_boxes(m: &ModelParams, r: &Rect, found: &[ResonantPole]) -> Result<Vec<Rect>, PoleError> {
    let n = 8;
    let mut out = Vec::new();
    for i in 0..n {
        let a = r.re_min + (r.re_max - r.re_min) * f64::from(i) / f64::from(n);
        let b = r.re_min + (r.re_max - r.re_min) * f64::from(i + 1) / f64::from(n);
        let sub = Rect { re_min: a, re_max: b, ..*r };
        if winding_count(m, &sub)? != count_in(found, &sub) {
            out.push(sub);
        }
    }
    Ok(out)
}

/// Precision used for boundary phase tracking.
fn winding_ctx(m: &ModelParams) -> ModelParams {
    let digits = m.ctx.digits.min(40);
    m.with_ctx(PrecisionContext { digits, guard_digits: m.ctx.guard_digits })
}

/// (1/2π)·total change of arg D̃+ around `r` (counter-clockwise): the number
/// of zeros inside. D̃+ has no poles, so this is exact once the phase steps
/// are resolved; segments are bisected until every step is below 0.5 rad.
pub fn winding_count(m: &ModelParams, r: &Rect) -> Result<i64, PoleError> {
    let mw = winding_ctx(m);
    let corners = [(r.re_min, r.im_min), (r.re_max, r.im_min), (r.re_max, r.im_max), (r.re_min, r.im_max)];
    let mut total = 0.0f64;
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let n = ((len / 0.004).ceil() as usize).clamp(4, 4000);
        let eval = |t: f64| -> Result<MpComplex, PoleError> {
            let z = mw.ctx.complex(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
            Ok(mw.d_tilde(&z, Sign::Plus)?)
        };
        let mut prev_t = 0.0;
        let mut prev = eval(0.0)?;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let cur = eval(t)?;
            total += phase_walk(&eval, prev_t, &prev, t, &cur, 0)?;
            prev_t = t;
            prev = cur;
        }
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

fn phase_walk<E>(eval: &E, t0: f64, v0: &MpComplex, t1: f64, v1: &MpComplex, depth: u32) -> Result<f64, PoleError>
where
    E: Fn(f64) -> Result<MpComplex, PoleError>,
{
    let d = (v1 / v0).arg().to_f64();
    if d.abs() < 0.5 || depth > 40 {
        return Ok(d);
    }
    let tm = 0.5 * (t0 + t1);
    let vm = eval(tm)?;
    Ok(phase_walk(eval, t0, v0, tm, &vm, depth + 1)? + phase_walk(eval, tm, &vm, t1, v1, depth + 1)?)
}

/// Sampled Re D+ and Im D+ on a grid, for zero-line plots.
#[derive(Clone, Debug)]
pub struct ContourMap {
    pub re_axis: Vec<f64>,
    pub im_axis: Vec<f64>,
    /// Row-major (im index, re index).
    pub re_part: Vec<f64>,
    pub im_part: Vec<f64>,
}

impl ContourMap {
    fn at(&self, v: &[f64], i: usize, j: usize) -> f64 {
        v[i * self.re_axis.len() + j]
    }

    fn changes(&self, v: &[f64], i: usize, j: usize) -> bool {
        let c = [self.at(v, i, j), self.at(v, i, j + 1), self.at(v, i + 1, j), self.at(v, i + 1, j + 1)];
        let pos = c.iter().filter(|x| **x > 0.0).count();
        pos > 0 && pos < 4
    }

    /// Cells crossed by both a Re D+ = 0 and an Im D+ = 0 line, as the
    /// cell centre.
    pub fn intersection_cells(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 0..self.im_axis.len().saturating_sub(1) {
            for j in 0..self.re_axis.len().saturating_sub(1) {
                if self.changes(&self.re_part, i, j) && self.changes(&self.im_part, i, j) {
                    out.push((
                        0.5 * (self.re_axis[j] + self.re_axis[j + 1]),
                        0.5 * (self.im_axis[i] + self.im_axis[i + 1]),
                    ));
                }
            }
        }
        out
    }

    /// Linear-interpolated zero crossings along grid edges: (re, im, part)
    /// with part 0 for Re D+ and 1 for Im D+.
    pub fn zero_points(&self) -> Vec<(f64, f64, u8)> {
        let mut out = Vec::new();
        let nx = self.re_axis.len();
        for (tag, v) in [(0u8, &self.re_part), (1u8, &self.im_part)] {
            for i in 0..self.im_axis.len() {
                for j in 0..nx {
                    let a = self.at(v, i, j);
                    if j + 1 < nx {
                        let b = self.at(v, i, j + 1);
                        if (a > 0.0) != (b > 0.0) {
                            let t = a / (a - b);
                            out.push((self.re_axis[j] + t * (self.re_axis[j + 1] - self.re_axis[j]), self.im_axis[i], tag));
                        }
                    }
                    if i + 1 < self.im_axis.len() {
                        let b = self.at(v, i + 1, j);
                        if (a > 0.0) != (b > 0.0) {
                            let t = a / (a - b);
                            out.push((self.re_axis[j], self.im_axis[i] + t * (self.im_axis[i + 1] - self.im_axis[i]), tag));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Sample D+ on an `nx × ny` grid over `window`. Values are signed and
/// compressed (sign·ln(1+|v|)) so that plots stay readable across decades.
pub fn zero_contour_map(m: &ModelParams, window: &Rect, nx: usize, ny: usize) -> Result<ContourMap, PoleError> {
    let mw = winding_ctx(m);
    let re_axis: Vec<f64> = (0..nx).map(|j| window.re_min + (window.re_max - window.re_min) * j as f64 / (nx - 1).max(1) as f64).collect();
    let im_axis: Vec<f64> = (0..ny).map(|i| window.im_min + (window.im_max - window.im_min) * i as f64 / (ny - 1).max(1) as f64).collect();
    let mut re_part = Vec::with_capacity(nx * ny);
    let mut im_part = Vec::with_capacity(nx * ny);
    let squash = |x: f64| x.signum() * x.abs().ln_1p();
    for y in &im_axis {
        for x in &re_axis {
            let d = mw.d_pm(&mw.ctx.complex(*x, *y), Sign::Plus)?;
            // keep the sign exactly even when the magnitude over/underflows f64
            let sr = if d.re.is_sign_negative() { -1.0 } else { 1.0 };
            let si = if d.im.is_sign_negative() { -1.0 } else { 1.0 };
            let (a, b) = d.to_f64_pair();
            re_part.push(if a.is_finite() && a != 0.0 { squash(a) } else { sr * 1e-300 });
            im_part.push(if b.is_finite() && b != 0.0 { squash(b) } else { si * 1e-300 });
        }
    }
    Ok(ContourMap { re_axis, im_axis, re_part, im_part })
}

const POLE_FILE_VERSION: &str = "stark-poles v1";

impl PoleSet {
    /// Versioned text form: header lines, then one pole per line with
    /// Re W, Im W, family, Re D+′, Im D+′, residual.
    pub fn to_text(&self, digits: usize, config_hash: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {POLE_FILE_VERSION}");
        let _ = writeln!(s, "# config {config_hash}");
        let _ = writeln!(s, "# s {} w_min {:e} w_max {:e} certificate {}", self.contour_s, self.w_min, self.w_max, self.completeness_certificate);
        for p in &self.poles {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {:.3e}",
                sci(&p.w.re, digits),
                sci(&p.w.im, digits),
                p.family.tag(),
                sci(&p.dplus_deriv.re, digits),
                sci(&p.dplus_deriv.im, digits),
                p.refinement_residual
            );
        }
        s
    }

    /// Parse [`to_text`](Self::to_text) output; D̃+′ is recomputed at the
    /// stored W.
    pub fn from_text(text: &str, m: &ModelParams) -> Result<PoleSet, PoleError> {
        let bad = |e: &str| PoleError::Format(e.to_string());
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(&format!("# {POLE_FILE_VERSION}")) {
            return Err(bad("missing version header"));
        }
        lines.next();
        let meta: Vec<&str> = lines.next().ok_or_else(|| bad("missing metadata"))?.split_whitespace().collect();
        if meta.len() < 9 {
            return Err(bad("short metadata line"));
        }
        let contour_s: Ratio = meta[2].parse().map_err(|_| bad("contour s"))?;
        let w_min: f64 = meta[4].parse().map_err(|_| bad("w_min"))?;
        let w_max: f64 = meta[6].parse().map_err(|_| bad("w_max"))?;
        let cert: i64 = meta[8].parse().map_err(|_| bad("certificate"))?;
        let p = m.bits();
        let fl = |t: &str| -> Result<Float, PoleError> {
            Ok(Float::with_val(p, Float::parse(t).map_err(|_| bad("number"))?))
        };
        let mut poles = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 6 {
                return Err(bad("pole line needs 6 fields"));
            }
            let w = MpComplex::from_parts(fl(f[0])?, fl(f[1])?);
            let family = Family::parse(f[2]).ok_or_else(|| bad("family"))?;
            let dplus_deriv = MpComplex::from_parts(fl(f[3])?, fl(f[4])?);
            let (_, dtilde_deriv) = m.d_tilde_with_deriv(&w, Sign::Plus)?;
            let refinement_residual: f64 = f[5].parse().map_err(|_| bad("residual"))?;
            poles.push(ResonantPole { w, family, dplus_deriv, dtilde_deriv, refinement_residual });
        }
        Ok(PoleSet { poles, contour_s, w_min, w_max, completeness_certificate: cert })
    }
}
