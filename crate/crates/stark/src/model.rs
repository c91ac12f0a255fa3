//! Square well of depth V0 on [−L, 0] with a hard (Neumann) wall at −L and the
//! linear potential −F·x for x > 0, plus its contact-interaction limit.
//!
//! Field-on eigenfunctions are parameterized by the real energy W. The
//! matching functions D±(W) are evaluated in a cleared form
//! D̃± = cos(kL)·Ci±′(u0) + (k·sin(kL)/α)·Ci±(u0), u0 = αW/F, so that
//! D± = (π/2)·D̃±/cos(kL). Both cos(kL) and k·sin(kL) are even in k, hence
//! entire in W, and D̃± has no spurious poles.

use std::fmt;
use std::str::FromStr;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::mpnum::{airy, consts, AiryValues, MpComplex, MpError, PrecisionContext, Sign};

/// Exact rational parameter, written as `p/q` or a terminating decimal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let s = if den < 0 { -1 } else { 1 };
        Ratio { num: s * num / g, den: s * den / g }
    }

    pub fn int(n: i64) -> Self {
        Ratio { num: n, den: 1 }
    }

    pub fn to_float(self, prec: u32) -> Float {
        Float::with_val(prec, self.num) / self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_positive(self) -> bool {
        self.num > 0
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("cannot parse `{0}` as an exact ratio")]
pub struct RatioParseError(pub String);

impl FromStr for Ratio {
    type Err = RatioParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || RatioParseError(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| err())?;
            let d: i64 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Ratio::new(n, d));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, s),
        };
        let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
        if ip.is_empty() && fp.is_empty() || fp.len() > 15 {
            return Err(err());
        }
        let digits = format!("{ip}{fp}");
        let n: i64 = digits.parse().map_err(|_| err())?;
        let d = 10i64.pow(fp.len() as u32);
        Ok(Ratio::new(if neg { -n } else { n }, d))
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Well {
    /// Square well of width `l` and depth `v0`.
    Finite { l: Ratio, v0: Ratio },
    /// Contact interaction: k·tan(kL) replaced by 1, single bound state at −1/2.
    Delta,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("position {0} is outside the domain x ≥ −L")]
    Domain(f64),
    #[error(transparent)]
    Mp(#[from] MpError),
}

/// Physical configuration plus working precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelParams {
    pub well: Well,
    pub field: Ratio,
    pub ctx: PrecisionContext,
}

/// Zero-field bound state: energy Q and inside wavenumber kQ.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundState {
    pub q: Float,
    pub k_q: Float,
}

impl BoundState {
    /// κ = √(−2Q), decay constant of the outside tail.
    pub fn kappa(&self) -> Float {
        Float::with_val(self.q.prec(), -Float::with_val(self.q.prec(), &self.q * 2u32)).sqrt()
    }
}

/// cos(kL) and k·sin(kL) together with their W-derivatives.
#[derive(Clone, Debug)]
pub struct WellFactors {
    pub cs: MpComplex,
    pub sn: MpComplex,
    pub dcs: MpComplex,
    pub dsn: MpComplex,
}

impl ModelParams {
    pub fn new(well: Well, field: Ratio, ctx: PrecisionContext) -> Result<Self, ModelError> {
        if let Well::Finite { l, v0 } = well {
            if !l.is_positive() || !v0.is_positive() {
                return Err(ModelError::Invalid("L and V0 must be positive".into()));
            }
        }
        if field.num < 0 {
            return Err(ModelError::Invalid("field must be non-negative".into()));
        }
        Ok(ModelParams { well, field, ctx })
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.well, Well::Delta)
    }

    pub fn bits(&self) -> u32 {
        self.ctx.bits()
    }

    pub fn with_ctx(&self, ctx: PrecisionContext) -> Self {
        ModelParams { ctx, ..*self }
    }

    pub fn f(&self) -> Float {
        self.field.to_float(self.bits())
    }

    pub fn l(&self) -> Float {
        match self.well {
            Well::Finite { l, .. } => l.to_float(self.bits()),
            Well::Delta => Float::new(self.bits()),
        }
    }

    pub fn v0(&self) -> Option<Float> {
        match self.well {
            Well::Finite { v0, .. } => Some(v0.to_float(self.bits())),
            Well::Delta => None,
        }
    }

    /// α = −(2F)^{1/3}.
    pub fn alpha(&self) -> Float {
        let p = self.bits();
        -Float::with_val(p, self.f() * 2u32).cbrt()
    }

    /// δ-normalization constant N = 2^{2/3}·F^{1/6}.
    pub fn norm_n(&self) -> Float {
        let p = self.bits();
        let two23 = Float::with_val(p, 4).cbrt();
        let f16 = self.f().sqrt().cbrt();
        Float::with_val(p, two23 * f16)
    }

    pub fn require_field(&self) -> Result<(), ModelError> {
        if self.field.is_positive() {
            Ok(())
        } else {
            Err(ModelError::Invalid("operation needs F > 0".into()))
        }
    }

    /// k_W = √(2(V0+W)), principal branch.
    pub fn k_of(&self, w: &MpComplex) -> MpComplex {
        let v0 = self.v0().unwrap_or_else(|| Float::new(self.bits()));
        w.add_real(&v0).scale_f64(2.0).sqrt()
    }

    /// cos(kL), k·sin(kL) and their derivatives in W; (1, 1, 0, 0) in the
    /// contact limit.
    pub fn well_factors(&self, w: &MpComplex) -> WellFactors {
        let p = self.bits();
        match self.well {
            Well::Delta => WellFactors {
                cs: MpComplex::one(p),
                sn: MpComplex::one(p),
                dcs: MpComplex::zero(p),
                dsn: MpComplex::zero(p),
            },
            Well::Finite { .. } => {
                let l = self.l();
                let k = self.k_of(w);
                let kl = k.scale(&l);
                let cs = kl.cos();
                let s = kl.sin();
                // s1 = sin(kL)/k, entire; → L as k → 0
                let s1 = if k.is_zero() { MpComplex::from_real(l.clone()) } else { &s / &k };
                let sn = &s * &k;
                let dcs = -s1.scale(&l);
                let dsn = &s1 + &cs.scale(&l);
                WellFactors { cs, sn, dcs, dsn }
            }
        }
    }

    /// k·tan(kL) (1 in the contact limit).
    pub fn g_tan(&self, w: &MpComplex) -> MpComplex {
        let f = self.well_factors(w);
        &f.sn / &f.cs
    }

    /// u0 = αW/F.
    pub fn u0(&self, w: &MpComplex) -> MpComplex {
        let a = Float::with_val(self.bits(), self.alpha() / self.f());
        w.scale(&a)
    }

    /// Cleared matching function D̃± together with its W-derivative.
    pub fn d_tilde_with_deriv(&self, w: &MpComplex, sign: Sign) -> Result<(MpComplex, MpComplex), ModelError> {
        self.require_field()?;
        let av = airy(&self.u0(w), &self.ctx)?;
        Ok(self.d_tilde_from(w, &av, sign))
    }

    /// D̃± and D̃±′ from precomputed Airy values at u0.
    pub fn d_tilde_from(&self, w: &MpComplex, av: &AiryValues, sign: Sign) -> (MpComplex, MpComplex) {
        let wf = self.well_factors(w);
        let alpha = self.alpha();
        let f = self.f();
        let u0 = self.u0(w);
        let c = av.ci(sign);
        let cp = av.ci_prime(sign);
        let inv_a = Float::with_val(self.bits(), alpha.recip_ref());
        // D̃ = cs·Ci′ + (sn/α)·Ci
        let d = &(&wf.cs * &cp) + &(&wf.sn * &c).scale(&inv_a);
        // D̃′ = cs′Ci′ + (α/F)·cs·u0·Ci + (sn′/α)·Ci + (sn/F)·Ci′, using Ci″ = u·Ci
        let a_f = Float::with_val(self.bits(), &alpha / &f);
        let inv_f = Float::with_val(self.bits(), f.recip_ref());
        let t1 = &wf.dcs * &cp;
        let t2 = (&(&wf.cs * &u0) * &c).scale(&a_f);
        let t3 = (&wf.dsn * &c).scale(&inv_a);
        let t4 = (&wf.sn * &cp).scale(&inv_f);
        let dd = &(&t1 + &t2) + &(&t3 + &t4);
        (d, dd)
    }

    pub fn d_tilde(&self, w: &MpComplex, sign: Sign) -> Result<MpComplex, ModelError> {
        Ok(self.d_tilde_with_deriv(w, sign)?.0)
    }

    /// D±(W) = (π/2)·(Ci±′(u0) + (k/α)·tan(kL)·Ci±(u0)).
    pub fn d_pm(&self, w: &MpComplex, sign: Sign) -> Result<MpComplex, ModelError> {
        let dt = self.d_tilde(w, sign)?;
        let wf = self.well_factors(w);
        let half_pi = Float::with_val(self.bits(), &consts(self.bits()).pi / 2u32);
        Ok((&dt / &wf.cs).scale(&half_pi))
    }

    /// Zero-field bound states sorted by energy.
    pub fn bound_states(&self) -> Vec<BoundState> {
        let p = self.bits();
        match self.well {
            Well::Delta => {
                let q = Float::with_val(p, -0.5);
                vec![BoundState { q, k_q: Float::new(p) }]
            }
            Well::Finite { .. } => finite_bound_states(self),
        }
    }

    /// Initial state: cos(kQ(L+x))/cos(kQ L) inside, e^{−κx} outside.
    pub fn psi_bound(&self, x: &Float, st: &BoundState) -> Result<Float, ModelError> {
        let p = self.bits();
        let l = self.l();
        if Float::with_val(p, x + &l).is_sign_negative() && !Float::with_val(p, x + &l).is_zero() {
            return Err(ModelError::Domain(x.to_f64()));
        }
        if x.is_sign_negative() && !x.is_zero() {
            let a = Float::with_val(p, &l + x) * &st.k_q;
            let b = Float::with_val(p, &l * &st.k_q);
            Ok(Float::with_val(p, a.cos() / b.cos()))
        } else {
            let e = Float::with_val(p, st.kappa() * x);
            Ok((-e).exp())
        }
    }

    /// ∫|φ|² over the whole domain for the unnormalized initial state.
    pub fn bound_norm_sqr(&self, st: &BoundState) -> Float {
        let p = self.bits();
        let kappa = st.kappa();
        let tail = Float::with_val(p, &kappa * 2u32).recip();
        if self.is_delta() {
            return tail;
        }
        // ∫_0^L cos²(k y) dy / cos²(kL) = (L/2 + sin(2kL)/(4k)) / cos²(kL)
        let l = self.l();
        let kl = Float::with_val(p, &st.k_q * &l);
        let c = Float::with_val(p, kl.cos_ref());
        let s2 = Float::with_val(p, Float::with_val(p, &kl * 2u32).sin());
        let inner = Float::with_val(p, &l / 2u32) + s2 / Float::with_val(p, &st.k_q * 4u32);
        inner / Float::with_val(p, &c * &c) + tail
    }

    /// Normalized real eigenfunction ψ_W(x) for real W.
    ///
    /// The square roots are fixed by √(D+D−) = |D+| and √(D∓/D±) = e^{∓iθ},
    /// θ = arg D+, which is the branch continuous along the real axis and the
    /// one that matches the inside branch at x = 0.
    pub fn psi_w(&self, x: &Float, w: &Float) -> Result<MpComplex, ModelError> {
        self.require_field()?;
        let p = self.bits();
        let l = self.l();
        if Float::with_val(p, x + &l).is_sign_negative() {
            return Err(ModelError::Domain(x.to_f64()));
        }
        let wc = MpComplex::from_real(w.clone());
        let dp = self.d_pm(&wc, Sign::Plus)?;
        let mag = dp.abs();
        let n = self.norm_n();
        if x.is_sign_negative() && !x.is_zero() {
            let k = self.k_of(&wc);
            let xl = Float::with_val(p, &l + x);
            let num = k.scale(&xl).cos();
            let den = k.scale(&l).cos();
            let scale = Float::with_val(p, &n * &mag).recip();
            return Ok((&num / &den).scale(&scale));
        }
        let ph = &dp.conj() / &MpComplex::from_real(mag.clone());
        let alpha = self.alpha();
        let xi = Float::with_val(p, x + Float::with_val(p, w / &self.f())) * &alpha;
        let av = airy(&MpComplex::from_real(xi), &self.ctx)?;
        let cp = av.ci(Sign::Plus);
        let cm = av.ci(Sign::Minus);
        let t1 = (&ph * &cp).mul_i();
        let t2 = (&ph.conj() * &cm).mul_i();
        let inv_n = Float::with_val(p, n.recip_ref());
        Ok((&t2 - &t1).scale(&inv_n))
    }
}

/// Roots of k·sin(kL) − κ·cos(kL) = 0 with κ = √(k0² − k²): one per
/// interval kL ∈ (mπ, mπ + π/2) below k0 = √(2V0).
fn finite_bound_states(m: &ModelParams) -> Vec<BoundState> {
    let p = m.bits();
    let l = m.l();
    let v0 = m.v0().expect("finite well");
    let k0 = Float::with_val(p, Float::with_val(p, &v0 * 2u32).sqrt());
    let pi = consts(p).pi.clone();
    let f = |k: &Float| -> Float {
        let kap2 = Float::with_val(p, &k0 * &k0) - Float::with_val(p, k * k);
        let kap = if kap2.is_sign_negative() { Float::new(p) } else { kap2.sqrt() };
        let kl = Float::with_val(p, k * &l);
        let (s, c) = kl.sin_cos(Float::new(p));
        Float::with_val(p, k * &s) - Float::with_val(p, &kap * &c)
    };
    let mut out = Vec::new();
    let mut mm: u32 = 0;
    loop {
        let lo = Float::with_val(p, &pi * mm) / &l;
        if lo >= k0 {
            break;
        }
        let hi_q = Float::with_val(p, Float::with_val(p, &pi * (2 * mm + 1)) / 2u32) / &l;
        let hi = if hi_q < k0 { hi_q } else { k0.clone() };
        let (mut a, mut b) = (lo, hi);
        let mut fa = f(&a);
        // bisection to full precision; the bracket always has a sign change
        for _ in 0..(p + 8) {
            let mid = Float::with_val(p, Float::with_val(p, &a + &b) / 2u32);
            if mid == a || mid == b {
                break;
            }
            let fm = f(&mid);
            if (fm.is_sign_negative()) == (fa.is_sign_negative()) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        let k = Float::with_val(p, Float::with_val(p, &a + &b) / 2u32);
        let q = Float::with_val(p, Float::with_val(p, &k * &k) / 2u32) - &v0;
        if q.is_sign_negative() && !q.is_zero() {
            out.push(BoundState { q, k_q: k });
        }
        mm += 1;
    }
    out.sort_by(|x, y| x.q.partial_cmp(&y.q).expect("finite energies"));
    out
}
