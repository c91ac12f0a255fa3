//! Complex Airy functions Ai, Ai′, Bi, Bi′ at arbitrary precision.
//!
//! Small arguments use the Maclaurin series at raised precision (terms can
//! exceed the result by up to e^{2|ζ|}); large arguments use the Poincaré
//! expansion of Ai in |arg z| ≤ 2π/3 and the connection formulas elsewhere.
//! The switch radius is where the optimally truncated asymptotic remainder
//! e^{−2|ζ|} drops below the working epsilon.

use rug::Float;

use super::{consts, MpComplex, MpError, PrecisionContext};

#[derive(Clone, Debug, PartialEq)]
pub struct AiryValues {
    pub ai: MpComplex,
    pub aip: MpComplex,
    pub bi: MpComplex,
    pub bip: MpComplex,
}

impl AiryValues {
    pub fn with_prec(&self, p: u32) -> Self {
        AiryValues {
            ai: self.ai.with_prec(p),
            aip: self.aip.with_prec(p),
            bi: self.bi.with_prec(p),
            bip: self.bip.with_prec(p),
        }
    }

    /// Ci± = Bi ± i·Ai.
    pub fn ci(&self, sign: Sign) -> MpComplex {
        combine(&self.bi, &self.ai, sign)
    }

    pub fn ci_prime(&self, sign: Sign) -> MpComplex {
        combine(&self.bip, &self.aip, sign)
    }

    /// Ai·Bi′ − Ai′·Bi, equal to 1/π for exact values.
    pub fn wronskian(&self) -> MpComplex {
        &(&self.ai * &self.bip) - &(&self.aip * &self.bi)
    }

    pub fn conj(&self) -> Self {
        AiryValues { ai: self.ai.conj(), aip: self.aip.conj(), bi: self.bi.conj(), bip: self.bip.conj() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

fn combine(b: &MpComplex, a: &MpComplex, sign: Sign) -> MpComplex {
    let ia = a.mul_i();
    match sign {
        Sign::Plus => b + &ia,
        Sign::Minus => b - &ia,
    }
}

/// All four Airy values at `z`, rounded to the working precision of `ctx`.
pub fn airy(z: &MpComplex, ctx: &PrecisionContext) -> Result<AiryValues, MpError> {
    if !z.is_finite() {
        return Err(MpError::NonFinite);
    }
    let p = ctx.bits();
    let zz = z.with_prec(p + 16);
    airy_bits(&zz, p + 16).map(|v| v.with_prec(p))
}

/// Ci±(z) = Bi(z) ± i·Ai(z).
pub fn ci(z: &MpComplex, sign: Sign, ctx: &PrecisionContext) -> Result<MpComplex, MpError> {
    Ok(airy(z, ctx)?.ci(sign))
}

/// d/dz Ci±(z).
pub fn ci_prime(z: &MpComplex, sign: Sign, ctx: &PrecisionContext) -> Result<MpComplex, MpError> {
    Ok(airy(z, ctx)?.ci_prime(sign))
}

/// Evaluate at `ctx` and again at 20 more digits; fail if any component
/// moved by more than 10^{−(digits−5)} of its local envelope.
pub fn airy_certified(z: &MpComplex, ctx: &PrecisionContext) -> Result<AiryValues, MpError> {
    let lo = airy(z, ctx)?;
    let hi = airy(z, &ctx.raised(20))?;
    let (ea, eb) = envelopes(z);
    let zabs = z.abs().to_f64().max(1.0);
    let tol = -(f64::from(ctx.digits) - 5.0) * std::f64::consts::LN_10;
    let pairs = [
        (&lo.ai, &hi.ai, ea),
        (&lo.aip, &hi.aip, ea + 0.5 * zabs.ln()),
        (&lo.bi, &hi.bi, eb),
        (&lo.bip, &hi.bip, eb + 0.5 * zabs.ln()),
    ];
    for (a, b, env) in pairs {
        let d = (a - b).abs();
        if d.is_zero() {
            continue;
        }
        let scale = ln_abs(b).max(env);
        let lost = d.clone().ln().to_f64() - scale;
        if lost > tol {
            let lost_digits = ((lost - tol) / std::f64::consts::LN_10).ceil() as u32;
            return Err(MpError::PrecisionExhausted { what: "airy", lost: lost_digits, available: ctx.digits });
        }
    }
    Ok(lo.with_prec(ctx.bits()))
}

fn ln_abs(z: &MpComplex) -> f64 {
    if z.is_zero() {
        return f64::NEG_INFINITY;
    }
    z.abs().ln().to_f64()
}

/// Natural-log envelopes of |Ai| and |Bi| from the leading asymptotic terms.
fn envelopes(z: &MpComplex) -> (f64, f64) {
    let (x, y) = z.to_f64_pair();
    let r = x.hypot(y);
    if r < 1.0 {
        return (-2.0, -2.0);
    }
    let th = y.atan2(x);
    let third = 2.0 * std::f64::consts::PI / 3.0;
    // −Re ζ for principal branch at radius r and angle t
    let neg_re_zeta = |t: f64| -(2.0 / 3.0) * r.powf(1.5) * (1.5 * t).cos();
    let wrap = |t: f64| {
        let mut t = t;
        while t > std::f64::consts::PI {
            t -= 2.0 * std::f64::consts::PI;
        }
        while t <= -std::f64::consts::PI {
            t += 2.0 * std::f64::consts::PI;
        }
        t
    };
    let a_rot = neg_re_zeta(wrap(th + third)).max(neg_re_zeta(wrap(th - third)));
    let ea = if th.abs() <= third { neg_re_zeta(th) } else { a_rot };
    let eb = a_rot;
    let q = -0.25 * r.ln();
    (ea + q, eb + q)
}

fn switch_radius(p: u32) -> f64 {
    // 2|ζ| ≥ p·ln2 + margin with |ζ| = (2/3) r^{3/2}
    let need = (f64::from(p) * std::f64::consts::LN_2 + 24.0) * 0.75;
    need.powf(2.0 / 3.0)
}

pub(crate) fn airy_bits(z: &MpComplex, p: u32) -> Result<AiryValues, MpError> {
    let (x, y) = z.to_f64_pair();
    let r = x.hypot(y);
    if r <= switch_radius(p) {
        return maclaurin(z, p);
    }
    let c = consts(p);
    let (ai, aip) = ai_large(z, p)?;
    let wz = &c.omega * z;
    let wbz = &c.omega.conj() * z;
    let (a1, a1p) = ai_large(&wz, p)?;
    let (a2, a2p) = ai_large(&wbz, p)?;
    // Bi = e^{iπ/6}Ai(ωz) + e^{−iπ/6}Ai(ω̄z); Bi′ = e^{5iπ/6}Ai′(ωz) + e^{−5iπ/6}Ai′(ω̄z)
    let e6 = &c.e_pi6;
    let e6b = e6.conj();
    let bi = &(e6 * &a1) + &(&e6b * &a2);
    // e^{5iπ/6} = ω·e^{iπ/6}
    let e56 = &c.omega * e6;
    let bip = &(&e56 * &a1p) + &(&e56.conj() * &a2p);
    Ok(AiryValues { ai, aip, bi, bip })
}

/// Ai and Ai′ for |z| beyond the switch radius, any argument.
fn ai_large(z: &MpComplex, p: u32) -> Result<(MpComplex, MpComplex), MpError> {
    let (x, y) = z.to_f64_pair();
    let th = y.atan2(x);
    if th.abs() <= 2.0 * std::f64::consts::PI / 3.0 + 1e-12 {
        return ai_asymptotic(z, p);
    }
    // Ai(z) = −ωAi(ωz) − ω̄Ai(ω̄z); Ai′(z) = −ω̄Ai′(ωz) − ωAi′(ω̄z)
    let c = consts(p);
    let w = &c.omega;
    let wb = w.conj();
    let (a1, a1p) = ai_asymptotic(&(w * z), p)?;
    let (a2, a2p) = ai_asymptotic(&(&wb * z), p)?;
    let ai = -(&(w * &a1) + &(&wb * &a2));
    let aip = -(&(&wb * &a1p) + &(w * &a2p));
    Ok((ai, aip))
}

/// Poincaré expansion of Ai, Ai′ for |arg z| ≤ 2π/3 (and large |z|).
fn ai_asymptotic(z: &MpComplex, p: u32) -> Result<(MpComplex, MpComplex), MpError> {
    let q = p + 16;
    let z = z.with_prec(q);
    let c = consts(q);
    let sz = z.sqrt();
    let z14 = sz.sqrt();
    let zeta = (&z * &sz).scale(&(Float::with_val(q, 2) / 3u32));
    let izeta = zeta.recip();
    let mut term = MpComplex::one(q);
    let mut u = Float::with_val(q, 1);
    let mut s_ai = MpComplex::one(q);
    let mut s_aip = MpComplex::one(q);
    let target = i64::from(p) + 4;
    let mut last_mag = 0i64;
    let mut k: u64 = 1;
    loop {
        // u_k = u_{k−1}(6k−5)(6k−3)(6k−1)/(216 k (2k−1))
        u *= (6 * k - 5) * (6 * k - 3);
        u *= 6 * k - 1;
        u /= 216 * k;
        u /= 2 * k - 1;
        term = &term * &izeta;
        term = -term;
        // (−1)^k u_k ζ^{−k} and v_k = −(6k+1)/(6k−1)·u_k
        let t_ai = term.scale(&u);
        let v = Float::with_val(q, &u * (6 * k + 1)) / (6 * k - 1);
        let v = -v;
        let t_aip = term.scale(&v);
        s_ai.add_assign_ref(&t_ai);
        s_aip.add_assign_ref(&t_aip);
        let m = t_ai.exp2_mag().unwrap_or(i64::MIN / 2).max(t_aip.exp2_mag().unwrap_or(i64::MIN / 2));
        if m < -target {
            break;
        }
        if k > 8 && m > last_mag {
            return Err(MpError::PrecisionExhausted { what: "airy asymptotic", lost: 0, available: p });
        }
        last_mag = m;
        k += 1;
        if k > 100_000 {
            return Err(MpError::PrecisionExhausted { what: "airy asymptotic", lost: 0, available: p });
        }
    }
    let e = (-&zeta).exp();
    let two_sqrt_pi = Float::with_val(q, &c.sqrt_pi * 2u32);
    let pre = e.scale(&two_sqrt_pi.recip());
    let ai = &(&pre / &z14) * &s_ai;
    let aip = -(&(&pre * &z14) * &s_aip);
    Ok((ai.with_prec(p), aip.with_prec(p)))
}

/// Maclaurin series with precision raised to absorb cancellation; retries
/// with more bits if the observed loss exceeds the allowance.
fn maclaurin(z: &MpComplex, p: u32) -> Result<AiryValues, MpError> {
    let (x, y) = z.to_f64_pair();
    let r = x.hypot(y);
    let zeta = (2.0 / 3.0) * r.powf(1.5);
    let mut extra = (2.0 * zeta / std::f64::consts::LN_2).ceil() as u32 + 24;
    for _ in 0..4 {
        let (vals, lost) = maclaurin_at(z, p, extra);
        if lost + 8 <= i64::from(extra) {
            return Ok(vals);
        }
        extra = (lost as u32).saturating_add(32);
        if extra > 8 * p + 4096 {
            break;
        }
    }
    Err(MpError::PrecisionExhausted { what: "airy series", lost: extra / 3, available: p / 3 })
}

fn maclaurin_at(z: &MpComplex, p: u32, extra: u32) -> (AiryValues, i64) {
    let q = p + extra;
    let z = z.with_prec(q);
    let c = consts(q);
    let z3 = &(&z * &z) * &z;
    // f = Σ f_k, f_k/f_{k−1} = z³/((3k−1)3k); g_0 = z, g_k/g_{k−1} = z³/(3k(3k+1))
    // f′_1 = z²/2, f′_k/f′_{k−1} = z³/((3k−3)(3k−1)); g′_0 = 1, g′_k/g′_{k−1} = z³/(3k(3k−2))
    let mut f = MpComplex::one(q);
    let mut g = z.clone();
    let mut fp = (&z * &z).div_u(2);
    let mut gp = MpComplex::one(q);
    let mut sf = f.clone();
    let mut sg = g.clone();
    let mut sfp = fp.clone();
    let mut sgp = gp.clone();
    let mut max_mag = sf.exp2_mag().unwrap_or(0).max(sg.exp2_mag().unwrap_or(0)).max(sfp.exp2_mag().unwrap_or(0));
    let peak = (z3.abs().to_f64().sqrt() / 3.0).ceil() as u64 + 2;
    let mut k: u64 = 1;
    loop {
        f = &f * &z3;
        f = f.div_u(((3 * k - 1) * 3 * k) as u32);
        g = &g * &z3;
        g = g.div_u((3 * k * (3 * k + 1)) as u32);
        gp = &gp * &z3;
        gp = gp.div_u((3 * k * (3 * k - 2)) as u32);
        if k >= 2 {
            fp = &fp * &z3;
            fp = fp.div_u(((3 * k - 3) * (3 * k - 1)) as u32);
        }
        sf.add_assign_ref(&f);
        sg.add_assign_ref(&g);
        sgp.add_assign_ref(&gp);
        if k >= 2 {
            sfp.add_assign_ref(&fp);
        }
        let m = [&f, &g, &fp, &gp].iter().filter_map(|t| t.exp2_mag()).max().unwrap_or(i64::MIN / 2);
        max_mag = max_mag.max(m);
        if k > peak && m < max_mag - i64::from(q) - 4 {
            break;
        }
        if z3.is_zero() {
            break;
        }
        k += 1;
    }
    let c1 = &c.ai0;
    let c2 = &c.aip0_neg;
    let a = sf.scale(c1);
    let b = sg.scale(c2);
    let ap = sfp.scale(c1);
    let bp = sgp.scale(c2);
    let ai = &a - &b;
    let aip = &ap - &bp;
    let bi = (&a + &b).scale(&c.sqrt3);
    let bip = (&ap + &bp).scale(&c.sqrt3);
    let res_mag = [&ai, &aip, &bi, &bip].iter().filter_map(|t| t.exp2_mag()).min().unwrap_or(max_mag);
    let lost = (max_mag - res_mag).max(0);
    let vals = AiryValues { ai: ai.with_prec(p), aip: aip.with_prec(p), bi: bi.with_prec(p), bip: bip.with_prec(p) };
    (vals, lost)
}

/// Propagate Airy values from `u0` to `u0 + h` along the ODE y″ = u·y using
/// a Taylor series about `u0`, truncated when terms fall below 2^{−p}.
pub fn taylor_step(u0: &MpComplex, v: &AiryValues, h: &MpComplex, p: u32) -> AiryValues {
    if h.is_zero() {
        return v.with_prec(p);
    }
    let (ai, aip) = taylor_pair(u0, &v.ai, &v.aip, h, p);
    let (bi, bip) = taylor_pair(u0, &v.bi, &v.bip, h, p);
    AiryValues { ai, aip, bi, bip }
}

/// One solution of y″ = u·y: values (y, y′) at u0 + h from (y0, y0′) at u0.
pub(crate) fn taylor_pair(
    u0: &MpComplex,
    y0: &MpComplex,
    y0p: &MpComplex,
    h: &MpComplex,
    p: u32,
) -> (MpComplex, MpComplex) {
    // b_n = a_n h^n with b_{n+2} = (u0 h² b_n + h³ b_{n−1}) / ((n+1)(n+2))
    let s2 = &(u0 * h) * h;
    let s3 = &(h * h) * h;
    let mut bm1 = MpComplex::zero(p);
    let mut b0 = y0.with_prec(p);
    let mut b1 = (y0p * h).with_prec(p);
    let mut y = &b0 + &b1;
    let mut yd = b1.clone();
    let scale = y.exp2_mag().unwrap_or(0).max(b1.exp2_mag().unwrap_or(0));
    let floor = scale - i64::from(p) - 4;
    let mut tmp = Float::new(p);
    let mut next = MpComplex::zero(p);
    let mut n: u64 = 0;
    let mut small_run = 0;
    loop {
        next.assign_mul(&s2, &b0);
        next.mul_add_assign(&s3, &bm1, &mut tmp);
        let d = (n + 1) * (n + 2);
        next.re /= d;
        next.im /= d;
        y.add_assign_ref(&next);
        let k = n + 2;
        let mut kt = next.clone();
        kt.re *= k;
        kt.im *= k;
        yd.add_assign_ref(&kt);
        let m = next.exp2_mag().unwrap_or(i64::MIN / 2);
        if m < floor {
            small_run += 1;
            if small_run >= 3 {
                break;
            }
        } else {
            small_run = 0;
        }
        bm1 = std::mem::replace(&mut b0, std::mem::replace(&mut b1, next.clone()));
        n += 1;
        if n > 20_000 {
            break;
        }
    }
    let yd = &yd / h;
    (y, yd.with_prec(p))
}
