//! Multiprecision substrate: complex arithmetic over MPFR and complex Airy
//! functions.

mod airy;
mod complex;
mod line;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};

pub use airy::{airy, airy_certified, ci, ci_prime, taylor_step, AiryValues, Sign};
pub use complex::{sci, MpComplex};
pub use line::AiryLine;

/// Working precision in decimal digits.
///
/// `guard_digits` are carried internally on top of `digits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecisionContext {
    pub digits: u32,
    pub guard_digits: u32,
}

impl PrecisionContext {
    pub const MIN_DIGITS: u32 = 30;

    pub fn new(digits: u32) -> Result<Self, MpError> {
        Self::with_guard(digits, 12)
    }

    pub fn with_guard(digits: u32, guard_digits: u32) -> Result<Self, MpError> {
        if digits < Self::MIN_DIGITS {
            return Err(MpError::PrecisionTooLow(digits));
        }
        Ok(PrecisionContext { digits, guard_digits })
    }

    /// Binary precision for all arithmetic: digits plus guard, in bits.
    pub fn bits(&self) -> u32 {
        digits_to_bits(self.digits + self.guard_digits)
    }

    /// Same guard, more digits.
    pub fn raised(&self, extra: u32) -> Self {
        PrecisionContext { digits: self.digits + extra, guard_digits: self.guard_digits }
    }

    /// 10^(−digits) as a float at working precision.
    pub fn eps(&self) -> Float {
        let p = self.bits();
        Float::with_val(p, Float::i_pow_u(10, self.digits)).recip()
    }

    pub fn float(&self, v: f64) -> Float {
        Float::with_val(self.bits(), v)
    }

    /// Exact rational `n/d` rounded to working precision.
    pub fn ratio(&self, n: i64, d: i64) -> Float {
        Float::with_val(self.bits(), n) / d
    }

    pub fn complex(&self, re: f64, im: f64) -> MpComplex {
        MpComplex::from_f64(self.bits(), re, im)
    }
}

pub fn digits_to_bits(digits: u32) -> u32 {
    (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as u32 + 8
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MpError {
    #[error("precision of {0} digits is below the supported minimum of 30")]
    PrecisionTooLow(u32),
    #[error("precision exhausted: {what} lost {lost} of {available} digits")]
    PrecisionExhausted { what: &'static str, lost: u32, available: u32 },
    #[error("non-finite argument")]
    NonFinite,
}

/// Constants memoized per binary precision.
#[derive(Debug)]
pub struct Consts {
    pub pi: Float,
    pub sqrt3: Float,
    /// Ai(0), −Ai′(0)
    pub ai0: Float,
    pub aip0_neg: Float,
    /// √π
    pub sqrt_pi: Float,
    /// e^{iπ/6}, e^{iπ/3}, ω = e^{2πi/3}
    pub e_pi6: MpComplex,
    pub e_pi3: MpComplex,
    pub omega: MpComplex,
}

fn table() -> &'static RwLock<HashMap<u32, Arc<Consts>>> {
    static T: OnceLock<RwLock<HashMap<u32, Arc<Consts>>>> = OnceLock::new();
    T.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Constants at `bits` of precision; computed once per precision level.
pub fn consts(bits: u32) -> Arc<Consts> {
    if let Some(c) = table().read().expect("constant table poisoned").get(&bits) {
        return c.clone();
    }
    let c = Arc::new(build_consts(bits));
    let mut w = table().write().expect("constant table poisoned");
    w.entry(bits).or_insert(c).clone()
}

fn build_consts(bits: u32) -> Consts {
    let p = bits + 32;
    let pi = Float::with_val(p, Constant::Pi);
    let sqrt3 = Float::with_val(p, 3).sqrt();
    let third = Float::with_val(p, 1) / 3u32;
    let g13 = Float::with_val(p, &third).gamma();
    let g23 = Float::with_val(p, 2 * third.clone()).gamma();
    let cbrt3 = Float::with_val(p, 3).cbrt();
    // Ai(0) = 3^{-2/3}/Γ(2/3), −Ai′(0) = 3^{-1/3}/Γ(1/3)
    let ai0 = (Float::with_val(p, &cbrt3 * &cbrt3) * &g23).recip();
    let aip0_neg = Float::with_val(p, &cbrt3 * &g13).recip();
    let sqrt_pi = Float::with_val(p, pi.sqrt_ref());
    let ang = |k: u32| {
        let a = Float::with_val(p, &pi / k);
        let (s, c) = a.sin_cos(Float::new(p));
        MpComplex::from_parts(c, s)
    };
    let e_pi6 = ang(6);
    let e_pi3 = ang(3);
    let omega = {
        let a = Float::with_val(p, &pi * 2u32) / 3u32;
        let (s, c) = a.sin_cos(Float::new(p));
        MpComplex::from_parts(c, s)
    };
    let r = |x: Float| Float::with_val(bits, x);
    Consts {
        pi: r(pi),
        sqrt3: r(sqrt3),
        ai0: r(ai0),
        aip0_neg: r(aip0_neg),
        sqrt_pi: r(sqrt_pi),
        e_pi6: e_pi6.with_prec(bits),
        e_pi3: e_pi3.with_prec(bits),
        omega: omega.with_prec(bits),
    }
}
