//! Complex numbers over MPFR reals.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Special;
use rug::{Assign, Float};

/// Complex number with multiprecision real and imaginary parts.
///
/// Binary operators produce a result at the larger of the two operand
/// precisions.
#[derive(Clone, Debug, PartialEq)]
pub struct MpComplex {
    pub re: Float,
    pub im: Float,
}

impl MpComplex {
    pub fn zero(prec: u32) -> Self {
        MpComplex { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn one(prec: u32) -> Self {
        Self::from_f64(prec, 1.0, 0.0)
    }

    /// The imaginary unit.
    pub fn i(prec: u32) -> Self {
        Self::from_f64(prec, 0.0, 1.0)
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        MpComplex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    pub fn from_real(re: Float) -> Self {
        let im = Float::new(re.prec());
        MpComplex { re, im }
    }

    pub fn from_parts(re: Float, im: Float) -> Self {
        MpComplex { re, im }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    /// Copy rounded (or padded) to `prec` bits.
    pub fn with_prec(&self, prec: u32) -> Self {
        MpComplex { re: Float::with_val(prec, &self.re), im: Float::with_val(prec, &self.im) }
    }

    pub fn set_prec(&mut self, prec: u32) {
        self.re.set_prec(prec);
        self.im.set_prec(prec);
    }

    pub fn conj(&self) -> Self {
        MpComplex { re: self.re.clone(), im: Float::with_val(self.im.prec(), -&self.im) }
    }

    /// Multiply by i.
    pub fn mul_i(&self) -> Self {
        MpComplex { re: Float::with_val(self.im.prec(), -&self.im), im: self.re.clone() }
    }

    pub fn scale(&self, k: &Float) -> Self {
        let p = self.prec().max(k.prec());
        MpComplex { re: Float::with_val(p, &self.re * k), im: Float::with_val(p, &self.im * k) }
    }

    pub fn scale_f64(&self, k: f64) -> Self {
        let p = self.prec();
        MpComplex { re: Float::with_val(p, &self.re * k), im: Float::with_val(p, &self.im * k) }
    }

    pub fn div_u(&self, k: u32) -> Self {
        let p = self.prec();
        MpComplex { re: Float::with_val(p, &self.re / k), im: Float::with_val(p, &self.im / k) }
    }

    pub fn add_real(&self, k: &Float) -> Self {
        let p = self.prec().max(k.prec());
        MpComplex { re: Float::with_val(p, &self.re + k), im: Float::with_val(p, &self.im) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn norm_sqr(&self) -> Float {
        Float::with_val(self.prec(), &self.re * &self.re + &self.im * &self.im)
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    /// Principal argument in (−π, π].
    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }

    /// Rough base-2 exponent of the modulus, `None` for zero.
    ///
    /// Within one of log2|z|; used for cheap magnitude comparisons where
    /// converting to f64 could underflow.
    pub fn exp2_mag(&self) -> Option<i64> {
        let a = self.re.get_exp().map(i64::from);
        let b = self.im.get_exp().map(i64::from);
        match (a, b) {
            (None, None) => None,
            (Some(x), None) | (None, Some(x)) => Some(x),
            (Some(x), Some(y)) => Some(x.max(y)),
        }
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn recip(&self) -> Self {
        let p = self.prec();
        let d = self.norm_sqr();
        MpComplex {
            re: Float::with_val(p, &self.re / &d),
            im: Float::with_val(p, -Float::with_val(p, &self.im / &d)),
        }
    }

    /// Principal square root, branch cut on the negative real axis.
    pub fn sqrt(&self) -> Self {
        let p = self.prec();
        if self.is_zero() {
            return Self::zero(p);
        }
        let r = self.abs();
        let t = Float::with_val(p, &r + &*self.re.as_abs());
        let t = Float::with_val(p, t / 2u32).sqrt();
        let other = Float::with_val(p, &*self.im.as_abs() / &t) / 2u32;
        let other = Float::with_val(p, other);
        if self.re.cmp0() != Some(Ordering::Less) {
            let im = if self.im.is_sign_negative() { -other } else { other };
            MpComplex { re: t, im }
        } else {
            let im = if self.im.is_sign_negative() { -t } else { t };
            MpComplex { re: other, im }
        }
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let m = Float::with_val(p, self.re.exp_ref());
        let (s, c) = Float::with_val(p, &self.im).sin_cos(Float::new(p));
        MpComplex { re: Float::with_val(p, &m * &c), im: Float::with_val(p, &m * &s) }
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        MpComplex { re: self.abs().ln(), im: self.arg() }
    }

    pub fn cos(&self) -> Self {
        let p = self.prec();
        let (s, c) = Float::with_val(p, &self.re).sin_cos(Float::new(p));
        let (sh, ch) = Float::with_val(p, &self.im).sinh_cosh(Float::new(p));
        MpComplex { re: Float::with_val(p, &c * &ch), im: Float::with_val(p, -Float::with_val(p, &s * &sh)) }
    }

    pub fn sin(&self) -> Self {
        let p = self.prec();
        let (s, c) = Float::with_val(p, &self.re).sin_cos(Float::new(p));
        let (sh, ch) = Float::with_val(p, &self.im).sinh_cosh(Float::new(p));
        MpComplex { re: Float::with_val(p, &s * &ch), im: Float::with_val(p, &c * &sh) }
    }

    /// Integer power by repeated squaring.
    pub fn powu(&self, mut n: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.prec());
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// `self += a * b` without allocating a fresh result.
    pub fn mul_add_assign(&mut self, a: &MpComplex, b: &MpComplex, tmp: &mut Float) {
        tmp.assign(&a.re * &b.re - &a.im * &b.im);
        self.re += &*tmp;
        tmp.assign(&a.re * &b.im + &a.im * &b.re);
        self.im += &*tmp;
    }

    /// `self = a * b` reusing the existing allocation.
    pub fn assign_mul(&mut self, a: &MpComplex, b: &MpComplex) {
        self.re.assign(&a.re * &b.re - &a.im * &b.im);
        self.im.assign(&a.re * &b.im + &a.im * &b.re);
    }

    pub fn add_assign_ref(&mut self, o: &MpComplex) {
        self.re += &o.re;
        self.im += &o.im;
    }

    pub fn sub_assign_ref(&mut self, o: &MpComplex) {
        self.re -= &o.re;
        self.im -= &o.im;
    }

    pub fn nan(prec: u32) -> Self {
        MpComplex { re: Float::with_val(prec, Special::Nan), im: Float::with_val(prec, Special::Nan) }
    }

    /// Scientific notation with `digits` significant digits for each part.
    pub fn to_sci(&self, digits: usize) -> String {
        format!("{} {}", sci(&self.re, digits), sci(&self.im, digits))
    }
}

/// Format a real in scientific notation with `digits` significant digits.
pub fn sci(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return format!("{:.*e}", digits.saturating_sub(1), 0.0f64);
    }
    x.to_string_radix(10, Some(digits)).replace('@', "e")
}

impl fmt::Display for MpComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.re.to_f64(), self.im.to_f64())
    }
}

impl<'a> Add<&'a MpComplex> for &'a MpComplex {
    type Output = MpComplex;
    fn add(self, o: &MpComplex) -> MpComplex {
        let p = self.prec().max(o.prec());
        MpComplex { re: Float::with_val(p, &self.re + &o.re), im: Float::with_val(p, &self.im + &o.im) }
    }
}

impl<'a> Sub<&'a MpComplex> for &'a MpComplex {
    type Output = MpComplex;
    fn sub(self, o: &MpComplex) -> MpComplex {
        let p = self.prec().max(o.prec());
        MpComplex { re: Float::with_val(p, &self.re - &o.re), im: Float::with_val(p, &self.im - &o.im) }
    }
}

impl<'a> Mul<&'a MpComplex> for &'a MpComplex {
    type Output = MpComplex;
    fn mul(self, o: &MpComplex) -> MpComplex {
        let p = self.prec().max(o.prec());
        MpComplex {
            re: Float::with_val(p, &self.re * &o.re - &self.im * &o.im),
            im: Float::with_val(p, &self.re * &o.im + &self.im * &o.re),
        }
    }
}

impl<'a> Div<&'a MpComplex> for &'a MpComplex {
    type Output = MpComplex;
    fn div(self, o: &MpComplex) -> MpComplex {
        let p = self.prec().max(o.prec());
        let d = Float::with_val(p, &o.re * &o.re + &o.im * &o.im);
        let re = Float::with_val(p, &self.re * &o.re + &self.im * &o.im);
        let im = Float::with_val(p, &self.im * &o.re - &self.re * &o.im);
        MpComplex { re: re / &d, im: im / &d }
    }
}

impl Neg for &MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex { re: Float::with_val(self.re.prec(), -&self.re), im: Float::with_val(self.im.prec(), -&self.im) }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<MpComplex> for MpComplex {
            type Output = MpComplex;
            fn $m(self, o: MpComplex) -> MpComplex {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a MpComplex> for MpComplex {
            type Output = MpComplex;
            fn $m(self, o: &MpComplex) -> MpComplex {
                (&self).$m(o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        -&self
    }
}
