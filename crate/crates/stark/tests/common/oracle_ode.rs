//! Independent Airy oracle: integrate y″ = z·y from the origin along a
//! straight path with fixed-step Taylor series. Plain (re, im) pairs of MPFR
//! floats, no code shared with the library.

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

#[derive(Clone)]
pub struct C(pub Float, pub Float);

impl C {
    pub fn new(p: u32, re: f64, im: f64) -> C {
        C(Float::with_val(p, re), Float::with_val(p, im))
    }
    pub fn add(&self, o: &C) -> C {
        C(Float::with_val(self.0.prec(), &self.0 + &o.0), Float::with_val(self.0.prec(), &self.1 + &o.1))
    }
    pub fn sub(&self, o: &C) -> C {
        C(Float::with_val(self.0.prec(), &self.0 - &o.0), Float::with_val(self.0.prec(), &self.1 - &o.1))
    }
    pub fn mul(&self, o: &C) -> C {
        let p = self.0.prec();
        let re = Float::with_val(p, &self.0 * &o.0) - Float::with_val(p, &self.1 * &o.1);
        let im = Float::with_val(p, &self.0 * &o.1) + Float::with_val(p, &self.1 * &o.0);
        C(re, im)
    }
    pub fn scale(&self, k: &Float) -> C {
        C(Float::with_val(self.0.prec(), &self.0 * k), Float::with_val(self.0.prec(), &self.1 * k))
    }
    pub fn div_int(&self, k: u64) -> C {
        C(Float::with_val(self.0.prec(), &self.0 / k), Float::with_val(self.0.prec(), &self.1 / k))
    }
    pub fn abs(&self) -> Float {
        let p = self.0.prec();
        (Float::with_val(p, &self.0 * &self.0) + Float::with_val(p, &self.1 * &self.1)).sqrt()
    }
}

/// (Ai, Ai′, Bi, Bi′) at `z` computed at `p` bits with `steps` Taylor steps.
pub fn airy_ode(z: (f64, f64), p: u32, steps: u32) -> [C; 4] {
    let three = Float::with_val(p, 3);
    let g23 = Float::with_val(p, Float::with_val(p, 2) / 3u32).gamma();
    let g13 = Float::with_val(p, Float::with_val(p, 1) / 3u32).gamma();
    let ai0 = Float::with_val(p, 1) / (Float::with_val(p, three.clone().pow(Float::with_val(p, 2) / 3u32)) * &g23);
    let aip0 = -(Float::with_val(p, 1) / (Float::with_val(p, three.clone().pow(Float::with_val(p, 1) / 3u32)) * &g13));
    let sq3 = Float::with_val(p, 3).sqrt();
    let bi0 = Float::with_val(p, &ai0 * &sq3);
    let bip0 = -Float::with_val(p, &aip0 * &sq3);
    let _ = Float::with_val(p, Constant::Pi);
    let mut ya = (C(ai0, Float::new(p)), C(aip0, Float::new(p)));
    let mut yb = (C(bi0, Float::new(p)), C(bip0, Float::new(p)));
    let h = C::new(p, z.0, z.1).div_int(u64::from(steps));
    let mut x = C::new(p, 0.0, 0.0);
    for _ in 0..steps {
        ya = step(&x, &ya, &h, p);
        yb = step(&x, &yb, &h, p);
        x = x.add(&h);
    }
    [ya.0, ya.1, yb.0, yb.1]
}

fn step(x: &C, y: &(C, C), h: &C, p: u32) -> (C, C) {
    // a_{n+2} = (x a_n + a_{n−1}) / ((n+1)(n+2))
    let mut a: Vec<C> = vec![y.0.clone(), y.1.clone()];
    let tiny = Float::with_val(p, Float::i_pow_u(2, p + 20)).recip();
    let hn = h.abs();
    let mut n = 0usize;
    loop {
        let prev = if n == 0 { C::new(p, 0.0, 0.0) } else { a[n - 1].clone() };
        let next = x.mul(&a[n]).add(&prev).div_int(((n + 1) * (n + 2)) as u64);
        a.push(next);
        n += 1;
        if n > 12 {
            let m = Float::with_val(p, a[n + 1].abs() * Float::with_val(p, hn.clone().pow(n as u32 + 1)));
            let m2 = Float::with_val(p, a[n].abs() * Float::with_val(p, hn.clone().pow(n as u32)));
            if m < tiny && m2 < tiny {
                break;
            }
        }
        if n > 4000 {
            break;
        }
    }
    let mut v = C::new(p, 0.0, 0.0);
    let mut d = C::new(p, 0.0, 0.0);
    for k in (0..a.len()).rev() {
        v = v.mul(h).add(&a[k]);
        if k >= 1 {
            d = d.mul(h).add(&a[k].scale(&Float::with_val(p, k as u64)));
        }
    }
    (v, d)
}

#[allow(dead_code)]
pub fn diff_rel(a: &C, b: &C) -> f64 {
    let d = a.sub(b).abs();
    let s = b.abs();
    if s.is_zero() {
        return d.to_f64();
    }
    Float::with_val(d.prec(), &d / &s).to_f64()
}
