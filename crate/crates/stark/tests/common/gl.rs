//! Gauss–Legendre panels for oracle quadratures, written independently of
//! the library's quadrature module (Golub–Welsch is avoided; nodes come from
//! Newton iteration on P_n started at Chebyshev points).

use rug::Float;

pub fn nodes(n: usize, p: u32) -> Vec<(Float, Float)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = Float::with_val(p, (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos());
        let mut d = Float::new(p);
        for _ in 0..200 {
            let (pn, pd) = eval(n, &x);
            let dx = Float::with_val(p, &pn / &pd);
            x -= &dx;
            d = pd;
            if dx.is_zero() || dx.get_exp().map_or(false, |e| e < -(p as i32) + 6) {
                d = eval(n, &x).1;
                break;
            }
        }
        let w = Float::with_val(p, 2u32) / (Float::with_val(p, 1u32 - Float::with_val(p, &x * &x)) * Float::with_val(p, &d * &d));
        out.push((x, w));
    }
    out
}

fn eval(n: usize, x: &Float) -> (Float, Float) {
    let p = x.prec();
    let (mut a, mut b) = (Float::with_val(p, 1u32), x.clone());
    for k in 1..n {
        let c = (Float::with_val(p, x * &b) * (2 * k + 1) as u32 - Float::with_val(p, &a * k as u32)) / (k + 1) as u32;
        a = std::mem::replace(&mut b, c);
    }
    let d = Float::with_val(p, Float::with_val(p, x * &b) - &a) * n as u32 / Float::with_val(p, Float::with_val(p, x * x) - 1u32);
    (b, d)
}

/// Panelled rule on [lo, hi]: (abscissa, weight) pairs.
pub fn panels(lo: f64, hi: f64, panels: usize, n: usize, p: u32) -> Vec<(Float, Float)> {
    let base = nodes(n, p);
    let width = Float::with_val(p, hi - lo) / panels as u32;
    let half = Float::with_val(p, &width / 2u32);
    let mut out = Vec::with_capacity(panels * n);
    for k in 0..panels {
        let mid = Float::with_val(p, lo) + Float::with_val(p, &width * k as u32) + &half;
        for (x, w) in &base {
            out.push((Float::with_val(p, &mid + Float::with_val(p, x * &half)), Float::with_val(p, w * &half)));
        }
    }
    out
}
