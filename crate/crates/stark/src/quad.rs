//! Quadrature building blocks in working precision.

use rug::ops::Pow;
use rug::Float;

use crate::mpnum::consts;

/// Gauss–Legendre nodes and weights on [−1, 1], ascending.
pub fn gauss_legendre(n: usize, bits: u32) -> (Vec<Float>, Vec<Float>) {
    let p = bits + 32;
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5);
        let mut x = Float::with_val(p, -theta.cos());
        let mut dp = Float::new(p);
        for _ in 0..100 {
            let (pn, d) = legendre(n, &x);
            let dx = Float::with_val(p, &pn / &d);
            x -= &dx;
            dp = d;
            if dx.is_zero() || dx.get_exp().is_some_and(|e| e < -(p as i32) + 4) {
                let (_, d) = legendre(n, &x);
                dp = d;
                break;
            }
        }
        let one_m = Float::with_val(p, 1 - Float::with_val(p, &x * &x));
        let w = Float::with_val(p, 2u32 / Float::with_val(p, one_m * Float::with_val(p, &dp * &dp)));
        xs.push(Float::with_val(bits, x));
        ws.push(Float::with_val(bits, w));
    }
    (xs, ws)
}

/// P_n(x) and P_n′(x) by the three-term recurrence.
fn legendre(n: usize, x: &Float) -> (Float, Float) {
    let p = x.prec();
    let mut p0 = Float::with_val(p, 1);
    let mut p1 = x.clone();
    if n == 0 {
        return (p0, Float::new(p));
    }
    for k in 2..=n {
        let k = k as u32;
        let a = Float::with_val(p, x * &p1) * (2 * k - 1);
        let b = Float::with_val(p, &p0 * (k - 1));
        let p2 = Float::with_val(p, a - b) / k;
        p0 = std::mem::replace(&mut p1, p2);
    }
    // P_n′ = n(x P_n − P_{n−1})/(x² − 1)
    let num = Float::with_val(p, Float::with_val(p, x * &p1) - &p0) * n as u32;
    let den = Float::with_val(p, Float::with_val(p, x * x) - 1u32);
    (p1, Float::with_val(p, num / den))
}

/// Even Bernoulli numbers B_2, B_4, …, B_{2K} from ζ(2k).
pub fn bernoulli_even(k_max: usize, bits: u32) -> Vec<Float> {
    let p = bits + 16;
    let two_pi = Float::with_val(p, &consts(p).pi * 2u32);
    (1..=k_max)
        .map(|k| {
            let n = 2 * k as u32;
            let z = Float::with_val(p, Float::with_val(p, n).zeta());
            let f = Float::with_val(p, Float::factorial(n));
            let tp = Float::with_val(p, two_pi.clone().pow(n));
            let mut b = Float::with_val(p, z * f) * 2u32 / tp;
            if k % 2 == 0 {
                b = -b;
            }
            Float::with_val(bits, b)
        })
        .collect()
}

/// Endpoint-corrected trapezoid weights (Gregory rule of order `m`) for
/// the nodes 0, 1, …, n: unit weights inside, with the first and last `m`
/// adjusted so that polynomials of degree < m integrate exactly. Needs
/// n ≥ 2m.
pub fn gregory_weights(n: usize, m: usize, bits: u32) -> Vec<Float> {
    assert!(n >= 2 * m && m >= 1, "gregory rule needs n ≥ 2m");
    let p = bits + 64;
    // The trapezoid error of f is R(n) − R(0) with R = Σ B_2j/(2j)!·f^(2j−1),
    // so the left corrections must reproduce R(0) on every monomial:
    // Σ c_i·i^d = B_{d+1}/(d+1) for odd d and 0 for even d.
    let bern = bernoulli_all(m + 1, p);
    let mut a = vec![vec![Float::new(p); m]; m];
    let mut rhs = vec![Float::new(p); m];
    for d in 0..m {
        for (i, slot) in a[d].iter_mut().enumerate() {
            *slot = if d == 0 { Float::with_val(p, 1) } else { Float::with_val(p, i as u32).pow(d as u32) };
        }
        if d % 2 == 1 {
            rhs[d] = Float::with_val(p, &bern[d + 1] / (d as u32 + 1));
        }
    }
    let c = solve(a, rhs);
    let mut w: Vec<Float> = (0..=n).map(|_| Float::with_val(p, 1)).collect();
    w[0] = Float::with_val(p, 0.5);
    w[n] = Float::with_val(p, 0.5);
    for (i, ci) in c.iter().enumerate() {
        w[i] += ci;
        w[n - i] += ci;
    }
    w.into_iter().map(|x| Float::with_val(bits, x)).collect()
}

/// B_0 … B_k (B_1 = −1/2) from Σ_{j≤n} C(n+1, j)·B_j = 0.
fn bernoulli_all(k: usize, p: u32) -> Vec<Float> {
    let mut b: Vec<Float> = vec![Float::with_val(p, 1)];
    for n in 1..=k {
        let mut s = Float::new(p);
        let mut binom = Float::with_val(p, 1);
        for (j, bj) in b.iter().enumerate() {
            s += Float::with_val(p, &binom * bj);
            binom = Float::with_val(p, &binom * (n + 1 - j) as u32) / (j + 1) as u32;
        }
        b.push(Float::with_val(p, -s / (n + 1) as u32));
    }
    b
}

fn solve(mut a: Vec<Vec<Float>>, mut b: Vec<Float>) -> Vec<Float> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].clone().abs().partial_cmp(&a[j][col].clone().abs()).expect("finite"))
            .expect("nonempty");
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = Float::with_val(a[r][col].prec(), &a[r][col] / &a[col][col]);
            for c in col..n {
                let t = Float::with_val(f.prec(), &f * &a[col][c]);
                a[r][c] -= t;
            }
            let t = Float::with_val(f.prec(), &f * &b[col]);
            b[r] -= t;
        }
    }
    let mut x = vec![Float::new(b[0].prec()); n];
    for r in (0..n).rev() {
        let mut s = b[r].clone();
        for c in r + 1..n {
            s -= Float::with_val(s.prec(), &a[r][c] * &x[c]);
        }
        x[r] = Float::with_val(s.prec(), s / &a[r][r]);
    }
    x
}
