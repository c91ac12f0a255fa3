//! Overlap oracles that bypass Airy functions: the exterior eigenfunction is
//! propagated from the junction by Taylor steps of u″ = −2(W + F y)·u, and
//! ∫ e^{−κy}·u dy is accumulated by integrating each local Taylor polynomial
//! exactly.

use super::oracle_ode::C;
use rug::Float;

/// ∫_0^{y_max} e^{−κy} u(y) dy with u(0) = u0, u′(0) = u0p.
pub fn exterior(w: &C, f: &Float, kappa: &Float, u0: &C, u0p: &C, y_max: f64, steps: usize, order: usize) -> C {
    let p = w.0.prec();
    let h = Float::with_val(p, y_max) / steps as u32;
    let zero = C(Float::new(p), Float::new(p));
    let (mut u, mut up) = (u0.clone(), u0p.clone());
    let mut total = zero.clone();
    let step_decay = Float::with_val(p, -Float::with_val(p, kappa * &h)).exp();
    let mut env = Float::with_val(p, 1);
    // local weight coefficients (−κ)^m/m!
    let mut e = vec![Float::with_val(p, 1)];
    for m in 1..order {
        let prev = e[m - 1].clone();
        e.push(Float::with_val(p, -Float::with_val(p, &prev * kappa)) / m as u32);
    }
    for k in 0..steps {
        let y0 = Float::with_val(p, &h * k as u32);
        // −2(W + F y0) as a complex constant, −2F as the linear coefficient
        let fy = Float::with_val(p, f * &y0);
        let a0 = C(Float::with_val(p, Float::with_val(p, &w.0 + &fy) * -2i32), Float::with_val(p, &w.1 * -2i32));
        let a1 = Float::with_val(p, f * -2i32);
        let mut c = vec![u.clone(), up.clone()];
        for n in 0..order - 2 {
            let mut next = a0.mul(&c[n]);
            if n >= 1 {
                next = next.add(&c[n - 1].scale(&a1));
            }
            let d = Float::with_val(p, ((n + 1) * (n + 2)) as u32);
            next = next.scale(&Float::with_val(p, d.recip_ref()));
            c.push(next);
        }
        // ∫_0^h e^{−κs}u(y0+s) ds = Σ_n (Σ_i c_i e_{n−i}) h^{n+1}/(n+1)
        let mut hp = h.clone();
        let mut part = zero.clone();
        for n in 0..order {
            let mut d = zero.clone();
            for i in 0..=n {
                d = d.add(&c[i].scale(&e[n - i]));
            }
            part = part.add(&d.scale(&Float::with_val(p, &hp / (n as u32 + 1))));
            hp *= &h;
        }
        total = total.add(&part.scale(&env));
        env *= &step_decay;
        // advance u, u′ to y0 + h
        let mut nu = zero.clone();
        let mut nup = zero.clone();
        let mut hp = Float::with_val(p, 1);
        for (n, cn) in c.iter().enumerate() {
            nu = nu.add(&cn.scale(&hp));
            if n + 1 < c.len() {
                nup = nup.add(&c[n + 1].scale(&Float::with_val(p, &hp * (n as u32 + 1))));
            }
            hp *= &h;
        }
        u = nu;
        up = nup;
    }
    total
}

/// cos(a + ib) and sin(a + ib) from real functions.
pub fn cos_sin(z: &C) -> (C, C) {
    let p = z.0.prec();
    let (ca, sa) = (Float::with_val(p, z.0.cos_ref()), Float::with_val(p, z.0.sin_ref()));
    let (chb, shb) = (Float::with_val(p, z.1.cosh_ref()), Float::with_val(p, z.1.sinh_ref()));
    let cos = C(Float::with_val(p, &ca * &chb), -Float::with_val(p, &sa * &shb));
    let sin = C(Float::with_val(p, &sa * &chb), Float::with_val(p, &ca * &shb));
    (cos, sin)
}
