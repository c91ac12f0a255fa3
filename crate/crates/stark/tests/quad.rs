use rug::Float;
use stark::quad::{bernoulli_even, gauss_legendre, gregory_weights};

#[test]
fn bernoulli_numbers() {
    let b = bernoulli_even(6, 200);
    let exact = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0];
    for (x, e) in b.iter().zip(exact) {
        assert!((x.to_f64() - e).abs() < 1e-15 * e.abs());
    }
    let b12 = Float::with_val(200, &b[5] * 2730u32) + 691u32;
    assert!(b12.abs().to_f64() < 1e-50);
}

#[test]
fn gauss_legendre_integrates_polynomials() {
    let (x, w) = gauss_legendre(12, 200);
    for d in 0..24u32 {
        let mut s = Float::new(200);
        for (xi, wi) in x.iter().zip(&w) {
            s += Float::with_val(200, xi.clone().pow_u(d)) * wi;
        }
        let exact = if d % 2 == 1 { 0.0 } else { 2.0 / f64::from(d + 1) };
        assert!((s.to_f64() - exact).abs() < 1e-50, "degree {d}");
    }
}

trait PowU {
    fn pow_u(self, d: u32) -> Float;
}

impl PowU for Float {
    fn pow_u(self, d: u32) -> Float {
        let mut r = Float::with_val(self.prec(), 1);
        for _ in 0..d {
            r *= &self;
        }
        r
    }
}

#[test]
fn gregory_rule_is_exact_below_its_order() {
    let (n, m) = (20usize, 8usize);
    let w = gregory_weights(n, m, 200);
    assert_eq!(w[5].to_f64(), w[n - 5].to_f64());
    assert!((w[10].to_f64() - 1.0).abs() < 1e-60);
    for d in 0..m as u32 {
        let mut s = Float::new(200);
        for (i, wi) in w.iter().enumerate() {
            s += Float::with_val(200, i as u32).pow_u(d) * wi;
        }
        let exact = Float::with_val(200, n as u32).pow_u(d + 1) / (d + 1);
        let e = Float::with_val(200, &s - &exact).abs().to_f64() / exact.to_f64();
        assert!(e < 1e-50, "degree {d}: {e:e}");
    }
    // order-2 rule is the classical 5/12, 13/12 end correction
    let w2 = gregory_weights(10, 2, 100);
    assert!((w2[0].to_f64() - 5.0 / 12.0).abs() < 1e-15 && (w2[1].to_f64() - 13.0 / 12.0).abs() < 1e-15);
}

#[test]
fn gregory_rule_converges_fast_on_smooth_integrands() {
    // ∫_0^1 e^x dx with 40 intervals, order 8: error ~ h^9
    let n = 40;
    let w = gregory_weights(n, 8, 200);
    let h = Float::with_val(200, 1) / n as u32;
    let mut s = Float::new(200);
    for (i, wi) in w.iter().enumerate() {
        s += Float::with_val(200, Float::with_val(200, &h * i as u32).exp()) * wi;
    }
    s *= &h;
    let exact = Float::with_val(200, Float::with_val(200, 1).exp() - 1u32);
    let e = Float::with_val(200, s - exact).abs().to_f64();
    assert!(e < 1e-13, "{e:e}");
}
