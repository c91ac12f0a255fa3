mod common;

use common::oracle_ode::{airy_ode, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Float;
use stark::mpnum::{airy, airy_certified, ci, AiryLine, MpComplex, PrecisionContext, Sign};

fn to_c(z: &MpComplex) -> C {
    C(z.re.clone(), z.im.clone())
}

fn rel(a: &MpComplex, b: &C) -> f64 {
    common::oracle_ode::diff_rel(&to_c(a), b)
}

fn parse(p: u32, re: &str, im: &str) -> MpComplex {
    MpComplex::from_parts(
        Float::with_val(p, Float::parse(re).unwrap()),
        Float::with_val(p, Float::parse(im).unwrap()),
    )
}

#[test]
fn origin_closed_forms() {
    let ctx = PrecisionContext::new(60).unwrap();
    let p = ctx.bits();
    let v = airy(&MpComplex::zero(p), &ctx).unwrap();
    let g23 = Float::with_val(p + 20, Float::with_val(p + 20, 2) / 3u32).gamma();
    let c3 = Float::with_val(p + 20, 3).cbrt();
    let ai0 = Float::with_val(p + 20, Float::with_val(p + 20, &c3 * &c3) * &g23).recip();
    let c6 = Float::with_val(p + 20, 3).sqrt().cbrt();
    let bi0 = Float::with_val(p + 20, &c6 * &g23).recip();
    let e1 = Float::with_val(p, &v.ai.re - &ai0).abs().to_f64();
    let e2 = Float::with_val(p, &v.bi.re - &bi0).abs().to_f64();
    println!("Ai(0) err {e1:e}, Bi(0) err {e2:e}");
    assert!(e1 < 1e-60 && e2 < 1e-60);
    assert!(v.ai.im.is_zero() && v.bi.im.is_zero());
    assert_eq!(&v.ai.re.to_string_radix(10, Some(10))[..10], "3.55028053");
    assert_eq!(&v.bi.re.to_string_radix(10, Some(10))[..10], "6.14926627");
    let c = ci(&MpComplex::zero(p), Sign::Plus, &ctx).unwrap();
    assert_eq!(c.re, v.bi.re);
    assert_eq!(c.im, v.ai.re);
}

/// Fixed reference values (60-digit independent evaluation) across all
/// branches: series, asymptotic, and both connection sectors.
#[test]
fn reference_values() {
    let ctx = PrecisionContext::new(40).unwrap();
    let p = ctx.bits();
    let cases = [
        ((5.0, 3.0), ("0.0002232628060994387721105296993571028725675", "-0.000169633646096079684999592783333126056002"), ("442.0181435193725930191357251917269990857", "345.0585327405256129941953797513588851144")),
        ((-4.0, 0.0), ("-0.07026553294928951509908431163180311641824", "0"), ("-0.1166705674383408936795672429766645983333", "0")),
        ((0.0, 40.0), ("6.710548362077669481926787008377897320335e+50", "-1.84885474949312240735220199962814078256e+50"), ("2.170012025929645267368288795735987040176e+51", "-3.826731276726883014109546951759723734117e+51")),
        ((-30.0, 10.0), ("-75378820756841532541051.12695692975122888", "-55287809093029720882060.13450729857746998"), ("-467611723608123632989219.8532487751079749", "-239422260248159582707952.6814239462774247")),
        ((60.0, 0.0), ("2.783148709496935537097603938247637105692e-136", "0"), ("5.71544489833545101824167894409542609379e+134", "0")),
        ((-60.0, 1.0), ("95.98422383302572139213616054357067305629", "213.8208063539281149904739790861119983213"), ("756.4211633204108599809632033797686256306", "1650.497003953098357263017826064513357505")),
        ((20.0, -35.0), ("0.1136210129020662887218471732222086069932", "0.3309569542494097030458682805245379306748"), ("-1.309699672686015631462339514707298336443", "1.246865604505588561688564464010374342447")),
        ((-45.0, -45.0), ("-6.252206399070492688222662124056629653809e+134", "7.946341137371121609331608806130322418646e+133"), ("-4.84862910273574714187730745311977238967e+135", "-1.321516171497410196400237106148280385356e+135")),
    ];
    for ((x, y), ai, bip) in cases {
        let z = ctx.complex(x, y);
        let v = airy(&z, &ctx).unwrap();
        let ai_ref = parse(p, ai.0, ai.1);
        let bip_ref = parse(p, bip.0, bip.1);
        let ea = rel(&v.ai, &to_c(&ai_ref));
        let eb = rel(&v.bip, &to_c(&bip_ref));
        println!("z=({x},{y}) rel err Ai {ea:e} Bi' {eb:e}");
        assert!(ea < 1e-38 && eb < 1e-38, "z=({x},{y})");
    }
}

/// Criterion-8 part: ODE oracle at 20 random complex points (fixed seed).
#[test]
fn ode_oracle_random_points() {
    let ctx = PrecisionContext::new(50).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let r = rng.gen_range(0.0..9.0f64);
        let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (x, y) = if i == 0 { (5.0, 3.0) } else { (r * th.cos(), r * th.sin()) };
        let o = airy_ode((x, y), 700, 200);
        let v = airy(&ctx.complex(x, y), &ctx).unwrap();
        let errs = [rel(&v.ai, &o[0]), rel(&v.aip, &o[1]), rel(&v.bi, &o[2]), rel(&v.bip, &o[3])];
        let m = errs.iter().cloned().fold(0.0, f64::max);
        worst = worst.max(m);
        assert!(m < 1e-45, "z=({x},{y}) errs {errs:?}");
    }
    println!("ODE oracle worst relative error {worst:e}");
}

/// |Ci+(−4)| against the modulus √(Ai²+Bi²) from the ODE oracle.
#[test]
fn ci_modulus_oscillatory() {
    let ctx = PrecisionContext::new(40).unwrap();
    let o = airy_ode((-4.0, 0.0), 600, 100);
    let m = Float::with_val(600, &o[0].0 * &o[0].0 + &o[2].0 * &o[2].0).sqrt();
    let c = ci(&ctx.complex(-4.0, 0.0), Sign::Plus, &ctx).unwrap();
    let d = Float::with_val(600, c.abs() - &m).abs().to_f64();
    assert!(d < 1e-40, "{d}");
    let cm = ci(&ctx.complex(-4.0, 0.0), Sign::Minus, &ctx).unwrap();
    assert_eq!(cm, c.conj());
}

/// Wronskian, scaled by the size of its two products.
fn wronskian_residual(v: &stark::mpnum::AiryValues, p: u32) -> f64 {
    let w = v.wronskian();
    let pi_inv = Float::with_val(p, rug::float::Constant::Pi).recip();
    let d = w.add_real(&Float::with_val(p, -&pi_inv)).abs();
    let s1 = (&v.ai * &v.bip).abs();
    let s2 = (&v.aip * &v.bi).abs();
    let scale = Float::with_val(p, s1.max(&s2)).max(&pi_inv);
    Float::with_val(p, &d / &scale).to_f64()
}

#[test]
fn wronskian_disc_sample() {
    let ctx = PrecisionContext::new(40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..60 {
        let r = 40.0 * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let v = airy(&ctx.complex(r * th.cos(), r * th.sin()), &ctx).unwrap();
        let res = wronskian_residual(&v, ctx.bits());
        assert!(res < 1e-35, "r={r} th={th} res={res:e}");
    }
}

#[test]
fn conjugation_symmetry() {
    let ctx = PrecisionContext::new(40).unwrap();
    for (x, y) in [(1.5, 2.0), (-12.0, 7.0), (30.0, -30.0), (-50.0, 0.5)] {
        let a = airy(&ctx.complex(x, y), &ctx).unwrap();
        let b = airy(&ctx.complex(x, -y), &ctx).unwrap();
        for (u, w) in [(&a.ai, &b.ai), (&a.aip, &b.aip), (&a.bi, &b.bi), (&a.bip, &b.bip)] {
            let d = (u - &w.conj()).abs();
            let s = u.abs();
            assert!(Float::with_val(ctx.bits(), &d / &s).to_f64() < 1e-38);
        }
    }
}

#[test]
fn doubling_digits_is_stable() {
    let lo = PrecisionContext::new(40).unwrap();
    let hi = PrecisionContext::new(80).unwrap();
    for (x, y) in [(3.0, -1.0), (-25.0, 3.0), (33.0, 0.2), (-5.0, -38.0)] {
        let a = airy(&lo.complex(x, y), &lo).unwrap();
        let b = airy(&hi.complex(x, y), &hi).unwrap();
        for (u, w) in [(&a.ai, &b.ai), (&a.bip, &b.bip)] {
            let d = Float::with_val(hi.bits(), (&u.with_prec(hi.bits()) - w).abs() / w.abs()).to_f64();
            assert!(d < 1e-35, "({x},{y}) {d:e}");
        }
        airy_certified(&lo.complex(x, y), &lo).unwrap();
    }
}

/// Ci+ as an outgoing wave: along the negative axis the phase of Ci+ grows
/// with |u| (e^{+i(2/3)|u|^{3/2}} behaviour).
#[test]
fn ci_plus_outgoing_phase() {
    let ctx = PrecisionContext::new(30).unwrap();
    let mut last = None;
    for k in 0..10 {
        let u = -(10.0 + 0.05 * f64::from(k));
        let c = ci(&ctx.complex(u, 0.0), Sign::Plus, &ctx).unwrap();
        let ph = c.arg().to_f64();
        if let Some(prev) = last {
            let mut d: f64 = ph - prev;
            if d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            assert!(d > 0.0, "phase must advance");
        }
        last = Some(ph);
    }
}

#[test]
fn lattice_matches_direct() {
    let ctx = PrecisionContext::new(50).unwrap();
    let start = ctx.complex(20.0, 0.8);
    let step = ctx.complex(-0.0123, 0.0);
    let line = AiryLine::build(&start, &step, 4000, &ctx).unwrap();
    for n in [0usize, 1, 57, 1000, 2345, 3999] {
        let direct = airy(&line.point(n), &ctx).unwrap();
        let v = line.get(n);
        for (u, w) in [(&v.ai, &direct.ai), (&v.bi, &direct.bi), (&v.aip, &direct.aip)] {
            let d = Float::with_val(ctx.bits(), (u - w).abs() / w.abs()).to_f64();
            assert!(d < 1e-44, "n={n} {d:e}");
        }
    }
    let off = ctx.complex(-3.3217, 0.8);
    let a = line.eval(&off);
    let b = airy(&off, &ctx).unwrap();
    let d = Float::with_val(ctx.bits(), (&a.ai - &b.ai).abs() / b.ai.abs()).to_f64();
    assert!(d < 1e-44);
}
