use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stark::model::{ModelParams, Ratio, Well};
use stark::mpnum::{MpComplex, PrecisionContext, Sign};
use stark::poles::{
    enumerate_poles, find_pole, winding_count, zero_contour_map, Family, PoleError, PoleSet, Rect,
};

fn delta(f: Ratio, digits: u32) -> ModelParams {
    ModelParams::new(Well::Delta, f, PrecisionContext::new(digits).unwrap()).unwrap()
}

fn nanotip(digits: u32) -> ModelParams {
    let well = Well::Finite { l: Ratio::int(100), v0: Ratio::new(25, 68) };
    ModelParams::new(well, Ratio::new(1, 100), PrecisionContext::new(digits).unwrap()).unwrap()
}

fn square(w: &MpComplex, half: f64) -> Rect {
    let (x, y) = w.to_f64_pair();
    Rect { re_min: x - half, re_max: x + half, im_min: y - half, im_max: y + half }
}

#[test]
fn delta_pole_winding_and_gamow_width() {
    let m = delta(Ratio::new(1, 50), 40);
    let p = find_pole(&m.ctx.complex(-0.5, -0.001), &m).unwrap();
    let (x, y) = p.w.to_f64_pair();
    assert_eq!(p.family, Family::B);
    assert!((x + 0.5).abs() < 0.02 && y < 0.0 && y > -1e-10, "{x} {y}");
    assert_eq!(winding_count(&m, &square(&p.w, 1e-3)).unwrap(), 1);
    // semiclassical width e^{−2(2|Q|)^{3/2}/(3F)} with Q = −1/2
    for (num, den) in [(1, 50), (1, 30), (1, 20)] {
        let m = delta(Ratio::new(num, den), 40);
        let p = find_pole(&m.ctx.complex(-0.5, -0.001), &m).unwrap();
        let gamma = -2.0 * p.w.im.to_f64();
        let gamow = (-2.0 / (3.0 * Ratio::new(num, den).to_f64())).exp();
        let r = gamma / gamow;
        println!("F={num}/{den}: Γ={gamma:e}, Gamow {gamow:e}, ratio {r:.3}");
        assert!(r > 0.1 && r < 10.0);
    }
}

#[test]
fn residual_and_derivative_invariants() {
    let m = delta(Ratio::new(1, 50), 60);
    let p = find_pole(&m.ctx.complex(-0.5, 0.0), &m).unwrap();
    assert!(p.refinement_residual < 1e-48, "{:e}", p.refinement_residual);
    assert!(!p.dplus_deriv.is_zero());
    // D+′ from a symmetric difference of D+ itself
    let h = 1e-12;
    let a = m.d_pm(&(&p.w + &m.ctx.complex(h, 0.0)), Sign::Plus).unwrap();
    let b = m.d_pm(&(&p.w - &m.ctx.complex(h, 0.0)), Sign::Plus).unwrap();
    let two_h = rug::Float::with_val(m.bits(), 2.0 * h);
    let fd = (&a - &b).scale(&two_h.recip());
    let rel = ((&fd - &p.dplus_deriv).abs() / p.dplus_deriv.abs()).to_f64();
    assert!(rel < 1e-18, "{rel:e}");
}

#[test]
fn mirror_point_is_a_zero_of_d_minus() {
    let m = delta(Ratio::new(1, 20), 40);
    let p = find_pole(&m.ctx.complex(-0.5, 0.0), &m).unwrap();
    let mirror = p.w.conj();
    let dm = m.d_pm(&mirror, Sign::Minus).unwrap();
    let dp = m.d_pm(&mirror, Sign::Plus).unwrap();
    assert!(dm.abs().to_f64() < 1e-38);
    assert!(dp.abs().to_f64() > 1e-6);
    let lhs = m.d_pm(&mirror, Sign::Plus).unwrap();
    let rhs = m.d_pm(&p.w, Sign::Minus).unwrap().conj();
    assert!((&lhs - &rhs).abs().to_f64() < 1e-35 * (1.0 + lhs.abs().to_f64()));
}

#[test]
fn perturbed_seeds_reach_the_same_pole() {
    let m = nanotip(30);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in [(-0.1848, 0.0), (0.3079, -0.0095), (1.0184, -0.0214)] {
        let base = find_pole(&m.ctx.complex(seed.0, seed.1), &m).unwrap();
        for _ in 0..3 {
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = &base.w + &m.ctx.complex(1e-3 * a.cos(), 1e-3 * a.sin());
            let q = find_pole(&s, &m).unwrap();
            assert!((&q.w - &base.w).abs().to_f64() < 1e-28);
        }
    }
}

#[test]
fn runaway_seed_reports_last_iterate() {
    let m = delta(Ratio::new(1, 5), 30);
    match find_pole(&m.ctx.complex(-0.3, -0.3), &m) {
        Err(PoleError::NoConvergence { last_re, last_im }) => assert!(last_re.is_finite() && last_im.is_finite()),
        Ok(p) => assert!(p.w.im.is_sign_negative() || p.w.im.is_zero()),
        Err(e) => panic!("unexpected {e}"),
    }
}

#[test]
fn upper_half_plane_windows_hold_no_zeros() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in [delta(Ratio::new(1, 20), 30), nanotip(30)] {
        for _ in 0..3 {
            let x0 = rng.gen_range(-0.6..1.0);
            let y0 = rng.gen_range(0.001..0.05);
            let r = Rect { re_min: x0, re_max: x0 + rng.gen_range(0.05..0.4), im_min: y0, im_max: y0 + 0.05 };
            assert_eq!(winding_count(&m, &r).unwrap(), 0, "{r:?}");
        }
    }
}

#[test]
fn delta_limit_has_one_b_pole() {
    for f in [Ratio::new(1, 50), Ratio::new(1, 5)] {
        let m = delta(f, 30);
        let set = enumerate_poles(&m, Ratio::new(3, 100), 1.6).unwrap();
        let b = set.poles.iter().filter(|p| p.family == Family::B).count();
        println!("F={f}: {} poles, certificate {}", set.poles.len(), set.completeness_certificate);
        assert_eq!(b, 1);
        assert_eq!(set.completeness_certificate, set.poles.len() as i64);
    }
}

#[test]
fn nanotip_census_and_monotone_in_s() {
    let m = nanotip(30);
    let mut last = 0;
    for s in [Ratio::new(1, 100), Ratio::new(3, 200), Ratio::new(3, 100)] {
        let set = enumerate_poles(&m, s, 1.6).unwrap();
        let n = set.poles.len();
        println!("s={s}: {n} poles, certificate {}", set.completeness_certificate);
        assert_eq!(set.completeness_certificate, n as i64);
        assert!(n >= last);
        last = n;
        for p in &set.poles {
            let y = p.w.im.to_f64();
            assert!(y < 0.0 && y > -s.to_f64());
        }
        let max_b = set.poles.iter().filter(|p| p.family == Family::B).map(|p| p.w.im.to_f64().abs()).fold(0.0, f64::max);
        let min_a = set.poles.iter().filter(|p| p.family == Family::A).map(|p| p.w.im.to_f64().abs()).fold(f64::INFINITY, f64::min);
        assert!(max_b < min_a);
    }
    assert!((55..=65).contains(&last));
}

#[test]
fn three_families_in_strong_field() {
    let well = Well::Finite { l: Ratio::int(6), v0: Ratio::new(1, 2) };
    let m = ModelParams::new(well, Ratio::new(1, 20), PrecisionContext::new(30).unwrap()).unwrap();
    let set = enumerate_poles(&m, Ratio::new(1, 2), 2.0).unwrap();
    for fam in [Family::A, Family::B, Family::C] {
        assert!(set.poles.iter().any(|p| p.family == fam), "{fam:?} missing");
    }
    // C poles sit near the Stokes direction, A poles to the right of the well bottom
    for p in &set.poles {
        let (x, y) = p.w.to_f64_pair();
        match p.family {
            Family::C => assert!(x < 0.0 && (y.atan2(x) + 2.0943951).abs() < 0.27),
            Family::A => assert!(x > -0.05),
            Family::B => assert!(y.abs() < 1e-3),
        }
    }
}

#[test]
fn zero_lines_cross_at_every_pole() {
    let m = delta(Ratio::new(1, 5), 30);
    let window = Rect { re_min: -0.8, re_max: 0.2, im_min: -0.7, im_max: 0.0 };
    let set = enumerate_poles(&m, Ratio::new(7, 10), 0.2).unwrap();
    let (nx, ny) = (101, 71);
    let map = zero_contour_map(&m, &window, nx, ny).unwrap();
    let cells = map.intersection_cells();
    let (dx, dy) = (1.0 / (nx - 1) as f64, 0.7 / (ny - 1) as f64);
    assert!(!set.poles.is_empty());
    for p in set.poles.iter().filter(|p| p.w.re.to_f64() > window.re_min) {
        let (x, y) = p.w.to_f64_pair();
        let hit = cells.iter().any(|(cx, cy)| (cx - x).abs() <= 1.5 * dx && (cy - y).abs() <= 1.5 * dy);
        assert!(hit, "pole {x} {y} not at a zero-line crossing");
    }
    assert!(!map.zero_points().is_empty());
}

#[test]
fn text_round_trip_is_exact() {
    let m = nanotip(30);
    let set = enumerate_poles(&m, Ratio::new(1, 100), 0.3).unwrap();
    let text = set.to_text(m.ctx.digits as usize + 12, "abc123");
    let back = PoleSet::from_text(&text, &m).unwrap();
    assert_eq!(back.poles.len(), set.poles.len());
    for (a, b) in set.poles.iter().zip(&back.poles) {
        assert_eq!(a.family, b.family);
        assert!((&a.w - &b.w).abs().to_f64() < 1e-38);
    }
    assert_eq!(back.to_text(m.ctx.digits as usize + 12, "abc123"), text);
    assert!(PoleSet::from_text("# stark-poles v0\n", &m).is_err());
}
