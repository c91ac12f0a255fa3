use rug::Float;
use stark::evolve::{density_map, ContourSpec, EvolveError, Expansion, FieldMeta, Region};
use stark::model::{BoundState, ModelParams, Ratio, Well};
use stark::mpnum::PrecisionContext;
use stark::poles::{default_w_min, enumerate_poles_in, PoleSet};
use std::sync::OnceLock;

const T_MAX: f64 = 20.0;
const X_MAX: f64 = 20.0;

struct Setup {
    m: ModelParams,
    st: BoundState,
    poles: PoleSet,
    spec: ContourSpec,
    e: Expansion,
}

/// Delta well at F = 1/20, 30 digits, cut at b ≈ 2.
fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let m = ModelParams::new(Well::Delta, Ratio::new(1, 20), PrecisionContext::new(30).unwrap()).unwrap();
        let st = m.bound_states().remove(0);
        let s = Ratio::new(3, 100);
        let a = stark::evolve::lower_cut(&m, &st, default_w_min(&m, s.to_f64()), 1e-6).unwrap();
        let poles = enumerate_poles_in(&m, Ratio::new(6, 100), a, 2.6).unwrap();
        let spec = ContourSpec::design(&m, s, a, 2.0, T_MAX, X_MAX, &poles).unwrap();
        let e = Expansion::new(&m, &st, &spec, &poles, 1e-20).unwrap();
        Setup { m, st, poles, spec, e }
    })
}

fn fl(s: &Setup, v: f64) -> Float {
    Float::with_val(s.m.bits(), v)
}

#[test]
fn initial_state_is_reconstructed() {
    let s = setup();
    let zero = fl(s, 0.0);
    let mut sup = 0.0f64;
    let mut im = 0.0f64;
    for i in 0..=40 {
        let x = 0.5 * i as f64;
        let v = s.e.wavefunction(&fl(s, x), &zero).unwrap();
        sup = sup.max((v.re.to_f64() - (-x).exp()).abs());
        im = im.max(v.im.to_f64().abs());
    }
    println!("sup error {sup:e}, max |Im| {im:e}");
    assert!(sup < 2e-3);
    assert!(im < 1e-6);
}

#[test]
fn norm_is_reproduced_at_the_origin() {
    let s = setup();
    let v = s.e.wavefunction(&fl(s, 0.0), &fl(s, 0.0)).unwrap();
    // the initial state is unnormalized, φ(0) = 1
    assert!((v.re.to_f64() - 1.0).abs() < 2e-3);
    assert!(s.m.bound_norm_sqr(&s.st).to_f64() > 0.0);
}

#[test]
fn contour_depth_does_not_matter() {
    let s = setup();
    let shallow = s.spec.with_depth(&s.m, Ratio::new(2, 100)).unwrap();
    let e2 = Expansion::new(&s.m, &s.st, &shallow, &s.poles, 1e-20).unwrap();
    assert!(e2.crossed <= s.e.crossed);
    let mut worst = 0.0f64;
    for (x, t) in [(0.0, 0.0), (3.0, 5.0), (7.5, 12.0), (12.0, 19.0), (19.0, 8.0)] {
        let a = s.e.wavefunction(&fl(s, x), &fl(s, t)).unwrap();
        let b = e2.wavefunction(&fl(s, x), &fl(s, t)).unwrap();
        worst = worst.max((&a - &b).abs().to_f64());
    }
    println!("depth 3/100 vs 2/100: {worst:e}");
    assert!(worst < 1e-10);
}

#[test]
fn too_coarse_a_step_is_refused() {
    let s = setup();
    let r = s.spec.with_depth(&s.m, Ratio::new(1, 10000));
    assert!(matches!(r, Err(EvolveError::Config(_))));
}

#[test]
fn lattice_table_matches_direct_evaluation() {
    let s = setup();
    for (x, t) in [(2.0, 3.0), (0.3, 7.0)] {
        let a = s.e.wavefunction(&fl(s, x), &fl(s, t)).unwrap();
        let b = s.e.wavefunction_direct(&fl(s, x), &fl(s, t)).unwrap();
        let d = (&a - &b).abs().to_f64();
        println!("x={x} t={t}: table vs direct {d:e}");
        assert!(d < 1e-14);
    }
    // off the lattice the table is built from scratch
    let x = fl(s, 1.0 / 7.0);
    let a = s.e.wavefunction(&x, &fl(s, 4.0)).unwrap();
    let b = s.e.wavefunction_direct(&x, &fl(s, 4.0)).unwrap();
    assert!((&a - &b).abs().to_f64() < 1e-14);
}

#[test]
fn tables_are_linear() {
    let s = setup();
    let tab = s.e.table(&fl(s, 5.0)).unwrap();
    assert_eq!(tab.region, Region::Outside);
    let c = s.m.ctx.complex(0.3, -1.7);
    let t = fl(s, 6.0);
    let lhs = tab.scaled(&c).psi(&t);
    let rhs = &tab.psi(&t) * &c;
    assert!((&lhs - &rhs).abs().to_f64() < 1e-25);
}

#[test]
fn x_derivative_matches_finite_difference() {
    let s = setup();
    let t = fl(s, 5.0);
    let x = 4.0;
    let h = 1e-6;
    let d = s.e.table_dx(&fl(s, x)).unwrap().psi(&t);
    let p = s.e.wavefunction(&fl(s, x + h), &t).unwrap();
    let q = s.e.wavefunction(&fl(s, x - h), &t).unwrap();
    let fd = (&p - &q).scale_f64(0.5 / h);
    let err = (&d - &fd).abs().to_f64();
    println!("dψ/dx vs central difference: {err:e}");
    assert!(err < 1e-9);
}

#[test]
fn finer_bottom_lattice_changes_little() {
    let s = setup();
    let fine = stark::evolve::ContourSpec { lattice_m: s.spec.lattice_m * 2, n_bottom: s.spec.n_bottom * 2, y_stride: s.spec.y_stride * 2, ..s.spec.clone() };
    let e2 = Expansion::new(&s.m, &s.st, &fine, &s.poles, 1e-20).unwrap();
    let mut worst = 0.0f64;
    for (x, t) in [(1.0, 2.0), (6.0, 15.0), (15.0, 20.0)] {
        let a = s.e.wavefunction(&fl(s, x), &fl(s, t)).unwrap();
        let b = e2.wavefunction(&fl(s, x), &fl(s, t)).unwrap();
        worst = worst.max((&a - &b).abs().to_f64());
    }
    println!("node doubling: {worst:e}");
    assert!(worst < 1e-8);
}

#[test]
fn uncovered_window_is_a_config_error() {
    let s = setup();
    let narrow = enumerate_poles_in(&s.m, Ratio::new(6, 100), 0.0, 1.0).unwrap();
    let r = Expansion::new(&s.m, &s.st, &s.spec, &narrow, 1e-20);
    assert!(matches!(r, Err(EvolveError::Config(_))));
    let shallow = enumerate_poles_in(&s.m, Ratio::new(1, 100), s.spec.z_min, 2.6).unwrap();
    let r = Expansion::new(&s.m, &s.st, &s.spec, &shallow, 1e-20);
    assert!(matches!(r, Err(EvolveError::Config(_))));
}

#[test]
fn density_map_output_formats() {
    let s = setup();
    let xs: Vec<Float> = [0.0, 5.0].iter().map(|v| fl(s, *v)).collect();
    let ts: Vec<Float> = [0.0, 1.0, 2.0].iter().map(|v| fl(s, *v)).collect();
    let meta = FieldMeta { config_hash: "abc".into(), pole_set_id: "p".into(), contour_id: s.spec.id() };
    let f = density_map(&s.e, &xs, &ts, meta).unwrap();
    assert_eq!(f.values.len(), 6);
    let csv = f.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config") && lines[0].contains("abc"));
    let header = lines.iter().position(|l| !l.starts_with('#')).unwrap();
    assert_eq!(lines[header], "x,t,re_psi,im_psi,density");
    assert_eq!(lines.len(), header + 1 + 6);
    let row: Vec<&str> = lines[header + 1].split(',').collect();
    assert_eq!(row.len(), 5);
    // 17 significant digits
    let mantissa = row[2].split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17);
    let v = f.at(1, 1);
    let dens = f.density(1, 1);
    assert!((v.norm_sqr().to_f64() - dens).abs() <= 1e-15 * dens.max(1e-300));
    assert!(f.to_matrix().contains("abc"));
}

#[test]
fn points_left_of_the_well_are_rejected() {
    let s = setup();
    assert!(matches!(s.e.wavefunction(&fl(s, -1.0), &fl(s, 0.0)), Err(EvolveError::Config(_))));
    assert!(matches!(s.e.table_dx(&fl(s, -1.0)), Err(EvolveError::Config(_))));
    assert!(matches!(s.e.table(&fl(s, X_MAX + 1.0)), Err(EvolveError::Config(_))));
}
