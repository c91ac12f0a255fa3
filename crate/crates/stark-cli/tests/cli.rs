use std::fs;
use std::path::PathBuf;
use std::process::Command;

use rug::Float;
use stark_cli::cache::write_atomic;
use stark_cli::recipes::{self, NAMES};
use stark_cli::{CliError, Overrides, RunConfig, Session};

fn recipe(name: &str) -> Overrides {
    Overrides { recipe: Some(name.into()), ..Overrides::default() }
}

fn stark(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stark")).args(args).env_remove("STARK_CACHE_DIR").output().unwrap()
}

#[test]
fn every_recipe_resolves_and_round_trips() {
    for name in NAMES {
        let cfg = RunConfig::resolve(&recipe(name)).unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back.to_toml(), cfg.to_toml(), "{name}");
        assert_eq!(back.hash(), cfg.hash());
        assert!(!recipes::commands(name).unwrap().is_empty());
    }
}

#[test]
fn hash_ignores_locations_but_not_numbers() {
    let a = RunConfig::resolve(&recipe("fig5")).unwrap();
    let moved = Overrides { out: Some("elsewhere".into()), cache_dir: Some("c".into()), ..recipe("fig5") };
    assert_eq!(RunConfig::resolve(&moved).unwrap().hash(), a.hash());
    let digits = Overrides { digits: Some(60), ..recipe("fig5") };
    assert_ne!(RunConfig::resolve(&digits).unwrap().hash(), a.hash());
    assert_eq!(a.hash().len(), 16);
}

#[test]
fn precedence_is_defaults_file_set_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    fs::write(&file, "recipe = \"delta-f002\"\n[precision]\ndigits = 50\n[contour]\ns = \"1/50\"\n").unwrap();
    let from_file = RunConfig::resolve(&Overrides { file: Some(file.clone()), ..Overrides::default() }).unwrap();
    assert_eq!(from_file.precision.digits, 50);
    assert_eq!(from_file.contour.s.to_f64(), 0.02);
    // untouched keys keep the recipe defaults
    assert_eq!(from_file.grids.x.values().unwrap().len(), 161);

    let set = Overrides { file: Some(file.clone()), set: vec!["precision.digits=60".into(), "contour.s=1/40".into()], ..Overrides::default() };
    let c = RunConfig::resolve(&set).unwrap();
    assert_eq!((c.precision.digits, c.contour.s.to_f64()), (60, 0.025));

    let flag = Overrides { digits: Some(70), ..set };
    assert_eq!(RunConfig::resolve(&flag).unwrap().precision.digits, 70);
}

#[test]
fn replacing_the_well_drops_old_parameters() {
    let o = Overrides { set: vec!["model.well={kind=\"delta\"}".into()], ..recipe("fig7") };
    let c = RunConfig::resolve(&o).unwrap();
    assert_eq!(c.model.well, stark::model::Well::Delta);
    assert!(!c.to_toml().contains("v0"));
}

#[test]
fn bad_configurations_are_config_errors() {
    let cases: Vec<Overrides> = vec![
        Overrides::default(),
        recipe("no-such-recipe"),
        Overrides { set: vec!["contour.nonsense=1".into()], ..recipe("fig5") },
        Overrides { set: vec!["contour.s=0".into()], ..recipe("fig5") },
        Overrides { set: vec!["contour.s".into()], ..recipe("fig5") },
        Overrides { set: vec!["poles.depth=1/100".into()], ..recipe("fig5") },
        Overrides { set: vec!["grids.x={start=1.0,stop=0.0,step=0.5}".into()], ..recipe("fig5") },
        Overrides { file: Some(PathBuf::from("/nonexistent/run.toml")), ..Overrides::default() },
    ];
    for o in cases {
        let e = RunConfig::resolve(&o).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{o:?}: {e}");
    }
}

#[test]
fn exit_codes_by_class() {
    assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    assert_eq!(CliError::Certification("x".into()).exit_code(), 3);
    assert_eq!(CliError::Disagreement { l2: 1.0, threshold: 0.1 }.exit_code(), 4);
    assert_eq!(CliError::io(std::path::Path::new("p"), std::io::ErrorKind::NotFound.into()).exit_code(), 1);
}

#[test]
fn binary_reports_config_errors_with_code_2() {
    for args in [&["poles"][..], &["recipe", "no-such-recipe"], &["--recipe", "fig5", "--set", "contour.bogus=1", "evolve"]] {
        let out = stark(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("stark: configuration error"));
    }
}

#[test]
fn print_config_matches_library_resolution() {
    let out = stark(&["--recipe", "fig5", "--digits", "60", "--print-config", "evolve"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let (first, rest) = text.split_once('\n').unwrap();
    let cfg = RunConfig::resolve(&Overrides { digits: Some(60), ..recipe("fig5") }).unwrap();
    assert_eq!(first, format!("# config {}", cfg.hash()));
    assert_eq!(RunConfig::from_toml(rest).unwrap().hash(), cfg.hash());
}

#[test]
fn atomic_write_replaces_whole_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sub/out.txt");
    write_atomic(&p, b"first version, longer").unwrap();
    write_atomic(&p, b"second").unwrap();
    assert_eq!(fs::read(&p).unwrap(), b"second");
    let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("out.txt")]);
}

#[test]
fn cache_env_takes_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (flag, env) = (dir.path().join("flag"), dir.path().join("env"));
    let out = Command::new(env!("CARGO_BIN_EXE_stark"))
        .args(["--recipe", "oracle-f02", "--set", "contour.z_max=4.0", "--out"])
        .arg(dir.path().join("out"))
        .arg("--cache-dir")
        .arg(&flag)
        .arg("poles")
        .env("STARK_CACHE_DIR", &env)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env.join("poles").is_dir());
    assert!(!flag.exists());
    assert!(dir.path().join("out/poles.txt").is_file());
}

#[test]
fn sweep_resumes_from_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = Overrides {
        set: vec!["contour.z_max=4.0".into()],
        out: Some(dir.path().join("out")),
        cache_dir: Some(dir.path().join("cache")),
        ..recipe("oracle-f02")
    };
    let mut s = Session::new(RunConfig::resolve(&o).unwrap()).unwrap();
    let (xs, ts) = ([2.0, 3.0], [0.0, 1.0]);
    let fresh = s.sweep("probe", &xs, &ts).unwrap();
    let path = s.cache.sweep_path(&s.hash, "probe");
    assert!(!path.exists(), "partial file removed after success");

    // column 0 from a previous run with marker values; column 1 cut short
    let p = s.m.bits();
    let hex = |v: f64| Float::with_val(p, v).to_string_radix(16, None);
    let text = format!(
        "# sweep {} probe 2 2 {p}\n0 {} {} {} {}\n1 {} {}",
        s.hash,
        hex(7.0),
        hex(0.0),
        hex(8.0),
        hex(-1.0),
        hex(9.0),
        hex(0.0)
    );
    fs::write(&path, &text).unwrap();
    s.resume = true;
    let resumed = s.sweep("probe", &xs, &ts).unwrap();
    assert_eq!(resumed.values[0].re.to_f64(), 7.0);
    assert_eq!(resumed.values[2].re.to_f64(), 8.0);
    assert_eq!(resumed.values[2].im.to_f64(), -1.0);
    assert_eq!(resumed.values[1], fresh.values[1]);
    assert_eq!(resumed.values[3], fresh.values[3]);

    // a partial file from another configuration is ignored
    fs::write(&path, text.replacen(&s.hash, "0000000000000000", 1)).unwrap();
    let other = s.sweep("probe", &xs, &ts).unwrap();
    assert_eq!(other.values, fresh.values);
}

#[test]
fn full_precision_dump_is_optional_and_unhashed() {
    let dir = tempfile::tempdir().unwrap();
    let base = Overrides {
        set: vec!["contour.z_max=4.0".into(), "grids.x=[2.0,3.0]".into()],
        out: Some(dir.path().join("out")),
        cache_dir: Some(dir.path().join("cache")),
        ..recipe("oracle-f02")
    };
    let mut full = base.clone();
    full.set.push("outputs.full_precision=true".into());
    let (a, b) = (RunConfig::resolve(&base).unwrap(), RunConfig::resolve(&full).unwrap());
    assert_eq!(a.hash(), b.hash());
    let s = Session::new(b).unwrap();
    let files = s.cmd_reconstruct().unwrap();
    let dump = files.iter().find(|p| p.ends_with("reconstruct.full.csv")).expect("dump written");
    let text = fs::read_to_string(dump).unwrap();
    let row = text.lines().nth(2).unwrap();
    // 30 significant digits in the mantissa of Re ψ
    let re = row.split(',').nth(2).unwrap();
    let mantissa = re.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 30, "{re}");
    assert!(!Session::new(a).unwrap().cmd_reconstruct().unwrap().iter().any(|p| p.ends_with("reconstruct.full.csv")));
}
