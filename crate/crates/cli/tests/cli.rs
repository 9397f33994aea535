use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convint"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).expect("file written")
}

#[test]
fn help_exits_zero() {
    for args in [&["--help"][..], &["wg", "--help"], &["verify", "--help"]] {
        let o = Command::new(env!("CARGO_BIN_EXE_convint")).args(args).output().unwrap();
        assert_eq!(code(&o), 0, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["wg", "--bogus"], d.path())), 2);
}

#[test]
fn wg_circle_ellipse_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["wg", "--preset", "circle-ellipse"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read(&d.path().join("report.json"));
    assert!(report.contains("\"all_immersed\": true"));
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["winding"], 1);
    assert_eq!(v["frames"].as_array().unwrap().len(), 11);
    let csv = read(&d.path().join("frames.csv"));
    assert!(csv.starts_with("t,s,x,y\n"));
    assert!(!csv.contains('\r'));
    let samples = v["samples"].as_u64().unwrap() as usize;
    assert_eq!(csv.lines().count(), 1 + 11 * samples);
}

#[test]
fn wg_winding_mismatch_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["wg", "--preset", "circle-reversed"], d.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("winding"));
}

#[test]
fn wg_bad_parameters_exit_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["wg", "--preset", "square"], d.path())), 2);
    assert_eq!(code(&run(&["wg", "--eps", "-1"], d.path())), 2);
    assert_eq!(code(&run(&["wg", "--frames", "1"], d.path())), 2);
}

#[test]
fn eversion_formal_defaults() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["eversion-formal"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let objs: Vec<_> = std::fs::read_dir(d.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "obj"))
        .collect();
    assert_eq!(objs.len(), 11);
    let v: serde_json::Value = serde_json::from_str(&read(&d.path().join("report.json"))).unwrap();
    assert!(v["sigma_min"].as_f64().unwrap() >= 0.9);
    assert_eq!(v["pass"], true);
}

fn obj_vertices(text: &str) -> Vec<[f64; 3]> {
    text.lines()
        .filter_map(|l| l.strip_prefix("v "))
        .map(|l| {
            let c: Vec<f64> = l.split(' ').map(|t| t.parse().unwrap()).collect();
            [c[0], c[1], c[2]]
        })
        .collect()
}

#[test]
fn eversion_formal_two_frames_are_identity_and_antipodal() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["eversion-formal", "--frames", "2", "--grid", "8x16"], d.path());
    assert_eq!(code(&o), 0);
    let a = read(&d.path().join("frame_000.obj"));
    let b = read(&d.path().join("frame_001.obj"));
    assert!(!d.path().join("frame_002.obj").exists());
    let (va, vb) = (obj_vertices(&a), obj_vertices(&b));
    assert_eq!(va.len(), 2 + 7 * 16);
    for (p, q) in va.iter().zip(&vb) {
        assert!((p[0] * p[0] + p[1] * p[1] + p[2] * p[2] - 1.0).abs() < 1e-12);
        for i in 0..3 {
            assert!((p[i] + q[i]).abs() < 1e-12);
        }
    }
    let max_face = a
        .lines()
        .filter_map(|l| l.strip_prefix("f "))
        .flat_map(|l| l.split(' ').map(|t| t.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    assert_eq!(*max_face.iter().min().unwrap(), 1);
    assert_eq!(*max_face.iter().max().unwrap(), va.len());
}

#[test]
fn eversion_formal_rejects_large_radius() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["eversion-formal", "--radius", "1.5"], d.path())), 2);
}

#[test]
fn eversion_formal_floor_violation_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"sigma_floor": 1.5, "grid": "6x12"}"#).unwrap();
    let o = run(&["eversion-formal", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_corrugation_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--suite", "corrugation"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&d.path().join("verify_corrugation.csv"));
    assert!(csv.starts_with("suite,check,residual,tol,pass\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn verify_is_deterministic_by_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["verify", "--suite", "all", "--seed", "7"], a.path())), 0);
    assert_eq!(code(&run(&["verify", "--suite", "all", "--seed", "7"], b.path())), 0);
    let x = std::fs::read(a.path().join("verify_all.csv")).unwrap();
    let y = std::fs::read(b.path().join("verify_all.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn verify_unknown_suite_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--suite", "nope"], d.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"suite": "nope", "seed": 3}"#).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["verify", "--config", c], d.path())), 2);
    assert_eq!(code(&run(&["verify", "--config", c, "--suite", "convex"], d.path())), 0);
    std::fs::write(&cfg, r#"{"unknown_key": 1}"#).unwrap();
    assert_eq!(code(&run(&["verify", "--config", c], d.path())), 2);
    assert_eq!(code(&run(&["verify", "--config", "/nonexistent.json"], d.path())), 2);
}
