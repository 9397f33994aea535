use std::f64::consts::TAU;

use convint::demos::{self, winding_number, winding_number_with, ClosedCurve, SphereRelationConfig};
use convint::export::Mesh;
use convint::{verify, Error};

/// `e^{2πi a s} + c e^{2πi b s}`; winding number `a` when `|c b| < |a|`.
fn epicycle(a: f64, b: f64, c: f64) -> ClosedCurve<f64> {
    ClosedCurve::new(
        move |s: f64| {
            let (p, q) = (TAU * a * s, TAU * b * s);
            [p.cos() + c * q.cos(), p.sin() + c * q.sin()]
        },
        move |s: f64| {
            let (p, q) = (TAU * a * s, TAU * b * s);
            [
                -TAU * a * p.sin() - c * TAU * b * q.sin(),
                TAU * a * p.cos() + c * TAU * b * q.cos(),
            ]
        },
    )
    .unwrap()
}

#[test]
fn winding_matches_dominant_term() {
    for (a, b, c) in [(1.0, 3.0, 0.3), (2.0, -5.0, 0.35), (-1.0, 4.0, 0.2), (3.0, 1.0, 2.5)] {
        let curve = epicycle(a, b, c);
        let expected = if (c * b).abs() < a.abs() { a } else { b } as i64;
        assert_eq!(winding_number(&curve).unwrap(), expected, "{a} {b} {c}");
        assert_eq!(
            winding_number_with(&curve, 1024).unwrap(),
            winding_number_with(&curve, 4096).unwrap()
        );
    }
}

#[test]
fn figure_eight_matches_fine_sampling() {
    let c = ClosedCurve::<f64>::figure_eight();
    assert_eq!(winding_number(&c).unwrap(), 0);
    assert_eq!(winding_number_with(&c, 8192).unwrap(), 0);
}

#[test]
fn non_immersed_curve_rejected() {
    let r = ClosedCurve::<f64>::new(|s| [s, 0.0], |_| [0.0, 0.0]);
    assert!(matches!(r, Err(Error::NotAccepted(_))));
}

#[test]
fn figure_eight_cannot_reach_circle() {
    let r = demos::whitney_graustein(
        &ClosedCurve::circle(),
        &ClosedCurve::figure_eight(),
        0.05,
        &demos::WgOptions::default(),
    );
    assert!(matches!(r, Err(Error::WindingMismatch { w0: 1, w1: 0 })));
}

#[test]
fn formal_frames_start_at_identity_and_end_antipodal() {
    let frames = demos::formal_frames::<f64>(3, 6, 12);
    let base = Mesh::<f64>::uv_sphere(6, 12);
    assert_eq!(frames.len(), 3);
    assert_eq!(frames[0].0, 0.0);
    assert_eq!(frames[2].0, 1.0);
    for ((p, q), r) in base
        .vertices
        .iter()
        .zip(&frames[0].1.vertices)
        .zip(&frames[2].1.vertices)
    {
        for i in 0..3 {
            assert!((p[i] - q[i]).abs() < 1e-15);
            assert!((p[i] + r[i]).abs() < 1e-15);
        }
    }
    // Midway the map collapses the sphere to the origin.
    assert!(frames[1].1.vertices.iter().all(|v| v.iter().all(|c| c.abs() < 1e-15)));
}

#[test]
fn sphere_config_bounds() {
    let bad = SphereRelationConfig {
        ball_radius: 1.5,
        delta: 1e-6,
    };
    assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    assert!(SphereRelationConfig::<f64>::default().validate().is_ok());
}

#[test]
fn suites_are_deterministic_and_named() {
    let a = verify::run_suite("convex", 4).unwrap();
    let b = verify::run_suite("convex", 4).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|c| c.pass));
    assert!(matches!(verify::run_suite("bogus", 0), Err(Error::InvalidConfig(_))));
    let mut buf = Vec::new();
    verify::write_checks(&mut buf, &a).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("suite,check,residual,tol,pass\n"));
    assert_eq!(text.lines().count(), 1 + a.len());
}
