use std::sync::Arc;

use convint::convex::{self, AffineBasis};
use convint::corrugation::{self, CorrugationJob};
use convint::jetspace::DualPair;
use convint::linalg::{self, Matrix};
use convint::loops::FnFamily;
use proptest::prelude::*;

fn unit(a: f64) -> Vec<f64> {
    vec![a.cos(), a.sin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn update_sends_v_to_w_and_keeps_kernel(
        a in 0.0..std::f64::consts::TAU,
        m in prop::collection::vec(-2.0..2.0f64, 6),
        w in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let pi = unit(a);
        let p = DualPair::new(pi.clone(), pi.clone()).unwrap();
        let phi = Matrix::from_row_major(3, 2, m).unwrap();
        let out = p.update(&phi, &w).unwrap();
        prop_assert!(linalg::dist(&out.mul_vec(&pi), &w) < 1e-12);
        let k = vec![-pi[1], pi[0]];
        prop_assert!(linalg::dist(&out.mul_vec(&k), &phi.mul_vec(&k)) < 1e-12);
    }

    #[test]
    fn barycentric_round_trip(
        pts in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 3),
        raw in prop::collection::vec(0.05..1.0f64, 3),
    ) {
        let basis = match AffineBasis::new(pts.clone()) {
            Ok(b) if b.sigma_min() > 0.05 => b,
            _ => return Ok(()),
        };
        let sum: f64 = raw.iter().sum();
        let mut q = vec![0.0; 2];
        for (p, &r) in pts.iter().zip(&raw) {
            linalg::axpy(&mut q, r / sum, p);
        }
        let c = convex::barycentric_coords(&basis, &q).unwrap();
        for (got, r) in c.weights.iter().zip(&raw) {
            prop_assert!((got - r / sum).abs() < 1e-10);
        }
        prop_assert!(convex::surrounds(&pts, &q, 0.0).is_some());
    }

    #[test]
    fn hull_membership_agrees_with_exhaustive_search(
        pts in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 1..=8),
        v in prop::collection::vec(-0.8..0.8f64, 2),
    ) {
        let a = convex::caratheodory_select(&pts, &v);
        let b = convex::exhaustive_hull(&pts, &v);
        prop_assert_eq!(a.is_some(), b.is_some());
        if let Some(c) = a {
            prop_assert!(c.indices.len() <= 3);
            prop_assert!(c.weights.iter().all(|&w| w >= 0.0));
            prop_assert!(c.residual(&pts, &v) < 1e-8);
        }
    }

    #[test]
    fn corrugation_is_periodic_along_v(
        a in 0.0..std::f64::consts::TAU,
        x in prop::collection::vec(-1.0..1.0f64, 2),
        k in 1..4usize,
    ) {
        let fam = FnFamily::new(2, 2, |_x: &[f64], t: f64, s: f64| {
            let u = std::f64::consts::TAU * s;
            vec![t * u.cos() + 0.3 * (2.0 * u).sin(), u.sin()]
        });
        let n = 8.0;
        let job = CorrugationJob::new(DualPair::new(unit(a), unit(a)).unwrap(), n, Arc::new(fam)).unwrap();
        let shift: Vec<f64> = x.iter().zip(unit(a)).map(|(xi, vi)| xi + k as f64 * vi / n).collect();
        let c0 = corrugation::corrugation(&job, &x, 0.7);
        let c1 = corrugation::corrugation(&job, &shift, 0.7);
        prop_assert!(linalg::dist(&c0, &c1) < 1e-10);
    }
}
