//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so every line is printed; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::io::BufRead;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use convint::convex::{self, AffineBasis};
use convint::corrugation::{self, CorrugationJob};
use convint::demos::{self, sphere, ClosedCurve, SliceCase, SliceGrid, SphereRelationConfig, WgOptions};
use convint::domain::{Domain, Region};
use convint::hprinciple::{self, Landscape, StepOptions, VerifyOptions};
use convint::jetspace::{DualPair, JetSection, Relation};
use convint::linalg::{self, Matrix};
use convint::loops::{self, DynFamily, LoopOptions};
use convint::quadrature::gauss_legendre;
use convint::verify::{self, rng};
use convint::{reparam, Error};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Name, time budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("corrugation derivative identity", 10, corrugation_derivative),
        ("corrugation smallness", 5, corrugation_smallness),
        ("reparametrisation", 10, reparametrisation),
        ("surrounding loops", 30, surrounding_loops),
        ("satisfied or refund", 5, satisfied_or_refund),
        ("square counterexample", 1, square_counterexample),
        ("regular homotopy circle to ellipse", 120, regular_homotopy),
        ("inductive step conclusions", 60, inductive_step),
        ("sphere formal solution", 60, sphere_formal),
        ("oracle equivalences", 30, oracle_equivalences),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*budget);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {:<36} {:>7.2}s (budget {}s{})  {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            took.as_secs_f64(),
            budget,
            if in_time { "" } else { ", exceeded" },
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn random_pair(r: &mut impl Rng) -> DualPair<f64> {
    let a: f64 = r.gen_range(0.0..2.0 * PI);
    DualPair::new(vec![a.cos(), a.sin()], vec![a.cos(), a.sin()]).unwrap()
}

/// `(1/N) ∫_0^{Nπ(x)} (γ(s) − ⟨γ⟩) ds` by Gauss–Legendre on unit-length
/// panels, with no use of periodicity.
fn corrugation_oracle(fam: &DynFamily<f64>, p: &DualPair<f64>, n: f64, x: &[f64], t: f64) -> Vec<f64> {
    let sl = fam.at(x);
    let d = fam.target_dim();
    let avg = gauss_legendre(|s| sl.eval(t, s), 0.0, 1.0, 64, d);
    let end = n * p.apply_pi(x);
    let panels = 64 * (end.abs().ceil() as usize + 1);
    let raw = gauss_legendre(|s| sl.eval(t, s), 0.0, end, panels, d);
    raw.iter().zip(&avg).map(|(a, b)| (a - end * b) / n).collect()
}

fn corrugation_derivative() -> Outcome {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let fam = if i % 2 == 0 {
            verify::circle_family()
        } else {
            verify::trig_family(&mut r)
        };
        let n = [4.0, 8.0, 16.0][i % 3];
        let p = random_pair(&mut r);
        let x = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let t = r.gen_range(0.2..1.0);
        let job = CorrugationJob::new(p.clone(), n, fam.clone()).unwrap();
        let d = corrugation::corrugated_derivative(&job, &x, t);
        let h = 1e-5;
        let mut fd = Matrix::zeros(2, 2);
        for j in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let cp = corrugation_oracle(&fam, &p, n, &xp, t);
            let cm = corrugation_oracle(&fam, &p, n, &xm, t);
            fd.set_column(j, &linalg::scale(&linalg::sub(&cp, &cm), 0.5 / h));
        }
        worst = worst.max(d.sub(&fd).frobenius() / fd.frobenius());
    }
    outcome(
        worst <= 1e-4,
        format!("max relative residual {worst:.2e} over 50 instances (tol 1e-4)"),
    )
}

fn corrugation_smallness() -> Outcome {
    let fam = verify::circle_family::<f64>();
    let p = random_pair(&mut rng(5));
    let pts = Domain::cube(2, -1.0, 1.0).grid(&[41, 41]);
    let job = CorrugationJob::new(p.clone(), 4.0, fam).unwrap();
    // |Corr| = |sin(π r)| / (πN) at phase r = frac(Nπ(x)).
    let closed_sup = |n: f64| {
        pts.iter()
            .map(|x| (PI * (n * p.apply_pi(x)).rem_euclid(1.0)).sin().abs() / (PI * n))
            .fold(0.0, f64::max)
    };
    let scaled: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&n| corrugation::corrugation_sup(&job.with_n(n), &pts, &[1.0]).corr * n)
        .collect();
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    let n = corrugation::choose_n(&job, &pts, &[1.0], 0.01).unwrap_or(f64::NAN);
    let meets = closed_sup(n) <= 0.01;
    let half_fails = closed_sup(n / 2.0) > 0.01;
    outcome(
        spread <= 0.1 && meets && half_fails,
        format!(
            "sup|Corr|·N in [{lo:.4}, {hi:.4}] (spread {spread:.2e}); choose_N = {n} meets eps 0.01: {meets}, N/2 fails: {half_fails}"
        ),
    )
}

fn reparametrisation() -> Outcome {
    let mut r = rng(3);
    let mut avg = 0.0f64;
    let mut base = 0.0f64;
    let mut errors = 0;
    for _ in 0..20 {
        let inst = verify::reparam_instance::<f64>(&mut r);
        let w = match reparam::adjust_weights(&inst.gamma, &inst.g, &inst.centers, &[1.0 / 3.0; 3]) {
            Ok(w) => w,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let eta = verify::min_gap(&inst.centers) * 0.25;
        let rep = reparam::reparam_from_weights(&w, &inst.centers, eta).unwrap();
        avg = avg.max(linalg::dist(&verify::average_in_s(&inst.gamma, &rep, 2048), &inst.g));
        base = base.max(rep.eval(0.0).abs());
    }
    outcome(
        errors == 0 && avg <= 1e-8 && base <= 1e-9,
        format!("{errors} failures; max |avg − g| {avg:.2e} (tol 1e-8); max |φ(0)| {base:.2e} (tol 1e-9)"),
    )
}

fn surrounding_loops() -> Outcome {
    let land = verify::line_landscape::<f64>();
    let fam = match verify::line_family(&LoopOptions::default()) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("build failed: {e}")),
    };
    let xs = land.domain.grid(&[32]);
    let b = loops::check_bullets(&fam, &land, &xs, 16, 64, 32768);
    outcome(
        b.base_residual <= 1e-9 && b.average_residual <= 1e-8 && b.min_margin > 0.0,
        format!(
            "base {:.1e}, average {:.1e}, min margin {:.3} on {} points",
            b.base_residual, b.average_residual, b.min_margin, b.points
        ),
    )
}

fn satisfied_or_refund() -> Outcome {
    let land = verify::line_landscape::<f64>();
    let (g0, g1) = match (
        verify::line_family(&LoopOptions::default()),
        verify::line_family(&LoopOptions {
            cells_per_axis: 3,
            ..LoopOptions::default()
        }),
    ) {
        (Ok(a), Ok(b)) => (Arc::new(a) as DynFamily<f64>, Arc::new(b) as DynFamily<f64>),
        _ => return outcome(false, "building the two families failed".into()),
    };
    let sor = loops::satisfied_or_refund(g0.clone(), g1.clone());
    let xs = land.domain.grid(&[9]);
    let mut end = 0.0f64;
    for x in &xs {
        for j in 0..32 {
            let s = j as f64 / 32.0;
            for t in [0.0, 0.3, 0.7, 1.0] {
                end = end.max(linalg::dist(&sor.eval(0.0, x, t, s), &g0.eval(x, t, s)));
                end = end.max(linalg::dist(&sor.eval(1.0, x, t, s), &g1.eval(x, t, s)));
            }
        }
    }
    let mut surround_fails = 0;
    for k in 0..=10 {
        let fam = sor.family(k as f64 / 10.0);
        for x in &xs {
            let pts = verify::loop_samples(&fam, x, 1.0, 48);
            if convex::surrounds(&pts, &(land.g)(x), 1e-6).is_none() {
                surround_fails += 1;
            }
        }
    }
    let mid = sor.family(0.5);
    let mut gap = 0.0f64;
    for x in &xs {
        let d = verify::loop_samples(&mid, x, 1.0, 128);
        gap = gap.max(verify::superset_gap(&d, &verify::loop_samples(g0.as_ref(), x, 1.0, 64)));
        gap = gap.max(verify::superset_gap(&d, &verify::loop_samples(g1.as_ref(), x, 1.0, 64)));
    }
    outcome(
        end <= 1e-9 && surround_fails == 0 && gap <= 1e-6,
        format!("endpoints {end:.1e}; surround failures {surround_fails} of 99; τ=1/2 superset gap {gap:.1e}"),
    )
}

fn square_counterexample() -> Outcome {
    let (sq, c) = verify::square::<f64>();
    let surrounded = convex::surrounds(&sq, &c, 1e-6);
    let hull = convex::caratheodory_select(&sq, &c);
    let resid = hull.as_ref().map(|h| h.residual(&sq, &c));
    outcome(
        surrounded.is_none() && resid.is_some_and(|r| r <= 1e-12),
        format!(
            "surrounds: {:?}, hull certificate residual {resid:?}",
            surrounded.map(|s| s.indices)
        ),
    )
}

fn regular_homotopy() -> Outcome {
    let c0 = ClosedCurve::<f64>::circle();
    let c1 = ClosedCurve::ellipse(1.5, 0.6).unwrap();
    let wg = match demos::whitney_graustein(&c0, &c1, 0.05, &WgOptions::default()) {
        Ok(w) => w,
        Err(e) => return outcome(false, format!("engine failed: {e}")),
    };
    let rep = wg.report(11, 1024);
    let concl = wg.conclusions(&VerifyOptions::for_dim(2));
    let c0_bullet = concl.get("c0_close").map_or(f64::INFINITY, |b| b.residual);
    let refused = matches!(
        demos::whitney_graustein(&c0, &ClosedCurve::reversed_circle(), 0.05, &WgOptions::default()),
        Err(Error::WindingMismatch { .. })
    );
    outcome(
        rep.all_immersed && rep.immersion_floor > 0.0 && rep.endpoint_residual <= 1e-6 && c0_bullet <= 0.05 && refused,
        format!(
            "floor {:.3}, endpoints {:.1e}, C0 bullet {c0_bullet:.2e}, reversed refused: {refused}",
            rep.immersion_floor, rep.endpoint_residual
        ),
    )
}

fn inductive_step() -> Outcome {
    let f = JetSection::new(
        1,
        2,
        |x: &[f64]| vec![0.3 * x[0], 0.0],
        |_| Matrix::from_cols(&[vec![0.0, 1.0]]).unwrap(),
    )
    .with_derivative(|_| Matrix::from_cols(&[vec![0.3, 0.0]]).unwrap());
    let l = Landscape::new(
        Region::empty(),
        Region::bounded(vec![-0.5], vec![0.5]),
        Region::bounded(vec![-0.8], vec![0.8]),
        Domain::new(vec![-1.0], vec![1.0]),
        0.1,
    )
    .unwrap();
    let r = Relation::immersion(1, 2);
    let eps = 0.05;
    let h = match hprinciple::improve(&r, &f, &l, eps, &[vec![1.0]], &StepOptions::for_dim(1)) {
        Ok(h) => h,
        Err(e) => return outcome(false, format!("engine failed: {e}")),
    };
    let rep = hprinciple::verify_conclusions(&h, &f, &r, &l, &[vec![1.0]], eps, &VerifyOptions::for_dim(1));
    let tol = |name: &str| rep.get(name).map(|b| (b.residual, b.tol, b.pass));
    let expected = [
        ("starts_at_f0", 1e-9),
        ("in_relation", 0.0),
        ("unchanged_near_c_and_off_k1", 1e-12),
        ("c0_close", eps),
        ("holonomic_near_k0", 1e-3),
    ];
    let mut ok = rep.all_pass();
    let mut parts = Vec::new();
    for (name, t) in expected {
        match tol(name) {
            Some((res, declared, pass)) => {
                ok &= pass && declared == t;
                parts.push(format!("{name} {res:.1e}"));
            }
            None => {
                ok = false;
                parts.push(format!("{name} missing"));
            }
        }
    }
    // Independent spot check: on K0 the final map's slope is the unit
    // tangent field of the formal solution within 1e-3.
    let mut slope_gap = 0.0f64;
    for i in 0..=20 {
        let x = -0.5 + i as f64 * 0.05;
        let hstep = 1e-6 / h.max_frequency();
        let a = h.f(1.0, &[x + hstep]);
        let b = h.f(1.0, &[x - hstep]);
        let d = linalg::scale(&linalg::sub(&a, &b), 0.5 / hstep);
        let phi = h.section_at(1.0).eval(&[x]).phi.column(0);
        slope_gap = slope_gap.max(linalg::dist(&d, &phi));
    }
    ok &= slope_gap <= 1e-3;
    parts.push(format!("independent slope gap {slope_gap:.1e}"));
    outcome(ok, parts.join(", "))
}

/// Smallest singular value of `φ` on `x⊥`, from the 2 × 2 Gram matrix.
fn sigma_perp(phi: &Matrix<f64>, x: &[f64]) -> f64 {
    let helper = if x[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let u = linalg::scale(&cross(x, &helper), 1.0 / linalg::norm(&cross(x, &helper)));
    let v = cross(x, &u);
    let (a, b) = (phi.mul_vec(&u), phi.mul_vec(&v));
    let (g11, g12, g22) = (linalg::dot(&a, &a), linalg::dot(&a, &b), linalg::dot(&b, &b));
    let tr = g11 + g22;
    let det = g11 * g22 - g12 * g12;
    (0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())).max(0.0).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn sphere_formal() -> Outcome {
    // 20 × 40 latitude-longitude cell centres.
    let grid: Vec<Vec<f64>> = (0..20)
        .flat_map(|i| {
            let th = PI * (i as f64 + 0.5) / 20.0;
            (0..40).map(move |j| {
                let ph = 2.0 * PI * j as f64 / 40.0;
                vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
            })
        })
        .collect();
    // Holonomy on tangent vectors by central differences of the map.
    let mut hol = 0.0f64;
    for t in [0.0, 1.0] {
        for x in &grid {
            let j = sphere::rotation_formal_solution(t, x);
            let helper = if x[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let u = linalg::scale(&cross(x, &helper), 1.0 / linalg::norm(&cross(x, &helper)));
            for w in [u.clone(), cross(x, &u)] {
                let h = 1e-6;
                let xp: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + h * b).collect();
                let xm: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a - h * b).collect();
                let d = linalg::scale(
                    &linalg::sub(
                        &sphere::rotation_formal_solution(t, &xp).y,
                        &sphere::rotation_formal_solution(t, &xm).y,
                    ),
                    0.5 / h,
                );
                hol = hol.max(linalg::dist(&d, &j.phi.mul_vec(&w)));
            }
        }
    }
    let mut sigma = f64::INFINITY;
    for k in 0..11 {
        let t = k as f64 / 10.0;
        for x in &grid {
            sigma = sigma.min(sigma_perp(&sphere::rotation_formal_solution(t, x).phi, x));
        }
    }

    let cfg = SphereRelationConfig::default();
    let mut r = rng(17);
    let mut stable = true;
    let mut kinds = [0usize; 2];
    for i in 0..8 {
        let t: f64 = r.gen_range(0.0..1.0);
        let x: Vec<f64> = if i % 4 == 0 {
            vec![0.2, -0.1, 0.3]
        } else {
            let v: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
            linalg::scale(&v, 1.0 / linalg::norm(&v))
        };
        let sig = sphere::rotation_formal_solution(t, &x);
        let pi: Vec<f64> = if i == 1 {
            x.clone()
        } else {
            (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()
        };
        let k = (0..3).max_by(|&a, &b| pi[a].abs().total_cmp(&pi[b].abs())).unwrap();
        let p = DualPair::new(pi.clone(), linalg::scale(&linalg::unit(3, k), 1.0 / pi[k])).unwrap();
        let g = SliceGrid::new(1.0, 9, i as u64);
        match (
            sphere::slice_case_analysis(cfg, &sig, &p, &g),
            sphere::slice_case_analysis(cfg, &sig, &p, &g.refined()),
        ) {
            (Ok(a), Ok(b)) => {
                stable &= a.case.same_kind(&b.case);
                kinds[matches!(a.case, SliceCase::FullSpace) as usize] += 1;
            }
            _ => stable = false,
        }
    }

    // Export and read back.
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_obj");
    let mut export_ok = std::fs::create_dir_all(&dir).is_ok();
    let frames = demos::formal_frames::<f64>(11, 20, 40);
    for (k, (_, mesh)) in frames.iter().enumerate() {
        let path = dir.join(format!("frame_{k:03}.obj"));
        let written = std::fs::File::create(&path)
            .map_err(Error::from)
            .and_then(|f| mesh.write_obj(f));
        export_ok &= written.is_ok();
        let lines: Vec<String> = std::fs::File::open(&path)
            .map(|f| std::io::BufReader::new(f).lines().map_while(Result::ok).collect())
            .unwrap_or_default();
        let nv = lines.iter().filter(|l| l.starts_with("v ")).count();
        let nf = lines.iter().filter(|l| l.starts_with("f ")).count();
        export_ok &= nv == mesh.vertices.len() && nf == mesh.faces.len();
    }

    let ok = hol <= 1e-4 && sigma >= 0.9 && stable && kinds[0] > 0 && kinds[1] > 0 && export_ok;
    outcome(
        ok,
        format!(
            "holonomy {hol:.1e}, σ_min {sigma:.4}, slices stable: {stable} ({} full, {} line), 11 OBJ frames: {export_ok}",
            kinds[1], kinds[0]
        ),
    )
}

fn oracle_equivalences() -> Outcome {
    let mut r = rng(23);
    let mut disagree = 0;
    for _ in 0..400 {
        let k = r.gen_range(1..=8);
        let pts: Vec<Vec<f64>> = (0..k)
            .map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)])
            .collect();
        let v = vec![r.gen_range(-0.7..0.7), r.gen_range(-0.7..0.7)];
        let a = convex::caratheodory_select(&pts, &v);
        let b = convex::exhaustive_hull(&pts, &v);
        let a_ok = a
            .as_ref()
            .is_some_and(|c| c.residual(&pts, &v) <= 1e-8 && c.indices.len() <= 3);
        if a.is_some() != b.is_some() || (a.is_some() && !a_ok) {
            disagree += 1;
        }
    }

    let mut quad = 0.0f64;
    for i in 0..30 {
        let fam = if i % 2 == 0 {
            verify::circle_family()
        } else {
            verify::trig_family(&mut r)
        };
        let p = random_pair(&mut r);
        let n = [4.0, 8.0, 16.0][i % 3];
        let job = CorrugationJob::new(p, n, fam).unwrap();
        let x = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let t = r.gen_range(0.0..1.0);
        quad = quad.max(linalg::dist(
            &corrugation::corrugation(&job, &x, t),
            &corrugation::corrugation_quadrature(&job, &x, t),
        ));
    }

    let mut trip = 0.0f64;
    for d in [2usize, 3, 4] {
        let mut tried = 0;
        while tried < 20 {
            let pts: Vec<Vec<f64>> = (0..=d)
                .map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect())
                .collect();
            let basis = match AffineBasis::new(pts.clone()) {
                Ok(b) if b.sigma_min() > 0.05 => b,
                _ => continue,
            };
            tried += 1;
            let raw: Vec<f64> = (0..=d).map(|_| r.gen_range(-0.5..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let mut q = vec![0.0; d];
            for (p, &wi) in pts.iter().zip(&w) {
                linalg::axpy(&mut q, wi, p);
            }
            match convex::barycentric_coords(&basis, &q) {
                Ok(c) => trip = trip.max(c.weights.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)),
                Err(_) => trip = f64::INFINITY,
            }
        }
    }
    outcome(
        disagree == 0 && quad <= 1e-8 && trip <= 1e-10,
        format!(
            "hull disagreements {disagree} of 400; reduced vs quadrature {quad:.1e}; barycentric round trip {trip:.1e}"
        ),
    )
}
