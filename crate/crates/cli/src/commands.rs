use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use convint::demos::sphere::sigma_on_perp;
use convint::demos::{
    corrugate_patch, formal_frames, rotation_formal_solution, rotation_holonomy_residual, sphere_grid, sphere_relation,
    whitney_graustein, write_frames_csv, ClosedCurve, CorrugateOptions, SphereRelationConfig, WgOptions, WgReport,
};
use convint::hprinciple::{ConclusionReport, VerifyOptions};
use serde::Serialize;

use crate::config::{positive, RunConfig};
use crate::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Numerical(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn sphere_config(cfg: &RunConfig) -> Result<SphereRelationConfig<f64>, CliError> {
    let c = SphereRelationConfig {
        ball_radius: cfg.radius.unwrap_or(0.9),
        ..Default::default()
    };
    c.validate()?;
    Ok(c)
}

fn presets(name: &str) -> Result<(ClosedCurve<f64>, ClosedCurve<f64>), CliError> {
    match name {
        "circle-ellipse" => Ok((ClosedCurve::circle(), ClosedCurve::ellipse(1.5, 0.6)?)),
        "circle-reversed" => Ok((ClosedCurve::circle(), ClosedCurve::reversed_circle())),
        other => Err(CliError::Usage(format!(
            "unknown preset {other:?} (expected circle-ellipse or circle-reversed)"
        ))),
    }
}

#[derive(Serialize)]
struct WgOutput<'a> {
    preset: &'a str,
    #[serde(flatten)]
    report: WgReport,
    conclusions: ConclusionReport,
    pass: bool,
}

pub fn wg(cfg: &RunConfig) -> Result<(), CliError> {
    let preset = cfg.preset.as_deref().unwrap_or("circle-ellipse");
    let (f0, f1) = presets(preset)?;
    let eps = cfg.eps_or(0.05)?;
    let frames = cfg.frames_or(11)?;
    let samples = cfg.grid_or(1024)?;
    let dir = cfg.out_dir()?;

    let h = whitney_graustein(&f0, &f1, eps, &WgOptions::default())?;
    let report = h.report(frames, samples);
    let conclusions = h.conclusions(&VerifyOptions::for_dim(2));
    let mut w = create(&dir.join("frames.csv"))?;
    write_frames_csv(&h, frames, report.samples, &mut w)?;
    w.flush()?;

    let pass = report.all_pass() && conclusions.all_pass();
    println!(
        "winding {}  immersion floor {:.3e}  endpoint residual {:.1e}  C0 deviation {:.3e}",
        report.winding, report.immersion_floor, report.endpoint_residual, report.c0_deviation
    );
    for b in &conclusions.bullets {
        println!(
            "{:<28} residual {:.3e}  tol {:.1e}  {}",
            b.name,
            b.residual,
            b.tol,
            verdict(b.pass)
        );
    }
    let failures = describe_wg_failures(&report, &conclusions);
    write_json(
        &dir.join("report.json"),
        &WgOutput {
            preset,
            report,
            conclusions,
            pass,
        },
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("wg checks failed: {failures}")))
    }
}

fn describe_wg_failures(r: &WgReport, c: &ConclusionReport) -> String {
    let mut out: Vec<&str> = Vec::new();
    if !r.all_immersed {
        out.push("all_immersed");
    }
    if !r.endpoints_ok {
        out.push("endpoints");
    }
    if !r.c0_ok {
        out.push("c0_deviation");
    }
    out.extend(c.bullets.iter().filter(|b| !b.pass).map(|b| b.name.as_str()));
    out.join(", ")
}

#[derive(Serialize)]
struct FormalFrame {
    t: f64,
    file: String,
    sigma_min: f64,
    in_relation: bool,
}

#[derive(Serialize)]
struct FormalOutput {
    ball_radius: f64,
    delta: f64,
    grid: [usize; 2],
    frames: Vec<FormalFrame>,
    sigma_min: f64,
    sigma_floor: f64,
    holonomy_residual_t0: f64,
    holonomy_residual_t1: f64,
    pass: bool,
}

pub fn eversion_formal(cfg: &RunConfig) -> Result<(), CliError> {
    let rel_cfg = sphere_config(cfg)?;
    let frames = cfg.frames_or(11)?;
    let (n_lat, n_lon) = cfg.grid2_or((40, 80))?;
    let floor = positive("sigma_floor", cfg.sigma_floor.unwrap_or(0.9))?;
    let dir = cfg.out_dir()?;

    let rel = sphere_relation(rel_cfg);
    let grid = sphere_grid::<f64>(n_lat, n_lon);
    // Check cell centres and the exported vertices.
    let mut points = grid.clone();
    points.extend(convint::Mesh::uv_sphere(n_lat, n_lon).vertices);
    let mut out = Vec::with_capacity(frames);
    for (k, (t, mesh)) in formal_frames::<f64>(frames, n_lat, n_lon).into_iter().enumerate() {
        let file = format!("frame_{k:03}.obj");
        let mut w = create(&dir.join(&file))?;
        mesh.write_obj(&mut w)?;
        w.flush()?;
        let mut sigma = f64::INFINITY;
        let mut member = true;
        for x in &points {
            let j = rotation_formal_solution(t, x);
            sigma = sigma.min(sigma_on_perp(&j.phi, x));
            member &= rel.member(&j);
        }
        out.push(FormalFrame {
            t,
            file,
            sigma_min: sigma,
            in_relation: member,
        });
    }
    let sigma_min = out.iter().map(|f| f.sigma_min).fold(f64::INFINITY, f64::min);
    let pass = sigma_min >= floor && out.iter().all(|f| f.in_relation);
    let report = FormalOutput {
        ball_radius: rel_cfg.ball_radius,
        delta: rel_cfg.delta,
        grid: [n_lat, n_lon],
        sigma_min,
        sigma_floor: floor,
        holonomy_residual_t0: rotation_holonomy_residual(0.0, &grid),
        holonomy_residual_t1: rotation_holonomy_residual(1.0, &grid),
        pass,
        frames: out,
    };
    println!(
        "{} frames  min sigma {:.6}  floor {}  holonomy residual t=0 {:.1e} t=1 {:.1e}",
        report.frames.len(),
        sigma_min,
        floor,
        report.holonomy_residual_t0,
        report.holonomy_residual_t1
    );
    write_json(&dir.join("report.json"), &report)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "singular value floor violated: {sigma_min} < {floor} or a jet left the relation"
        )))
    }
}

pub fn eversion_corrugate(cfg: &RunConfig) -> Result<(), CliError> {
    let rel_cfg = sphere_config(cfg)?;
    let mut opts = CorrugateOptions::<f64>::default();
    opts.eps = cfg.eps_or(opts.eps)?;
    let g = cfg.grid_or(opts.step.grid[0])?;
    opts.step.grid = vec![g; 3];
    opts.verify.grid = vec![g; 3];
    let dir = cfg.out_dir()?;

    let report = corrugate_patch(rel_cfg, &opts)?;
    println!("experimental patch corrugation at t = {}", report.t);
    for (i, s) in report.steps.iter().enumerate() {
        println!(
            "step {}: N {}  margin {:.3e}  corrugation sup {:.3e}",
            i + 1,
            s.n,
            s.margin,
            s.corr_sup
        );
    }
    if let Some(c) = &report.conclusions {
        for b in &c.bullets {
            println!("{:<28} residual {:.3e}  tol {:.1e}", b.name, b.residual, b.tol);
        }
    }
    if let Some(e) = &report.error {
        println!("engine stopped: {e}");
    }
    write_json(&dir.join("report.json"), &report)
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let suite = cfg.suite.as_deref().unwrap_or("all");
    let seed = cfg.seed.unwrap_or(0);
    // Reject unknown names before touching the output directory.
    if suite != "all" && !convint::verify::SUITES.contains(&suite) {
        return Err(CliError::Usage(format!(
            "unknown suite {suite:?} (expected one of {}, all)",
            convint::verify::SUITES.join(", ")
        )));
    }
    let dir = cfg.out_dir()?;
    let checks = convint::verify::run_suite(suite, seed)?;
    let path = dir.join(format!("verify_{suite}.csv"));
    let mut w = create(&path)?;
    convint::verify::write_checks(&mut w, &checks)?;
    w.flush()?;
    for c in &checks {
        println!(
            "{:<12} {:<36} {:>12.3e} {:>10.1e}  {}",
            c.suite,
            c.name,
            c.residual,
            c.tol,
            verdict(c.pass)
        );
    }
    match checks.iter().find(|c| !c.pass) {
        None => Ok(()),
        Some(c) => Err(CliError::Numerical(format!(
            "check {}/{} failed: residual {:e}, tolerance {:e}",
            c.suite, c.name, c.residual, c.tol
        ))),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}
