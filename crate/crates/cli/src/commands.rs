use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use unicorr::bump::fejer_integral;
use unicorr::corrector::{build_universal_set, clamp_param, correct, BundleSummary, CorrectionCertificate, TailCheck};
use unicorr::fourier::{coefficients, CoefficientVector, PartialSumScan};
use unicorr::homogeneous::{SphereGrid, SphericalHarmonics};
use unicorr::measure::{CylinderSpace, GridDescriptor, GridFunction, MaskRle, NodeMask};
use unicorr::systems::{atom_example_check, gram_matrix, AtomCheck, OrthonormalSystem, SystemDescriptor, Trigonometric, Walsh};

use crate::config::{ExperimentConfig, Setup};

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub grid: GridDescriptor,
    pub system: SystemDescriptor,
    pub bundle: Option<BundleSummary>,
    pub certificate: Option<CorrectionCertificate>,
    pub tails: Vec<TailCheck>,
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
struct Timing {
    bundle_s: f64,
    correct_s: f64,
    total_s: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `(m, ||S_m(g)||_1)` for `m = 1..=c.len()`.
fn envelope_rows(c: &CoefficientVector, sys: &dyn OrthonormalSystem) -> Vec<(usize, f64)> {
    let mut scan = PartialSumScan::new(sys, 1);
    (1..=c.len())
        .map(|m| {
            scan.push(c.get(m));
            (m, scan.norm1())
        })
        .collect()
}

/// Runs one correction and writes report.json, tails.csv, envelope.csv,
/// emask.rle.json and the coefficients of `g` as coefficients.csv. Returns whether every certificate statement passed.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    std::fs::create_dir_all(out)?;
    let setup = Setup::build(cfg)?;
    let sys = setup.sys.as_ref();
    let source = setup.source.as_ref();
    let (eps, delta, warnings) = cfg.params();
    let f = setup.target(&cfg.target, cfg.seed)?;
    let t0 = Instant::now();

    let mut report = RunReport {
        config: cfg.clone(),
        warnings,
        grid: setup.space.descriptor(),
        system: sys.descriptor(),
        bundle: None,
        certificate: None,
        tails: Vec::new(),
        error: None,
        pass: false,
    };
    let mut tails_csv = String::from("r,m,tail,bound\n");
    let mut env_csv = String::from("m,partial_sum_l1,bound\n");

    let eps0 = eps.min(f.norm1());
    let bundle = build_universal_set(eps0, delta, cfg.depth, sys, source, &setup.opts);
    let t_bundle = t0.elapsed().as_secs_f64();
    let mut t_correct = 0.0;
    match bundle {
        Err(e) => report.error = Some(format!("universal set: {e}")),
        Ok(bundle) => {
            report.bundle = Some(bundle.summary());
            write_json(&out.join("emask.rle.json"), &bundle.e.to_rle())?;
            let t1 = Instant::now();
            let res = correct(&f, eps, delta, &bundle, sys, source, cfg.s_max);
            t_correct = t1.elapsed().as_secs_f64();
            match res {
                Err(e) => report.error = Some(format!("correction: {e}")),
                Ok((g, cert)) => {
                    for t in &cert.achieved.tails {
                        writeln!(tails_csv, "{},{},{:e},{:e}", t.r, t.m, t.tail, t.bound)?;
                    }
                    let bound = 2.0 * cert.achieved.min_f1_g1;
                    let c = coefficients(&g, sys, cert.achieved.scanned_to)?;
                    for (m, v) in envelope_rows(&c, sys) {
                        writeln!(env_csv, "{m},{v:e},{bound:e}")?;
                    }
                    let mut coeff_csv = Vec::new();
                    c.write_csv(&mut coeff_csv)?;
                    std::fs::write(out.join("coefficients.csv"), coeff_csv)?;
                    report.tails = cert.achieved.tails.clone();
                    report.pass = cert.statements.all();
                    report.certificate = Some(cert);
                }
            }
        }
    }
    write_text(&out.join("tails.csv"), &tails_csv)?;
    write_text(&out.join("envelope.csv"), &env_csv)?;
    write_json(&out.join("report.json"), &report)?;
    // wall-clock numbers live apart from the report so reruns stay byte-identical
    write_json(
        &out.join("timing.json"),
        &Timing {
            bundle_s: t_bundle,
            correct_s: t_correct,
            total_s: t0.elapsed().as_secs_f64(),
        },
    )?;
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    Ok(report.pass)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    row: usize,
    m: Option<usize>,
    eps: f64,
    delta: f64,
    f_minus_g_1: Option<f64>,
    e_measure: Option<f64>,
    nested: Option<bool>,
    pass: bool,
    error: Option<String>,
    mask: Option<MaskRle>,
}

fn sweep_row(setup: &Setup, f: &GridFunction, cfg: &ExperimentConfig, row: usize, m: Option<usize>, eps: f64, delta: f64) -> SweepRow {
    let (eps, _) = clamp_param(eps);
    let (delta, _) = clamp_param(delta);
    let mut out = SweepRow {
        row,
        m,
        eps,
        delta,
        f_minus_g_1: None,
        e_measure: None,
        nested: None,
        pass: false,
        error: None,
        mask: None,
    };
    let sys = setup.sys.as_ref();
    let source = setup.source.as_ref();
    let result = build_universal_set(eps.min(f.norm1()), delta, cfg.depth, sys, source, &setup.opts)
        .and_then(|b| correct(f, eps, delta, &b, sys, source, cfg.s_max).map(|(_, c)| (b, c)));
    match result {
        Ok((bundle, cert)) => {
            out.f_minus_g_1 = Some(cert.achieved.f_minus_g_1);
            out.e_measure = Some(cert.achieved.e_measure);
            out.pass = cert.statements.all();
            out.mask = Some(bundle.e.to_rle());
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

fn csv_field(v: Option<impl std::fmt::Display>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs the configured grid (or the `1/m` schedule) and writes sweep.csv.
pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    std::fs::create_dir_all(out)?;
    let setup = Setup::build(cfg)?;
    let f = setup.target(&cfg.target, cfg.seed)?;
    let plan = cfg.sweep.clone().unwrap_or_default();
    let jobs: Vec<(Option<usize>, f64, f64)> = match plan.m_max {
        Some(m_max) => (1..=m_max).map(|m| (Some(m), 1.0 / m as f64, 1.0 / m as f64)).collect(),
        None => plan
            .epsilons
            .iter()
            .flat_map(|&e| plan.deltas.iter().map(move |&d| (None, e, d)))
            .collect(),
    };
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(m, e, d))| sweep_row(&setup, &f, cfg, i, m, e, d))
        .collect();
    if plan.m_max.is_some() {
        for i in 1..rows.len() {
            if let (Some(a), Some(b)) = (&rows[i - 1].mask, &rows[i].mask) {
                let prev = NodeMask::from_rle(&setup.space, a)?;
                let cur = NodeMask::from_rle(&setup.space, b)?;
                rows[i].nested = Some(prev.is_subset_of(&cur));
            }
        }
    }
    let mut csv = String::from("row,m,eps,delta,f_minus_g_1,e_measure,nested,pass,error\n");
    for r in &rows {
        let err = r.error.as_deref().unwrap_or("").replace('"', "'");
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},\"{}\"",
            r.row,
            csv_field(r.m),
            r.eps,
            r.delta,
            csv_field(r.f_minus_g_1),
            csv_field(r.e_measure),
            csv_field(r.nested),
            r.pass,
            err
        )?;
    }
    write_text(&out.join("sweep.csv"), &csv)?;
    Ok(rows.iter().all(|r| r.pass))
}

#[derive(Debug, Serialize)]
pub struct GramCheck {
    pub system: SystemDescriptor,
    pub size: usize,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Gram matrices of the three shipped systems at their reference sizes.
pub fn verify_systems(gram_tol: f64, out: &Path) -> Result<bool> {
    std::fs::create_dir_all(out)?;
    let space = CylinderSpace::interval(1 << 14)?;
    let trig = Trigonometric::new(&space, 64)?;
    let walsh = Walsh::new(&space, 32)?;
    let grid = Arc::new(SphereGrid::new(16, 32)?);
    let sphere = SphericalHarmonics::new(&grid, 8)?;
    let cases: [(&dyn OrthonormalSystem, usize, f64); 3] = [(&trig, 64, gram_tol), (&walsh, 32, 0.0), (&sphere, 81, gram_tol)];
    let mut checks = Vec::new();
    for (sys, size, tol) in cases {
        let (_, dev) = gram_matrix(sys, size)?;
        let pass = if tol == 0.0 { dev == 0.0 } else { dev < tol };
        println!(
            "{:<6} {:>3} functions: max |G - I| = {dev:.3e} ({})",
            sys.descriptor().kind,
            size,
            if pass { "ok" } else { "FAIL" }
        );
        checks.push(GramCheck {
            system: sys.descriptor(),
            size,
            deviation: dev,
            tolerance: tol,
            pass,
        });
    }
    write_json(&out.join("systems.json"), &checks)?;
    Ok(checks.iter().all(|c| c.pass))
}

pub fn atom_check(n_max: u32, out: &Path) -> Result<bool> {
    std::fs::create_dir_all(out)?;
    let rows: Vec<AtomCheck> = (1..=n_max).map(atom_example_check).collect::<unicorr::Result<_>>()?;
    for r in rows.iter().take(5) {
        println!("N = {:>3}: lhs {} > rhs {}: {}", r.n, r.lhs_exact, r.rhs_exact, r.holds);
    }
    let all = rows.iter().all(|r| r.holds);
    println!("N = 1..{n_max}: {}", if all { "all hold" } else { "FAILED" });
    write_json(&out.join("atom.json"), &rows)?;
    Ok(all)
}

/// `|int_0^1 t I(2^j t) dt|` for the mean-zero step with low fraction `d`.
pub fn fejer(d: f64, j_min: i32, j_max: i32, out: &Path) -> Result<bool> {
    std::fs::create_dir_all(out)?;
    let mut csv = String::from("j,lambda,integral\n");
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for j in j_min..=j_max {
        let lambda = 2f64.powi(j);
        let v = fejer_integral(|t| t, 0.0, 1.0, d, lambda, 8);
        monotone &= v.abs() <= prev;
        prev = v.abs();
        writeln!(csv, "{j},{lambda},{v:e}")?;
        println!("lambda = 2^{j:<2}  integral = {v:+.6e}");
    }
    write_text(&out.join("fejer.csv"), &csv)?;
    Ok(monotone)
}
