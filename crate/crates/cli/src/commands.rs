//! Subcommand bodies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};

use parametrix::assumptions::{self, AssumptionReport};
use parametrix::bounds::{fit_envelope, pointwise_bound, EnvelopeFit, EnvelopeSpec};
use parametrix::coefficients::{CoefficientSet, DriftParameters};
use parametrix::engine::{Engine, KernelKind, KernelTable, TableMeta};
use parametrix::frozen::FrozenKernelEvaluator;
use parametrix::oracles::{monte_carlo_density, run_residual_suite, OracleResult, SuiteInput};
use parametrix::symbol::FrozenSymbol;
use parametrix::Error;

use crate::config::RunConfig;
use crate::Failure;

const ENVELOPE_TOL: f64 = 1e-12;

fn engine_failure(e: Error) -> Failure {
    match e {
        Error::Invalid(_) | Error::UnknownCatalog(_) => Failure::Usage(e.to_string()),
        _ => Failure::Check(e.to_string()),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn prepare(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| io_failure(out, e))
}

fn run_checks(cfg: &RunConfig, coeffs: &CoefficientSet, params: &DriftParameters, out: &Path) -> Result<AssumptionReport, Failure> {
    let rep = assumptions::check_assumptions(coeffs, params, cfg.eps0.value(), &cfg.assumptions).map_err(engine_failure)?;
    prepare(out)?;
    write(&out.join("assumptions.jsonl"), &rep.to_jsonl())?;
    for r in &rep.reports {
        let fits: Vec<String> = r.fitted.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
        println!("{} {:<28} {}", if r.pass { "pass" } else { "FAIL" }, r.check, fits.join(" "));
    }
    Ok(rep)
}

pub fn check_assumptions(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let (coeffs, params) = cfg.coefficients()?;
    let rep = run_checks(cfg, &coeffs, &params, out)?;
    if let (Some(hi), Some(e)) = (rep.eps0_window, rep.eps0) {
        println!("eps0 = {e} in (0, {hi})");
    }
    if rep.pass {
        Ok(())
    } else {
        Err(Failure::Check(format!("assumption checks failed: {}", rep.failed().join(", "))))
    }
}

pub fn build(cfg: &RunConfig, out: &Path, force: bool) -> Result<(), Failure> {
    let (coeffs, params) = cfg.coefficients()?;
    let rep = run_checks(cfg, &coeffs, &params, out)?;
    if !rep.pass && !force {
        return Err(Failure::Check(format!(
            "assumption checks failed ({}); rerun with --force to build anyway",
            rep.failed().join(", ")
        )));
    }
    let partial = |error: String| {
        json!({
            "status": "failed",
            "error": error,
            "run": cfg,
            "seed": cfg.seed,
            "workers": 1,
            "version": env!("CARGO_PKG_VERSION"),
        })
    };
    let manifest_path = out.join("manifest.json");
    let result = Engine::new(Arc::new(coeffs), params, cfg.engine.clone()).and_then(|e| e.build());
    let built = match result {
        Ok(b) => b,
        Err(e) => {
            write(&manifest_path, &format!("{:#}\n", partial(e.to_string())))?;
            return Err(engine_failure(e));
        }
    };
    let mut files = Vec::new();
    for table in built.tables() {
        let name = format!("{}.csv", table.kind.label());
        let path = out.join(&name);
        table.write_csv(&path).map_err(engine_failure)?;
        files.push(name);
    }
    let manifest = json!({
        "status": "complete",
        "engine": serde_json::to_value(&built.manifest).expect("manifest serializes"),
        "run": cfg,
        "seed": cfg.seed,
        "workers": 1,
        "version": env!("CARGO_PKG_VERSION"),
        "files": files,
    });
    write(&manifest_path, &format!("{manifest:#}\n"))?;
    let m = &built.manifest;
    println!(
        "built {} tables: {} cells, {} steps, eps0 = {}, C3 = {:.4}, tail = {:.3e}, mass defect = {:.3e}",
        files.len(),
        m.cells,
        m.steps,
        built.budget.eps0,
        built.budget.c3,
        built.budget.empirical_tail,
        m.max_mass_defect
    );
    if built.budget.within_tolerance() {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "series tail {:.3e} exceeds tolerance {:.3e}",
            built.budget.empirical_tail, built.budget.tolerance
        )))
    }
}

/// Tables and manifest of a finished build.
struct Loaded {
    manifest: Value,
    meta: TableMeta,
    dir: PathBuf,
}

impl Loaded {
    fn open(coeffs: &CoefficientSet, dir: &Path) -> Result<Self, Failure> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| io_failure(&path, e))?;
        let manifest: Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        if manifest["status"] != "complete" {
            return Err(Failure::Usage(format!("{}: build did not complete", path.display())));
        }
        let engine = &manifest["engine"];
        let num = |v: &Value, what: &str| {
            v.as_f64().ok_or_else(|| Failure::Usage(format!("{}: missing {what}", path.display())))
        };
        let name = engine["coefficients"].as_str().unwrap_or_default().to_string();
        if name != coeffs.name {
            return Err(Failure::Usage(format!(
                "tables in {} were built for `{name}`, the config names `{}`",
                dir.display(),
                coeffs.name
            )));
        }
        let meta = TableMeta {
            coefficients: name,
            eps0: num(&engine["budget"]["eps0"], "budget.eps0")?,
            series_depth: num(&engine["config"]["series_terms"], "config.series_terms")? as usize,
            dx: num(&engine["config"]["dx"], "config.dx")?,
            dt: num(&engine["config"]["dt"], "config.dt")?,
        };
        Ok(Self { manifest, meta, dir: dir.to_path_buf() })
    }

    fn c3(&self) -> f64 {
        self.manifest["engine"]["budget"]["c3"].as_f64().unwrap_or(f64::NAN)
    }

    fn table(&self, kind: KernelKind) -> Result<KernelTable, Failure> {
        let path = self.dir.join(format!("{}.csv", kind.label()));
        let text = std::fs::read_to_string(&path).map_err(|e| io_failure(&path, e))?;
        KernelTable::from_csv(kind, &text, self.meta.clone()).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

fn envelope(coeffs: &CoefficientSet, params: &DriftParameters, p: &KernelTable, eps0: f64) -> Result<(EnvelopeSpec, EnvelopeFit), Failure> {
    let spec = EnvelopeSpec::new(coeffs, params, eps0).map_err(engine_failure)?;
    let fit = fit_envelope(p, &spec, coeffs, ENVELOPE_TOL).map_err(engine_failure)?;
    Ok((spec, fit))
}

pub fn verify(cfg: &RunConfig, tables: &Path, out: &Path) -> Result<(), Failure> {
    let (coeffs, params) = cfg.coefficients()?;
    let loaded = Loaded::open(&coeffs, tables)?;
    let p = loaded.table(KernelKind::P)?;
    let q0 = loaded.table(KernelKind::Q0)?;
    let eps0 = loaded.meta.eps0;
    let input = SuiteInput { coeffs: &coeffs, p: &p, q0: &q0, c3: loaded.c3(), eps0 };
    let mut results = run_residual_suite(&input, &cfg.verify).map_err(engine_failure)?;
    let budget = &loaded.manifest["engine"]["budget"];
    let tail = budget["empirical_tail"].as_f64().unwrap_or(f64::INFINITY);
    let tol = budget["tolerance"].as_f64().unwrap_or(0.0);
    results.push(OracleResult::new("series_tail", vec![], 0.0, tail, tol, 0.0));
    let mut text: String = results.iter().map(OracleResult::to_jsonl).collect();
    let env = envelope(&coeffs, &params, &p, eps0);
    let env_pass = match &env {
        Ok((_, fit)) => {
            text.push_str(&fit.to_jsonl("pointwise_envelope"));
            fit.c.is_finite() && fit.c > 0.0
        }
        Err(Failure::Check(m) | Failure::Usage(m)) => {
            let _ = writeln!(text, "{}", json!({"record": "envelope", "check": "pointwise_envelope", "error": m}));
            false
        }
    };
    prepare(out)?;
    write(&out.join("verify.jsonl"), &text)?;

    let mut names: Vec<&str> = results.iter().map(|r| r.name.as_str()).collect();
    names.dedup();
    let mut failed = Vec::new();
    for name in names {
        let group: Vec<&OracleResult> = results.iter().filter(|r| r.name == name).collect();
        let bad = group.iter().filter(|r| !r.pass).count();
        let worst = group.iter().map(|r| r.abs_err).fold(0.0, f64::max);
        println!("{} {:<28} {}/{} worst abs err {:.3e}", if bad == 0 { "pass" } else { "FAIL" }, name, group.len() - bad, group.len(), worst);
        if bad > 0 {
            failed.push(name.to_string());
        }
    }
    match &env {
        Ok((_, fit)) => println!(
            "{} {:<28} c = {:.4} at (t, x, y) = ({}, {:.3}, {:.3})",
            if env_pass { "pass" } else { "FAIL" },
            "pointwise_envelope",
            fit.c,
            fit.argmax.0,
            fit.argmax.1,
            fit.argmax.2
        ),
        Err(_) => println!("FAIL {:<28} fit failed", "pointwise_envelope"),
    }
    if !env_pass {
        failed.push("pointwise_envelope".into());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("verification failed: {}", failed.join(", "))))
    }
}

pub fn export(cfg: &RunConfig, tables: &Path, out: &Path) -> Result<(), Failure> {
    let (coeffs, params) = cfg.coefficients()?;
    let loaded = Loaded::open(&coeffs, tables)?;
    let p = loaded.table(KernelKind::P)?;
    let p0 = loaded.table(KernelKind::P0)?;
    let grid = p.grid.clone();
    let sel = &cfg.export;
    let times: Vec<usize> = match sel.t {
        Some(t) => vec![p.time_index(t).map_err(|e| Failure::Usage(e.to_string()))?],
        None => (0..p.t_grid.len()).collect(),
    };
    let rows: Vec<usize> = match sel.x {
        Some(x) => vec![grid.cell_of(x).map_err(|e| Failure::Usage(e.to_string()))?],
        None => (0..grid.n).collect(),
    };
    let mc = cfg.monte_carlo.paths > 0;
    if mc && (times.len() != 1 || rows.len() != 1) {
        return Err(Failure::Usage("the Monte-Carlo overlay needs [export] t and x".into()));
    }
    let (spec, fit) = envelope(&coeffs, &params, &p, loaded.meta.eps0)?;
    let scaled = spec.with_scale(fit.c);
    let hist = if mc {
        let (t, x) = (p.t_grid[times[0]], grid.center(rows[0]));
        let edges: Vec<f64> = (0..=grid.n).map(|k| grid.x_min + k as f64 * grid.dx).collect();
        let h = monte_carlo_density(&coeffs, x, t, x, cfg.monte_carlo.paths, cfg.monte_carlo.cutoff, cfg.seed, &edges)
            .map_err(engine_failure)?;
        Some(h)
    } else {
        None
    };
    let mut csv = String::from(if mc { "t,x,y,p,p0,envelope,mc_density,mc_stderr\n" } else { "t,x,y,p,p0,envelope\n" });
    for &ti in &times {
        let t = p.t_grid[ti];
        for &i in &rows {
            let x = grid.center(i);
            for j in 0..grid.n {
                let y = grid.center(j);
                let bound = pointwise_bound(&scaled, &coeffs, t, x, y).map_err(engine_failure)?;
                let _ = write!(csv, "{t:.16e},{x:.16e},{y:.16e},{:.16e},{:.16e},{bound:.16e}", p.value(ti, i, j), p0.value(ti, i, j));
                if let Some(h) = &hist {
                    let _ = write!(csv, ",{:.16e},{:.16e}", h.density[j], h.stderr[j]);
                }
                csv.push('\n');
            }
        }
    }
    prepare(out)?;
    write(&out.join("export.csv"), &csv)?;
    let mut meta = json!({
        "coefficients": coeffs.name,
        "eps0": loaded.meta.eps0,
        "envelope_c": fit.c,
        "envelope_argmax": [fit.argmax.0, fit.argmax.1, fit.argmax.2],
        "t": sel.t,
        "x": sel.x,
    });
    if let Some(h) = &hist {
        meta["monte_carlo"] = json!({
            "paths": h.paths, "cutoff": h.cutoff, "seed": h.seed, "workers": h.workers, "scheme": h.scheme,
        });
    }
    write(&out.join("export.json"), &format!("{meta:#}\n"))?;
    println!("wrote {} rows to {}", times.len() * rows.len() * grid.n, out.join("export.csv").display());
    Ok(())
}

pub fn bench(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let (coeffs, params) = cfg.coefficients()?;
    let coeffs = Arc::new(coeffs);
    let n = cfg.bench.density_points.max(1);
    let w = 0.5 * (cfg.engine.x_min + cfg.engine.x_max);
    let t = 0.5 * cfg.engine.t_max;
    let ev = FrozenKernelEvaluator::new(FrozenSymbol::new(coeffs.clone(), &[w]).map_err(engine_failure)?);
    let start = Instant::now();
    let mut checksum = 0.0;
    for k in 0..n {
        let u = -3.0 + 6.0 * k as f64 / n as f64;
        checksum += ev.density(t, &[0.0], &[u]).map_err(engine_failure)?.value;
    }
    let density_seconds = start.elapsed().as_secs_f64();
    let engine = Engine::new(coeffs, params, cfg.engine.clone()).map_err(engine_failure)?;
    let start = Instant::now();
    let built = engine.build().map_err(engine_failure)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let m = &built.manifest;
    let report = json!({
        "density_points": n,
        "density_seconds": density_seconds,
        "density_us_per_eval": 1e6 * density_seconds / n as f64,
        "density_checksum": checksum,
        "build_seconds": build_seconds,
        "seconds_assembly": m.seconds_assembly,
        "seconds_series": m.seconds_series,
        "cells": m.cells,
        "steps": m.steps,
        "column_classes": m.column_classes,
        "fft_length": m.fft_length,
        "workers": 1,
    });
    prepare(out)?;
    write(&out.join("bench.json"), &format!("{report:#}\n"))?;
    println!(
        "density: {:.1} us/eval over {n} points; build: {build_seconds:.2} s ({} cells, {} steps)",
        1e6 * density_seconds / n as f64,
        m.cells,
        m.steps
    );
    Ok(())
}
