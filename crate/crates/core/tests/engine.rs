//! Table builds checked against the independent oracles.

use std::sync::Arc;

use parametrix::catalog::example_catalog;
use parametrix::engine::{apply_pt, Build, Engine, EngineConfig};
use parametrix::oracles::{bump, q1_oracle, run_residual_suite, StableReference, StableTable, SuiteConfig, SuiteInput};

fn ex1(cfg: EngineConfig) -> (Engine, Build) {
    let (c, p) = example_catalog("ex1").unwrap();
    let e = Engine::new(Arc::new(c), p, cfg).unwrap();
    let b = e.build().unwrap();
    (e, b)
}

fn coarse() -> EngineConfig {
    EngineConfig { dx: 0.25, dt: 1e-2, fft_log2: 12, ..EngineConfig::default() }
}

#[test]
fn default_build_passes_residual_suite() {
    let (e, b) = ex1(EngineConfig::default());
    let rep = run_residual_suite(&SuiteInput::from_build(&e, &b), &SuiteConfig::default()).unwrap();
    let failed: Vec<_> = rep.iter().filter(|o| !o.pass).collect();
    assert!(failed.is_empty(), "{failed:?}");
    for name in ["mass", "positivity", "chapman_kolmogorov", "contraction", "q0_l1"] {
        assert!(rep.iter().any(|o| o.name == name), "{name}");
    }
    let line = rep[0].to_jsonl();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["record"], "oracle");
}

#[test]
fn coarse_grid_is_flagged() {
    let (e, b) = ex1(coarse());
    let rep = run_residual_suite(&SuiteInput::from_build(&e, &b), &SuiteConfig::default()).unwrap();
    assert!(rep.iter().any(|o| o.name == "chapman_kolmogorov" && !o.pass));
    let mass = |rep: &[parametrix::oracles::OracleResult]| {
        rep.iter().filter(|o| o.name == "mass").map(|o| o.abs_err).fold(0.0, f64::max)
    };
    let (e2, b2) = ex1(EngineConfig::default());
    let fine = run_residual_suite(&SuiteInput::from_build(&e2, &b2), &SuiteConfig::default()).unwrap();
    assert!(mass(&rep) > 10.0 * mass(&fine));
}

#[test]
fn first_series_term_matches_nested_quadrature() {
    let (e, b) = ex1(EngineConfig::default());
    let c = e.coeffs.clone();
    let st = StableTable::new(StableReference::from_coefficients(&c).unwrap(), 1e8, 4e-3).unwrap();
    let g = e.grid();
    let t = 0.05;
    let ti = b.qn[0].time_index(t).unwrap();
    for (x, y) in [(0.25, 0.75), (0.5, 0.5)] {
        let (i, j) = (g.cell_of(x).unwrap(), g.cell_of(y).unwrap());
        let oracle = q1_oracle(&c, &st, t, g.center(i), g.center(j), (g.x_min, g.x_max())).unwrap();
        let table = b.qn[0].value(ti, i, j);
        assert!((table - oracle).abs() <= 5e-3 * oracle.abs(), "({x},{y}): {table} vs {oracle}");
    }
}

#[test]
fn strong_continuity_and_p0_mass() {
    let (e, b) = ex1(EngineConfig::default());
    let g = e.grid();
    let f = bump(0.5, 1.0);
    let mut prev_sup = f64::INFINITY;
    let mut prev_mass = f64::INFINITY;
    for (ti, &t) in b.p.t_grid.iter().enumerate().rev() {
        let mut sup: f64 = 0.0;
        let mut mass: f64 = 0.0;
        for x in [0.25, 0.5, 0.75] {
            sup = sup.max((apply_pt(&b.p, &f, t, x).unwrap() - f(x)).abs());
            mass = mass.max((b.p0.mass(ti, g.cell_of(x).unwrap()) - 1.0).abs());
        }
        assert!(sup < prev_sup, "t = {t}: {sup} ≥ {prev_sup}");
        assert!(mass < prev_mass, "t = {t}: {mass} ≥ {prev_mass}");
        prev_sup = sup;
        prev_mass = mass;
    }
}

#[test]
fn q0_table_obeys_fitted_bound() {
    let (e, b) = ex1(coarse());
    let bud = &b.budget;
    assert!(bud.c3.is_finite() && bud.c3 > 0.0);
    for (ti, &t) in b.q0.t_grid.iter().enumerate() {
        let rt = e.coeffs.profile.r_t(t).unwrap();
        for i in 0..e.grid().n {
            assert!(b.q0.l1(ti, i) <= bud.c3 * rt.powf(bud.eps0) / t * (1.0 + 1e-12));
        }
    }
    assert!(bud.empirical_tail.is_finite());
}

#[test]
fn builds_are_deterministic() {
    let (_, a) = ex1(coarse());
    let (_, b) = ex1(coarse());
    for (x, y) in a.tables().iter().zip(b.tables()) {
        assert_eq!(x.to_csv(), y.to_csv(), "{}", x.kind.label());
    }
}

#[test]
fn constant_coefficients_give_p0() {
    let (c, p) = example_catalog("cauchy-const").unwrap();
    let e = Engine::new(Arc::new(c), p, coarse()).unwrap();
    let b = e.build().unwrap();
    assert!(b.q0.values.iter().all(|m| m.max_abs() == 0.0));
    assert_eq!(b.p.values, b.p0.values);
}
