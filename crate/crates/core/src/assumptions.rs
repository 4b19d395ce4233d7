//! Bundle of assumption checks run before a build: scaling certificate,
//! jump and coefficient samplers, drift conditions and the ε₀ window.

use serde::{Deserialize, Serialize};

use crate::coefficients::{sample_points, CoefficientSet, DriftParameters};
use crate::error::{Error, Result};
use crate::profile::{log_grid, ScalingCertificate};
use crate::report::VerificationReport;

/// Sample grids of the checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    /// Smallest scale of the drift fits; the cancellation fit extends below it.
    pub r_min: f64,
    pub r_points: usize,
    pub t_grid: Vec<f64>,
    /// Largest acceptable fitted constant.
    pub budget: f64,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        Self {
            x_min: -2.0,
            x_max: 3.0,
            x_points: 21,
            r_min: 1e-6,
            r_points: 13,
            t_grid: vec![0.01, 0.02, 0.05, 0.1],
            budget: 1e6,
        }
    }
}

impl AssumptionConfig {
    fn x_grid(&self, dim: usize) -> Vec<Vec<f64>> {
        if dim == 1 {
            let n = self.x_points.max(2);
            (0..n).map(|k| vec![self.x_min + (self.x_max - self.x_min) * k as f64 / (n - 1) as f64]).collect()
        } else {
            sample_points(dim, 0.05, self.x_max.abs().max(self.x_min.abs()), self.x_points.max(2) / 4 + 1)
        }
    }
}

/// All reports of one run plus the ε₀ in force.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub reports: Vec<VerificationReport>,
    pub eps0_window: Option<f64>,
    pub eps0: Option<f64>,
    pub pass: bool,
}

impl AssumptionReport {
    pub fn failed(&self) -> Vec<&str> {
        self.reports.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.reports.iter().map(|r| r.to_jsonl()).collect()
    }
}

fn failure(check: &str, e: &Error) -> VerificationReport {
    let mut rep = VerificationReport::new(check);
    rep.pass = false;
    rep.note(e.to_string());
    rep
}

/// Runs every check; individual failures are recorded, not returned as errors.
pub fn check_assumptions(
    coeffs: &CoefficientSet,
    params: &DriftParameters,
    eps0: Option<f64>,
    cfg: &AssumptionConfig,
) -> Result<AssumptionReport> {
    let prof = &coeffs.profile;
    let dim = coeffs.dim();
    let xs = cfg.x_grid(dim);
    let r_grid = log_grid(cfg.r_min, 1.0, cfg.r_points);
    let mut reports = vec![prof.validate()];

    let alpha = prof.alpha_h();
    match alpha {
        Some(a) => match ScalingCertificate::fit(prof, a, ScalingCertificate::default_grid()) {
            Ok(cert) => {
                let mut rep = VerificationReport::new("scaling_certificate");
                rep.fit("alpha_h", a);
                rep.fit("c_h", cert.c_h);
                rep.pass = cert.c_h.is_finite();
                reports.push(rep);
                if a < 1.0 {
                    reports.push(prof.check_drift_integral(&cert, &r_grid).unwrap_or_else(|e| failure("drift_integral_bound", &e)));
                }
            }
            Err(e) => reports.push(failure("scaling_certificate", &e)),
        },
        None => reports.push(failure("scaling_certificate", &Error::Assumption("no lower scaling index declared".into()))),
    }
    reports.push(prof.check_condition_r(&cfg.t_grid, &[0.1, 0.25, 0.5, 1.0]).unwrap_or_else(|e| failure("condition_R", &e)));
    reports.push(coeffs.check_jump_comparability());
    reports.push(coeffs.check_kappa_bounds(&xs));
    reports.push(coeffs.check_kappa_holder(&xs));
    reports.push(
        coeffs
            .check_cancellation_scale(params, &xs, &r_grid, cfg.budget)
            .unwrap_or_else(|e| failure("cancellation_scale", &e)),
    );
    let pairs: Vec<(Vec<f64>, Vec<f64>)> =
        xs.iter().enumerate().flat_map(|(i, x)| xs[i + 1..].iter().map(move |y| (x.clone(), y.clone()))).collect();
    reports.push(coeffs.check_holder_drift(params, &pairs, &r_grid, cfg.budget).unwrap_or_else(|e| failure("holder_drift", &e)));
    reports.push(coeffs.check_drift_time_bound(params, &xs, &cfg.t_grid).unwrap_or_else(|e| failure("drift_time_bound", &e)));

    let mut window_rep = VerificationReport::new("epsilon0_window");
    let mut hi = None;
    let mut used = None;
    match alpha.ok_or_else(|| Error::Assumption("no lower scaling index declared".into())) {
        Ok(a) => match params.epsilon0_window(a, coeffs.eps_kappa) {
            Ok(w) => {
                window_rep.fit("upper", w.hi);
                hi = Some(w.hi);
                let e = eps0.unwrap_or_else(|| w.midpoint());
                window_rep.eps0 = Some(e);
                if w.contains(e) {
                    used = Some(e);
                } else {
                    window_rep.pass = false;
                    window_rep.note(format!("eps0 = {e} outside (0, {})", w.hi));
                }
                window_rep.fit("eta", params.eta(a, coeffs.eps_kappa));
            }
            Err(e) => {
                window_rep.pass = false;
                window_rep.note(e.to_string());
            }
        },
        Err(e) => {
            window_rep.pass = false;
            window_rep.note(e.to_string());
        }
    }
    reports.push(window_rep);
    for r in &mut reports {
        if r.eps0.is_none() {
            r.eps0 = used;
        }
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(AssumptionReport { reports, eps0_window: hi, eps0: used, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::example_catalog;

    #[test]
    fn ex1_feasibility() {
        let (c, p) = example_catalog("ex1").unwrap();
        let rep = check_assumptions(&c, &p, None, &AssumptionConfig::default()).unwrap();
        assert!(rep.pass, "{:?}", rep.failed());
        assert!((rep.eps0_window.unwrap() - 0.35).abs() < 1e-12);

        let mut q = p.clone();
        q.sigma = 1.0;
        q.pairs = vec![(0.5, 1.0)];
        let rep = check_assumptions(&c, &q, None, &AssumptionConfig::default()).unwrap();
        assert!(!rep.pass);
        assert!(rep.failed().contains(&"cancellation_scale"));
    }

    #[test]
    fn eps0_outside_window_fails() {
        let (c, p) = example_catalog("ex1").unwrap();
        let rep = check_assumptions(&c, &p, Some(0.4), &AssumptionConfig::default()).unwrap();
        assert_eq!(rep.failed(), vec!["epsilon0_window"]);
        assert!(rep.to_jsonl().lines().count() > 10);
    }
}
