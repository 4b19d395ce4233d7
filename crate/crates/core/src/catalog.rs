//! Builtin coefficient sets.
//!
//! | name            | d | ν                         | κ                              |
//! |-----------------|---|---------------------------|--------------------------------|
//! | `ex1`           | 1 | `r^{-2}`                  | `a(x) k(z)`, non-symmetric `k` |
//! | `cauchy-const`  | 1 | `r^{-2}`                  | `1`                            |
//! | `kappa-product` | 1 | `r^{-2}`                  | `a(x) k(z)`, Hölder `a`        |
//! | `two-term`      | 1 | `r^{-7/4}`                | `a k + a^{1/3} k₂`             |
//! | `log-damped`    | 1 | `r^{-2}[ln(2+1/r)]^{-2}`  | `1`                            |
//! | `log-1`         | 1 | `r^{-2}/ln(2+1/r)`        | `1`                            |
//! | `log-0`         | 1 | `r^{-2} ln(2+1/r)`        | `1`                            |
//! | `oscillating-1` | 1 | factorial pieces, m = 2   | `1`                            |
//! | `oscillating-2` | 1 | factorial pieces, m = 3   | `1`                            |
//! | `cauchy-2d`     | 2 | `r^{-3}`                  | `1`                            |
//!
//! In `ex1`, `a(x) = 1 + √x 1_{(0,1)}(x) + 1_{[1,∞)}(x)`; the formula is read
//! with `a(x) = 1` for `x ≤ 0`.

use crate::coefficients::{CoefficientSet, DriftParameters, Kappa, PiecewiseSpec, PointFn, ProductTerm, Variant};
use crate::error::{Error, Result};
use crate::profile::{log_damped, log_one, log_zero, oscillating, power_law, tabulated, LevyProfile};
use crate::quadrature::QuadConfig;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const CATALOG: &[&str] = &[
    "ex1",
    "cauchy-const",
    "kappa-product",
    "two-term",
    "log-damped",
    "log-1",
    "log-0",
    "oscillating-1",
    "oscillating-2",
    "cauchy-2d",
];

/// `a(x)` of the non-symmetric reference example.
pub fn ex1_a(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < 1.0 {
        1.0 + x.sqrt()
    } else {
        2.0
    }
}

/// `k(z)` of the non-symmetric reference example.
pub fn ex1_k(z: f64) -> f64 {
    if z < 0.0 {
        0.5
    } else {
        1.5
    }
}

fn radial_jump(profile: &Arc<LevyProfile>) -> PointFn {
    let p = profile.clone();
    Arc::new(move |z: &[f64]| p.nu(crate::profile::norm(z)))
}

fn unit() -> PointFn {
    Arc::new(|_: &[f64]| 1.0)
}

fn constant_set(name: &str, profile: LevyProfile) -> CoefficientSet {
    let profile = Arc::new(profile);
    CoefficientSet {
        name: name.to_string(),
        jump: radial_jump(&profile),
        z_breaks: profile.breakpoints().iter().flat_map(|&b| [b, -b]).collect(),
        profile,
        drift: None,
        kappa: Kappa::Separable(vec![ProductTerm { a: unit(), k: unit() }]),
        c_j: 1.0,
        c_kappa: 1.0,
        eps_kappa: 1.0,
        isotropic: true,
        quad: QuadConfig::standard(),
    }
}

fn symmetric_params() -> DriftParameters {
    DriftParameters::new(1.0, vec![(1.0, 1.0)], Variant::AStar)
}

/// Coefficient set and drift parameters for a catalog name.
pub fn example_catalog(name: &str) -> Result<(CoefficientSet, DriftParameters)> {
    let out = match name {
        "ex1" => {
            let profile = Arc::new(power_law(1, 1.0, 1.0));
            let set = CoefficientSet {
                name: name.into(),
                jump: radial_jump(&profile),
                profile,
                drift: None,
                kappa: Kappa::Separable(vec![ProductTerm {
                    a: Arc::new(|x: &[f64]| ex1_a(x[0])),
                    k: Arc::new(|z: &[f64]| ex1_k(z[0])),
                }]),
                c_j: 1.0,
                c_kappa: 3.0,
                eps_kappa: 0.5,
                z_breaks: vec![0.0],
                isotropic: false,
                quad: QuadConfig::standard(),
            };
            (set, DriftParameters::new(0.9, vec![(0.5, 0.9)], Variant::AStar))
        }
        "cauchy-const" => (constant_set(name, power_law(1, 1.0, 1.0)), symmetric_params()),
        "kappa-product" => {
            let profile = Arc::new(power_law(1, 1.0, 1.0));
            let set = CoefficientSet {
                name: name.into(),
                jump: radial_jump(&profile),
                profile,
                drift: None,
                kappa: Kappa::Separable(vec![ProductTerm {
                    a: Arc::new(|x: &[f64]| 1.0 + 0.5 * x[0].abs().min(1.0).sqrt()),
                    k: Arc::new(|z: &[f64]| 1.0 + 0.5 * z[0].tanh()),
                }]),
                c_j: 1.0,
                c_kappa: 2.25,
                eps_kappa: 0.5,
                z_breaks: vec![],
                isotropic: false,
                quad: QuadConfig::standard(),
            };
            (set, DriftParameters::new(1.0, vec![(0.5, 1.0)], Variant::AStar))
        }
        "two-term" => {
            let profile = Arc::new(power_law(1, 0.75, 1.0));
            let k2 = |z: f64| -> f64 {
                if z == 0.0 || z.abs() > 0.5 {
                    return 0.0;
                }
                // z ∈ (2^{-2n}, 2^{-2n+1}] or −z ∈ (2^{-2n-1}, 2^{-2n}]
                let m = (-z.abs().log2()).floor() as i64;
                if z > 0.0 && m >= 1 && m % 2 == 1 {
                    1.0
                } else if z < 0.0 && m >= 2 && m % 2 == 0 {
                    2f64.powf(0.25)
                } else {
                    0.0
                }
            };
            let breaks: Vec<f64> = (1..60).map(|m| 2f64.powi(-m)).flat_map(|b| [b, -b]).collect();
            let mut zb = breaks;
            zb.push(0.0);
            let set = CoefficientSet {
                name: name.into(),
                jump: radial_jump(&profile),
                profile,
                drift: None,
                kappa: Kappa::Separable(vec![
                    ProductTerm { a: Arc::new(|x: &[f64]| ex1_a(x[0])), k: Arc::new(|z: &[f64]| ex1_k(z[0])) },
                    ProductTerm { a: Arc::new(|x: &[f64]| ex1_a(x[0]).cbrt()), k: Arc::new(move |z: &[f64]| k2(z[0])) },
                ]),
                c_j: 1.0,
                c_kappa: 4.5,
                eps_kappa: 0.5,
                z_breaks: zb,
                isotropic: false,
                quad: QuadConfig::standard(),
            };
            (set, DriftParameters::new(0.75, vec![(0.5, 0.75), (1.0 / 6.0, 1.0)], Variant::AStar))
        }
        "log-damped" => (constant_set(name, log_damped(1, 1.0).with_scaling(0.95, Some(1.0))), symmetric_params()),
        "log-1" => (constant_set(name, log_one(1).with_scaling(0.95, Some(1.0))), symmetric_params()),
        "log-0" => (constant_set(name, log_zero(1).with_scaling(1.0, Some(1.05))), symmetric_params()),
        "oscillating-1" => (constant_set(name, oscillating(1, 2)), symmetric_params()),
        "oscillating-2" => (constant_set(name, oscillating(1, 3)), symmetric_params()),
        "cauchy-2d" => (constant_set(name, power_law(2, 1.0, 1.0)), symmetric_params()),
        other => return Err(Error::UnknownCatalog(other.to_string())),
    };
    Ok(out)
}

/// Radial profile `ν` by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileShape {
    PowerLaw { alpha: f64, c: f64 },
    LogDamped { eps: f64 },
    LogOne,
    LogZero,
    Oscillating { m: usize },
    Tabulated { rows: Vec<(f64, f64)> },
}

/// Profile family plus declared scaling indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    #[serde(flatten)]
    pub shape: ProfileShape,
    #[serde(default)]
    pub alpha_h: Option<f64>,
    #[serde(default)]
    pub beta_h: Option<f64>,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<LevyProfile> {
        let p = match &self.shape {
            ProfileShape::PowerLaw { alpha, c } => {
                if !(*alpha > 0.0 && *alpha < 2.0 && *c > 0.0) {
                    return Err(Error::Invalid(format!("power law needs alpha in (0, 2) and c > 0, got ({alpha}, {c})")));
                }
                power_law(1, *alpha, *c)
            }
            ProfileShape::LogDamped { eps } => log_damped(1, *eps),
            ProfileShape::LogOne => log_one(1),
            ProfileShape::LogZero => log_zero(1),
            ProfileShape::Oscillating { m } => oscillating(1, *m),
            ProfileShape::Tabulated { rows } => tabulated("tabulated", 1, rows)?,
        };
        Ok(match self.alpha_h {
            Some(a) => p.with_scaling(a, self.beta_h),
            None => p,
        })
    }
}

/// One product term `a(x) k(z)` of a user-defined set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermPairSpec {
    pub a: PiecewiseSpec,
    pub k: PiecewiseSpec,
}

/// A one-dimensional coefficient set given by piecewise functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(default = "custom_name")]
    pub name: String,
    pub profile: ProfileSpec,
    pub terms: Vec<TermPairSpec>,
    #[serde(default)]
    pub drift: Option<PiecewiseSpec>,
    #[serde(default = "unit_constant")]
    pub c_j: f64,
    pub c_kappa: f64,
    pub eps_kappa: f64,
}

fn custom_name() -> String {
    "custom".into()
}

fn unit_constant() -> f64 {
    1.0
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<CoefficientSet> {
        if self.terms.is_empty() {
            return Err(Error::Invalid("at least one product term is required".into()));
        }
        let profile = Arc::new(self.profile.build()?);
        let mut z_breaks = vec![0.0];
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            z_breaks.extend(&t.k.breakpoints);
            terms.push(ProductTerm { a: t.a.clone().into_fn()?, k: t.k.clone().into_fn()? });
        }
        z_breaks.extend(profile.breakpoints().iter().flat_map(|&b| [b, -b]));
        z_breaks.sort_by(f64::total_cmp);
        z_breaks.dedup();
        let drift = match &self.drift {
            Some(d) => {
                let f = d.clone().into_fn()?;
                Some(Arc::new(move |x: &[f64]| vec![f(x)]) as crate::coefficients::VecFn)
            }
            None => None,
        };
        Ok(CoefficientSet {
            name: self.name.clone(),
            jump: radial_jump(&profile),
            profile,
            drift,
            kappa: Kappa::Separable(terms),
            c_j: self.c_j,
            c_kappa: self.c_kappa,
            eps_kappa: self.eps_kappa,
            z_breaks,
            isotropic: false,
            quad: QuadConfig::standard(),
        })
    }
}
