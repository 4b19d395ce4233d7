//! Upper-bound envelopes for `p`, drift-shift comparisons and the spatial
//! convolution inequality, with constants fitted against computed kernels.

use serde::Serialize;

use crate::coefficients::{CoefficientSet, DriftParameters};
use crate::engine::KernelTable;
use crate::error::{Error, Result};
use crate::profile::LevyProfile;
use crate::quadrature::{integrate_to_infinity, integrate_with_breaks, QuadConfig};
use crate::report::VerificationReport;

/// Point whose effective drift shifts the argument of `Υ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DriftAnchor {
    X,
    Y,
}

/// `c t (ϱ̃⁰₀ + Σ_j ϱ̃^{s_j−1}_{ε_j})` as a list of `(γ, β)` exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSpec {
    pub drift_anchor: DriftAnchor,
    /// `(0, 0)` first, then `(s_j − 1, ε_j)` for `j = 0..=N` with `(ε_0, s_0) = (ε_κ, 1)`.
    pub terms: Vec<(f64, f64)>,
    pub eta: f64,
    pub scale: f64,
    pub eps0: f64,
}

impl EnvelopeSpec {
    pub fn new(coeffs: &CoefficientSet, params: &DriftParameters, eps0: f64) -> Result<Self> {
        let alpha = coeffs
            .profile
            .alpha_h()
            .ok_or_else(|| Error::Assumption("profile has no certified lower scaling index".into()))?;
        let mut terms = vec![(0.0, 0.0), (0.0, coeffs.eps_kappa)];
        terms.extend(params.pairs.iter().map(|&(e, s)| (s - 1.0, e)));
        Ok(Self { drift_anchor: DriftAnchor::Y, terms, eta: params.eta(alpha, coeffs.eps_kappa), scale: 1.0, eps0 })
    }

    pub fn with_anchor(mut self, a: DriftAnchor) -> Self {
        self.drift_anchor = a;
        self
    }

    pub fn with_scale(mut self, c: f64) -> Self {
        self.scale = c;
        self
    }
}

/// Envelope value at `(t, x, y)`, d = 1.
pub fn pointwise_bound(spec: &EnvelopeSpec, coeffs: &CoefficientSet, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(spec.eta > 0.0) {
        return Err(Error::Assumption(format!("η = {} ≤ 0: the pointwise bound does not apply", spec.eta)));
    }
    let prof = &coeffs.profile;
    let t0 = prof.t0()?;
    if !(t > 0.0 && t <= t0 * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("t = {t} outside (0, t0 = {t0}]")));
    }
    let rt = prof.r_t(t)?;
    let anchor = match spec.drift_anchor {
        DriftAnchor::X => x,
        DriftAnchor::Y => y,
    };
    let b = coeffs.effective_drift(&[anchor], rt)?[0];
    let d = (y - x).abs();
    let shifted = (y - x - t * b).abs();
    let mut s = 0.0;
    for &(g, be) in &spec.terms {
        s += prof.rho_with_rt(g, be, t, rt, d, shifted)?;
    }
    Ok(spec.scale * t * s)
}

/// The closed display for the first catalog example:
/// `(1 + t^{s−1}(|y−x|^{1/2} ∧ 1)) (t⁻¹ ∧ t / |y − x − t b^y_{r_t}|²)`.
pub fn ex1_display_shape(coeffs: &CoefficientSet, s: f64, t: f64, x: f64, y: f64) -> Result<f64> {
    let rt = coeffs.profile.r_t(t)?;
    let b = coeffs.effective_drift(&[y], rt)?[0];
    let v = y - x - t * b;
    let hol = (y - x).abs().sqrt().min(1.0);
    let core = if v == 0.0 { 1.0 / t } else { (1.0 / t).min(t / (v * v)) };
    Ok((1.0 + t.powf(s - 1.0) * hol) * core)
}

/// Fitted envelope constant of a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub c: f64,
    /// `(t, x, y)` of the largest ratio.
    pub argmax: (f64, f64, f64),
    /// Entries where the bound vanishes while `p > tol`.
    pub violations: usize,
    pub eps0: f64,
}

impl EnvelopeFit {
    pub fn to_jsonl(&self, name: &str) -> String {
        let v = serde_json::json!({
            "record": "envelope",
            "check": name,
            "c": self.c,
            "argmax": [self.argmax.0, self.argmax.1, self.argmax.2],
            "violations": self.violations,
            "eps0": self.eps0,
        });
        format!("{v}\n")
    }
}

/// `c = max p / bound` over the core entries of a `p` table, bound at cell centres.
pub fn fit_envelope(table: &KernelTable, spec: &EnvelopeSpec, coeffs: &CoefficientSet, tol: f64) -> Result<EnvelopeFit> {
    let unit = spec.clone().with_scale(1.0);
    fit_with(table, spec.eps0, tol, |t, x, y| pointwise_bound(&unit, coeffs, t, x, y))
}

/// `c = max p / g` over the core entries for an arbitrary shape `g`.
pub fn fit_with<G: FnMut(f64, f64, f64) -> Result<f64>>(
    table: &KernelTable,
    eps0: f64,
    tol: f64,
    mut g: G,
) -> Result<EnvelopeFit> {
    let n = table.grid.n;
    let mut best = EnvelopeFit { c: 0.0, argmax: (0.0, 0.0, 0.0), violations: 0, eps0 };
    for (ti, &t) in table.t_grid.iter().enumerate() {
        for i in 0..n {
            let x = table.grid.center(i);
            for j in 0..n {
                let y = table.grid.center(j);
                let p = table.value(ti, i, j);
                let b = g(t, x, y)?;
                if b <= 0.0 {
                    if p > tol {
                        best.violations += 1;
                    }
                    continue;
                }
                let r = p / b;
                if r > best.c {
                    best.c = r;
                    best.argmax = (t, x, y);
                }
            }
        }
    }
    if best.violations > 0 {
        return Err(Error::Assumption(format!("{} entries exceed tol where the envelope vanishes", best.violations)));
    }
    Ok(best)
}

/// `∫ (|w|^β ∧ 1) t⁻¹ Υ_t(w − shift) dw` in d = 1.
pub fn rho_mass(profile: &LevyProfile, t: f64, beta: f64, shift: f64) -> Result<f64> {
    let rt = profile.r_t(t)?;
    let cfg = QuadConfig::new(1e-14, 1e-11, 4000);
    let mut err = None;
    let mut f = |w: f64| -> f64 {
        let hol = if beta == 0.0 { 1.0 } else { w.abs().powf(beta).min(1.0) };
        match profile.upsilon_with_rt(t, rt, (w - shift).abs()) {
            Ok(u) => hol * u / t,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let reach = shift.abs() + 1.0 + 100.0 * rt;
    let mut breaks = vec![0.0, -1.0, 1.0, shift];
    for k in [1.0, 3.0, 10.0, 30.0] {
        breaks.push(shift - k * rt);
        breaks.push(shift + k * rt);
    }
    let mid = integrate_with_breaks(&mut f, -reach, reach, &breaks, &cfg)?.value;
    let right = integrate_to_infinity(&mut f, reach, &[], &cfg)?.value;
    let left = integrate_to_infinity(|w| f(-w), reach, &[], &cfg)?.value;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(mid + right + left)
}

/// `∫ ϱ^0_β(t, x, z) dz ≤ c₁/(α_h − β₀) t⁻¹ r_t^{β₀ ∧ σβ}` on `t_grid` with fitted `c₁`.
pub fn check_conv_lemma_a(
    profile: &LevyProfile,
    coeffs: &CoefficientSet,
    params: &DriftParameters,
    beta0: f64,
    beta: f64,
    t_grid: &[f64],
    x: f64,
) -> Result<VerificationReport> {
    let alpha = profile.alpha_h().ok_or_else(|| Error::Assumption("profile has no certified α_h".into()))?;
    if !(0.0..alpha).contains(&beta0) || !(0.0..=2.0).contains(&beta) {
        return Err(Error::Domain(format!("need β₀ ∈ [0, α_h) and β ∈ [0, 2], got ({beta0}, {beta})")));
    }
    let mut rep = VerificationReport::new("conv_lemma_a");
    let expo = beta0.min(params.sigma * beta);
    for &t in t_grid {
        let rt = profile.r_t(t)?;
        let shift = t * coeffs.effective_drift(&[x], rt)?[0];
        let lhs = rho_mass(profile, t, beta, shift)?;
        let rhs = rt.powf(expo) / ((alpha - beta0) * t);
        rep.push(vec![t, beta0, beta], lhs, rhs);
    }
    let c1 = rep.max_ratio();
    rep.fit("c1", c1);
    rep.pass = c1.is_finite();
    Ok(rep)
}

/// `Υ_t(y−x−t b^y_{r_t}) ≤ c Υ_t(y−x−t b^x_{r_t})` over samples, fitted `c`.
pub fn check_drift_swap(coeffs: &CoefficientSet, samples: &[(f64, f64, f64)]) -> Result<VerificationReport> {
    let prof = &coeffs.profile;
    let mut rep = VerificationReport::new("drift_swap");
    for &(t, x, y) in samples {
        let rt = prof.r_t(t)?;
        let by = coeffs.effective_drift(&[y], rt)?[0];
        let bx = coeffs.effective_drift(&[x], rt)?[0];
        let lhs = prof.upsilon_with_rt(t, rt, (y - x - t * by).abs())?;
        let rhs = prof.upsilon_with_rt(t, rt, (y - x - t * bx).abs())?;
        rep.push(vec![t, x, y], lhs, rhs);
    }
    let c = rep.max_ratio();
    rep.fit("c", c);
    rep.pass = c.is_finite();
    Ok(rep)
}

/// `Υ_t(y−x−(t−s)b^x_{r_{t−s}}−s b^y_{r_s}) ≤ c Υ_t(y−x−t b^y_{r_t})` over samples `(s, t, x, y)`.
pub fn check_composite_shift(coeffs: &CoefficientSet, samples: &[(f64, f64, f64, f64)]) -> Result<VerificationReport> {
    let prof = &coeffs.profile;
    let mut rep = VerificationReport::new("composite_shift");
    for &(s, t, x, y) in samples {
        if !(0.0 < s && s < t) {
            return Err(Error::Domain(format!("need 0 < s < t, got s = {s}, t = {t}")));
        }
        let rt = prof.r_t(t)?;
        let bx = coeffs.effective_drift(&[x], prof.r_t(t - s)?)?[0];
        let bys = coeffs.effective_drift(&[y], prof.r_t(s)?)?[0];
        let byt = coeffs.effective_drift(&[y], rt)?[0];
        let lhs = prof.upsilon_with_rt(t, rt, (y - x - (t - s) * bx - s * bys).abs())?;
        let rhs = prof.upsilon_with_rt(t, rt, (y - x - t * byt).abs())?;
        rep.push(vec![s, t, x, y], lhs, rhs);
    }
    let c = rep.max_ratio();
    rep.fit("c", c);
    rep.pass = c.is_finite();
    Ok(rep)
}

/// Sample `(t, x, y)` triples on a product grid.
pub fn sample_triples(ts: &[f64], xs: &[f64], offsets: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for &t in ts {
        for &x in xs {
            for &o in offsets {
                out.push((t, x, x + o));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::example_catalog;

    fn ex1() -> (CoefficientSet, DriftParameters) {
        example_catalog("ex1").unwrap()
    }

    #[test]
    fn eta_and_terms() {
        let (c, p) = ex1();
        let s = EnvelopeSpec::new(&c, &p, 0.1).unwrap();
        // 2 min{1/2 ∧ 0.45 + 0, 1/2 ∧ 0.45 + 0.9 − 1}
        assert!((s.eta - 0.7).abs() < 1e-12);
        assert_eq!(s.terms.len(), 3);
        assert_eq!(s.terms[0], (0.0, 0.0));
    }

    #[test]
    fn bound_is_linear_in_scale() {
        let (c, p) = ex1();
        let s = EnvelopeSpec::new(&c, &p, 0.1).unwrap();
        let a = pointwise_bound(&s, &c, 0.05, 0.25, 0.75).unwrap();
        let b = pointwise_bound(&s.clone().with_scale(3.0), &c, 0.05, 0.25, 0.75).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn collapses_to_upsilon_when_all_s_are_one() {
        let (c, _) = example_catalog("kappa-product").unwrap();
        let p = DriftParameters::new(1.0, vec![(0.5, 1.0)], crate::coefficients::Variant::AStar);
        let s = EnvelopeSpec::new(&c, &p, 0.1).unwrap();
        for &(t, x, y) in &sample_triples(&[0.01, 0.1], &[-0.3, 0.4], &[0.0, 0.05, 2.0]) {
            let rt = c.profile.r_t(t).unwrap();
            let b = c.effective_drift(&[y], rt).unwrap()[0];
            let u = c.profile.upsilon_with_rt(t, rt, (y - x - t * b).abs()).unwrap();
            let v = pointwise_bound(&s, &c, t, x, y).unwrap();
            // 1 + 2(|y−x|^{1/2} ∧ 1) ∈ [1, 3]
            assert!(v >= u * (1.0 - 1e-12) && v <= 3.0 * u * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ex1_display_is_equivalent() {
        let (c, p) = ex1();
        let s = EnvelopeSpec::new(&c, &p, 0.1).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &(t, x, y) in &sample_triples(&[0.001, 0.01, 0.1, 0.25], &[-1.0, 0.1, 0.5, 2.0], &[-3.0, -0.2, 0.0, 0.01, 0.3, 5.0]) {
            let r = pointwise_bound(&s, &c, t, x, y).unwrap() / ex1_display_shape(&c, 0.9, t, x, y).unwrap();
            lo = lo.min(r);
            hi = hi.max(r);
        }
        assert!(lo > 0.05 && hi < 20.0, "{lo} {hi}");
    }

    #[test]
    fn conv_lemma_closed_form() {
        let (c, p) = example_catalog("cauchy-const").unwrap();
        // ν = r⁻²: Υ_t = min(1/(4t), 2t/w²), ∫ Υ_t = 2√2
        for t in [0.01, 0.1, 0.25] {
            let m = rho_mass(&c.profile, t, 0.0, 0.0).unwrap();
            assert!((m * t - 2.0 * 2f64.sqrt()).abs() < 1e-6, "{m}");
        }
        let rep = check_conv_lemma_a(&c.profile, &c, &p, 0.0, 0.0, &[0.01, 0.1], 0.0).unwrap();
        assert!((rep.fitted["c1"] - 2.0 * 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn conv_lemma_sweep_bounded() {
        let (c, p) = ex1();
        let mut prev = 0.0;
        for beta0 in [0.0, 0.3, 0.6, 0.9] {
            let rep = check_conv_lemma_a(&c.profile, &c, &p, beta0, 1.0, &[0.001, 0.01, 0.1], 0.5).unwrap();
            let c1 = rep.fitted["c1"];
            assert!(c1.is_finite() && c1 > 0.0);
            prev = c1.max(prev);
        }
        assert!(prev < 100.0);
    }

    #[test]
    fn shifts_have_finite_constants() {
        let (c, _) = ex1();
        let tri = sample_triples(&[0.001, 0.01, 0.1, 0.25], &[-0.5, 0.0, 0.3, 0.9, 2.0], &[-1.0, -0.05, 0.0, 0.05, 1.0]);
        let rep = check_drift_swap(&c, &tri).unwrap();
        assert!(rep.pass && rep.fitted["c"] < 50.0);
        let quads: Vec<(f64, f64, f64, f64)> =
            tri.iter().flat_map(|&(t, x, y)| [0.1, 0.5, 0.9].map(|f| (f * t, t, x, y))).collect();
        let rep = check_composite_shift(&c, &quads).unwrap();
        assert!(rep.pass && rep.fitted["c"] < 50.0);
    }

    #[test]
    fn inapplicable_when_eta_not_positive() {
        let (c, p) = ex1();
        let mut s = EnvelopeSpec::new(&c, &p, 0.1).unwrap();
        s.eta = 0.0;
        assert!(matches!(pointwise_bound(&s, &c, 0.1, 0.0, 0.0), Err(Error::Assumption(_))));
    }
}
