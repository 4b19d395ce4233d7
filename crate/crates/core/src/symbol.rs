//! Lévy exponents of frozen operators.
//!
//! For a jump density `m` the exponent is
//! `Φ_m(ξ) = ∫ (1 − e^{i⟨ξ,z⟩} + i⟨ξ,z⟩1_{|z|<1}) m(z) dz`, and the frozen
//! symbol is `Ψ_w(ξ) = −i⟨ξ,b(w)⟩ + Φ_{κ(w,·)J}(ξ)`. In d = 1 the integral is
//! folded onto `s = |z| > 0`; in d = 2 only isotropic densities are handled,
//! through `2π ∫ s m(s) (1 − J₀(|ξ|s)) ds`.

use crate::coefficients::{CoefficientSet, PointFn};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, wynn_epsilon, QuadConfig, QuadResult};
use crate::special::{one_minus_cos, one_minus_j0, sin_minus_id, bessel_j0};
use crate::spline::UniformSpline;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

type Radial = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Direct half-period panels before switching to extrapolated tails.
const DIRECT_PANELS: usize = 4000;
/// Extra panels allowed for the extrapolated tail.
const TAIL_PANELS: usize = 400;
/// Log-width of the inner and outer non-oscillatory regions.
const LOG_SPAN: f64 = 100.0;

/// A jump density seen from the origin: `m(s)` and `m(−s)` for `s > 0` in
/// d = 1, or the radial profile in d = 2.
#[derive(Clone)]
pub struct JumpMeasure {
    dim: usize,
    plus: Radial,
    minus: Radial,
    breaks: Vec<f64>,
    support: f64,
}

impl std::fmt::Debug for JumpMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpMeasure")
            .field("dim", &self.dim)
            .field("breaks", &self.breaks.len())
            .field("support", &self.support)
            .finish()
    }
}

impl JumpMeasure {
    /// Wraps a density `m(z)` on ℝ^d with the break structure of `coeffs`.
    pub fn new(coeffs: &CoefficientSet, m: PointFn) -> Result<Self> {
        let dim = coeffs.dim();
        let mut breaks: Vec<f64> = coeffs
            .z_breaks
            .iter()
            .map(|b| b.abs())
            .chain(coeffs.profile.breakpoints().iter().copied())
            .filter(|b| *b > 0.0 && b.is_finite())
            .collect();
        let support = coeffs.profile.support_max();
        if support.is_finite() {
            breaks.push(support);
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let (plus, minus): (Radial, Radial) = match dim {
            1 => {
                let (mp, mm) = (m.clone(), m);
                (Arc::new(move |s| mp(&[s])), Arc::new(move |s| mm(&[-s])))
            }
            2 => {
                if !coeffs.isotropic {
                    return Err(Error::Unsupported("anisotropic jump densities in d = 2".into()));
                }
                let mp = m;
                let r: Radial = Arc::new(move |s| mp(&[s, 0.0]));
                (r.clone(), r)
            }
            d => return Err(Error::Unsupported(format!("dimension {d}"))),
        };
        Ok(Self { dim, plus, minus, breaks, support })
    }

    /// Density `k_r(z) J(z)` of separable term `r`.
    pub fn term(coeffs: &CoefficientSet, r: usize) -> Result<Self> {
        let terms = coeffs
            .separable_terms()
            .ok_or_else(|| Error::Invalid("coefficient set is not separable".into()))?;
        let t = terms.get(r).ok_or_else(|| Error::Invalid(format!("no separable term {r}")))?.clone();
        let jump = coeffs.jump.clone();
        Self::new(coeffs, Arc::new(move |z: &[f64]| (t.k)(z) * jump(z)))
    }

    /// Density `κ(w, z) J(z)` of the operator frozen at `w`.
    pub fn frozen(coeffs: &CoefficientSet, w: &[f64]) -> Result<Self> {
        let c = coeffs.clone();
        let w = w.to_vec();
        Self::new(coeffs, Arc::new(move |z: &[f64]| c.kappa(&w, z) * c.j(z)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn plus(&self, s: f64) -> f64 {
        if s > self.support {
            0.0
        } else {
            (self.plus)(s)
        }
    }

    pub fn minus(&self, s: f64) -> f64 {
        if s > self.support {
            0.0
        } else {
            (self.minus)(s)
        }
    }

    fn log_breaks(&self, extra: &[f64]) -> Vec<f64> {
        self.breaks.iter().chain(extra).filter(|b| **b > 0.0).map(|b| b.ln()).collect()
    }

    /// `∫_{s_lo}^{s_hi} s^k g(s) ds` in the variable `v = ln s`.
    fn log_integral<G: Fn(f64) -> f64>(&self, g: G, s_lo: f64, s_hi: f64, k: i32, cfg: &QuadConfig) -> Result<QuadResult> {
        if !(s_hi > s_lo) {
            return Ok(QuadResult::zero());
        }
        let br = self.log_breaks(&[1.0]);
        integrate_with_breaks(
            |v| {
                let s = v.exp();
                let y = s.powi(k + 1) * g(s);
                if y.is_finite() {
                    y
                } else {
                    0.0
                }
            },
            s_lo.ln(),
            s_hi.ln(),
            &br,
            cfg,
        )
    }

    /// `Φ(ξ)` for `ξ ≥ 0` in d = 1, or `Φ` at `|ξ| = xi` in d = 2, with an
    /// absolute error estimate.
    pub fn exponent(&self, xi: f64, cfg: &QuadConfig) -> Result<(Complex64, f64)> {
        if xi == 0.0 {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        if xi < 0.0 {
            let (v, e) = self.exponent(-xi, cfg)?;
            return Ok((v.conj(), e));
        }
        match self.dim {
            1 => self.exponent_1d(xi, cfg),
            _ => self.exponent_radial(xi, cfg),
        }
    }

    fn exponent_1d(&self, xi: f64, cfg: &QuadConfig) -> Result<(Complex64, f64)> {
        let hp = PI / xi;
        let s_a = hp.min(self.support);
        let s_lo = (s_a.ln() - LOG_SPAN).max(-700.0).exp();
        let mp = |s: f64| self.plus(s) + self.minus(s);
        let mm = |s: f64| self.plus(s) - self.minus(s);

        let re_a = self.log_integral(|s| one_minus_cos(xi * s) * mp(s), s_lo, s_a, 0, cfg)?;
        let im_a = self.log_integral(
            |s| {
                let u = xi * s;
                let g = if s < 1.0 { sin_minus_id(u) } else { u.sin() };
                g * mm(s)
            },
            s_lo,
            s_a,
            0,
            cfg,
        )?;
        let mut re = re_a.value;
        let mut im = im_a.value;
        let mut err = re_a.abs_err + im_a.abs_err;
        if s_a < self.support {
            let s_hi = self.support.min((s_a.ln() + LOG_SPAN).exp());
            let n_plus = self.log_integral(mp, s_a, s_hi, 0, cfg)?;
            let i_c = self.oscillatory(|s| (xi * s).cos() * mp(s), s_a, hp, cfg)?;
            let i_s = self.oscillatory(|s| (xi * s).sin() * mm(s), s_a, hp, cfg)?;
            re += n_plus.value - i_c.value;
            im += i_s.value;
            err += n_plus.abs_err + i_c.abs_err + i_s.abs_err;
            if s_a < 1.0 {
                let lin = self.log_integral(mm, s_a, 1.0f64.min(self.support), 1, cfg)?;
                im -= xi * lin.value;
                err += xi * lin.abs_err;
            }
        }
        Ok((Complex64::new(re, -im), err))
    }

    fn exponent_radial(&self, xi: f64, cfg: &QuadConfig) -> Result<(Complex64, f64)> {
        let hp = PI / xi;
        let s_a = hp.min(self.support);
        let s_lo = (s_a.ln() - LOG_SPAN).max(-700.0).exp();
        let m = |s: f64| self.plus(s);
        let inner = self.log_integral(|s| one_minus_j0(xi * s) * m(s), s_lo, s_a, 1, cfg)?;
        let mut re = inner.value;
        let mut err = inner.abs_err;
        if s_a < self.support {
            let s_hi = self.support.min((s_a.ln() + LOG_SPAN).exp());
            let mass = self.log_integral(m, s_a, s_hi, 1, cfg)?;
            let osc = self.oscillatory(|s| s * m(s) * bessel_j0(xi * s), s_a, hp, cfg)?;
            re += mass.value - osc.value;
            err += mass.abs_err + osc.abs_err;
        }
        let w = 2.0 * PI;
        Ok((Complex64::new(w * re, 0.0), w * err))
    }

    /// `∫_a^{support} f` for an integrand oscillating with half-period `hp`.
    ///
    /// Panels of one half-period are summed directly up to the last break
    /// (within a panel budget); the remainder is extrapolated with Wynn's
    /// epsilon algorithm.
    fn oscillatory<F: Fn(f64) -> f64>(&self, f: F, a: f64, hp: f64, cfg: &QuadConfig) -> Result<QuadResult> {
        let panel_cfg = QuadConfig::new(cfg.abs_tol * 1e-2, cfg.rel_tol, 200);
        let end = self.support;
        let last_break = self.breaks.iter().copied().filter(|b| *b > a && *b < end).fold(a, f64::max);
        let direct = (((last_break - a) / hp).ceil() as usize + 1).min(DIRECT_PANELS);
        let mut acc = 0.0;
        let mut err = 0.0;
        let mut evals = 0;
        let mut k = 0usize;
        let panel = |k: usize| -> Result<Option<QuadResult>> {
            let lo = a + k as f64 * hp;
            if lo >= end {
                return Ok(None);
            }
            let hi = (lo + hp).min(end);
            let br: Vec<f64> = self.breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
            integrate_with_breaks(&f, lo, hi, &br, &panel_cfg).map(Some)
        };
        while k < direct {
            match panel(k)? {
                Some(r) => {
                    acc += r.value;
                    err += r.abs_err;
                    evals += r.evaluations;
                }
                None => return Ok(QuadResult { value: acc, abs_err: err, evaluations: evals }),
            }
            k += 1;
        }
        let mut partial = vec![acc];
        let mut last_est = f64::NAN;
        let mut stable = 0;
        for _ in 0..TAIL_PANELS {
            match panel(k)? {
                Some(r) => {
                    acc += r.value;
                    err += r.abs_err;
                    evals += r.evaluations;
                    partial.push(acc);
                }
                None => return Ok(QuadResult { value: acc, abs_err: err, evaluations: evals }),
            }
            k += 1;
            if partial.len() >= 6 {
                let tail = &partial[partial.len().saturating_sub(24)..];
                let est = wynn_epsilon(tail);
                let tol = cfg.abs_tol.max(cfg.rel_tol * est.abs());
                if (est - last_est).abs() <= tol {
                    stable += 1;
                    if stable >= 2 {
                        return Ok(QuadResult { value: est, abs_err: err + (est - last_est).abs(), evaluations: evals });
                    }
                } else {
                    stable = 0;
                }
                last_est = est;
            }
        }
        let n = partial.len();
        let avg = 0.5 * (partial[n - 1] + partial[n - 2]);
        Ok(QuadResult { value: avg, abs_err: err + (partial[n - 1] - partial[n - 2]).abs(), evaluations: evals })
    }
}

/// Spline representation of an exponent over `|ξ| ∈ [10^{lo}, 10^{hi}]`:
/// `ln Re Φ` and `Im Φ / ξ` against `ln ξ`, linear outside.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    log_re: UniformSpline,
    im_over: UniformSpline,
    max_err: f64,
    xi_min: f64,
    xi_max: f64,
}

impl SymbolTable {
    pub const NODES_PER_DECADE: usize = 32;
    pub const LOG10_MIN: f64 = -6.0;
    pub const LOG10_MAX: f64 = 6.0;

    pub fn build(measure: &JumpMeasure, cfg: &QuadConfig) -> Result<Self> {
        let decades = Self::LOG10_MAX - Self::LOG10_MIN;
        let n = (decades as usize) * Self::NODES_PER_DECADE + 1;
        let h = std::f64::consts::LN_10 / Self::NODES_PER_DECADE as f64;
        let v0 = Self::LOG10_MIN * std::f64::consts::LN_10;
        let mut lr = Vec::with_capacity(n);
        let mut io = Vec::with_capacity(n);
        let mut max_err: f64 = 0.0;
        for i in 0..n {
            let xi = (v0 + h * i as f64).exp();
            let (phi, e) = measure.exponent(xi, cfg)?;
            if !(phi.re > 0.0) {
                return Err(Error::Domain(format!("non-positive real exponent {} at ξ = {xi}", phi.re)));
            }
            lr.push(phi.re.ln());
            io.push(phi.im / xi);
            max_err = max_err.max(e / phi.norm());
        }
        Ok(Self {
            log_re: UniformSpline::new(v0, h, lr),
            im_over: UniformSpline::new(v0, h, io),
            max_err,
            xi_min: 10f64.powf(Self::LOG10_MIN),
            xi_max: 10f64.powf(Self::LOG10_MAX),
        })
    }

    /// Exponent at a scalar frequency (d = 1) or at `|ξ|` (d = 2).
    pub fn eval(&self, xi: f64) -> Complex64 {
        if xi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let a = xi.abs();
        let v = a.ln();
        let z = Complex64::new(self.log_re.eval(v).exp(), self.im_over.eval(v) * a);
        if xi < 0.0 {
            z.conj()
        } else {
            z
        }
    }

    /// Largest relative quadrature error over the nodes.
    pub fn max_rel_err(&self) -> f64 {
        self.max_err
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xi_min, self.xi_max)
    }
}

/// Exponent tables of every separable term of a coefficient set.
#[derive(Debug)]
pub struct SymbolBank {
    coeffs: Arc<CoefficientSet>,
    measures: Vec<JumpMeasure>,
    tables: Vec<SymbolTable>,
}

impl SymbolBank {
    pub fn build(coeffs: Arc<CoefficientSet>) -> Result<Arc<Self>> {
        let n = coeffs
            .separable_terms()
            .ok_or_else(|| Error::Unsupported("symbol bank needs a separable κ".into()))?
            .len();
        let mut measures = Vec::with_capacity(n);
        let mut tables = Vec::with_capacity(n);
        for r in 0..n {
            let m = JumpMeasure::term(&coeffs, r)?;
            tables.push(SymbolTable::build(&m, &coeffs.quad)?);
            measures.push(m);
        }
        Ok(Arc::new(Self { coeffs, measures, tables }))
    }

    pub fn coeffs(&self) -> &Arc<CoefficientSet> {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn table(&self, r: usize) -> &SymbolTable {
        &self.tables[r]
    }

    pub fn measure(&self, r: usize) -> &JumpMeasure {
        &self.measures[r]
    }
}

#[derive(Debug, Clone)]
enum Parts {
    Separable { weights: Vec<f64>, bank: Arc<SymbolBank> },
    General { measure: JumpMeasure, table: Arc<SymbolTable> },
}

/// Symbol `Ψ_w` of the operator with coefficients frozen at `w`.
#[derive(Debug, Clone)]
pub struct FrozenSymbol {
    coeffs: Arc<CoefficientSet>,
    w: Vec<f64>,
    /// Largest admissible Fourier truncation radius.
    pub cutoff: f64,
    /// Lower scaling index used for the truncation radius.
    pub decay_alpha: f64,
    drift: Vec<f64>,
    parts: Parts,
    c_lo: f64,
}

impl FrozenSymbol {
    pub const DEFAULT_CUTOFF: f64 = 1e6;

    /// Symbol at `w`; separable sets share the exponent tables of `bank`.
    pub fn from_bank(bank: &Arc<SymbolBank>, w: &[f64]) -> Result<Self> {
        let coeffs = bank.coeffs.clone();
        check_dim(&coeffs, w)?;
        let terms = coeffs.separable_terms().expect("bank sets are separable");
        let weights = terms.iter().map(|t| (t.a)(w)).collect();
        Self::finish(coeffs, w, Parts::Separable { weights, bank: bank.clone() })
    }

    /// Symbol at `w`, building whatever tables are needed.
    pub fn new(coeffs: Arc<CoefficientSet>, w: &[f64]) -> Result<Self> {
        check_dim(&coeffs, w)?;
        if coeffs.separable_terms().is_some() {
            let bank = SymbolBank::build(coeffs)?;
            Self::from_bank(&bank, w)
        } else {
            let measure = JumpMeasure::frozen(&coeffs, w)?;
            let table = Arc::new(SymbolTable::build(&measure, &coeffs.quad)?);
            Self::finish(coeffs, w, Parts::General { measure, table })
        }
    }

    fn finish(coeffs: Arc<CoefficientSet>, w: &[f64], parts: Parts) -> Result<Self> {
        let decay_alpha = coeffs
            .profile
            .alpha_h()
            .ok_or_else(|| Error::Assumption("profile has no certified lower scaling index".into()))?;
        let drift = coeffs.b(w);
        let mut s = Self { coeffs, w: w.to_vec(), cutoff: Self::DEFAULT_CUTOFF, decay_alpha, drift, parts, c_lo: 0.0 };
        s.c_lo = s.estimate_c_lo();
        if !(s.c_lo > 0.0) {
            return Err(Error::Domain("symbol has no positive lower growth constant".into()));
        }
        Ok(s)
    }

    /// `min Re Ψ_w(ξ)/|ξ|^{α_h}` sampled on `|ξ| ∈ [1, 10³]`.
    fn estimate_c_lo(&self) -> f64 {
        (0..=30)
            .map(|i| {
                let xi = 10f64.powf(i as f64 / 10.0);
                self.radial_re(xi) / xi.powf(self.decay_alpha)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn coeffs(&self) -> &Arc<CoefficientSet> {
        &self.coeffs
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// External drift `b(w)`.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn c_lo(&self) -> f64 {
        self.c_lo
    }

    /// Jump part `Φ(ξ)` from the tables, scalar ξ in d = 1 or `|ξ|` in d = 2.
    pub fn jump_part(&self, xi: f64) -> Complex64 {
        match &self.parts {
            Parts::Separable { weights, bank } => {
                weights.iter().zip(&bank.tables).map(|(a, t)| *a * t.eval(xi)).sum()
            }
            Parts::General { table, .. } => table.eval(xi),
        }
    }

    /// Exponent of each separable term at a scalar frequency.
    pub fn term_parts(&self, xi: f64) -> Option<Vec<Complex64>> {
        match &self.parts {
            Parts::Separable { bank, .. } => Some(bank.tables.iter().map(|t| t.eval(xi)).collect()),
            Parts::General { .. } => None,
        }
    }

    fn radial_re(&self, xi: f64) -> f64 {
        self.jump_part(xi).re
    }

    /// Tabulated `Ψ_w(ξ)` at a scalar frequency in d = 1.
    pub fn psi_1d(&self, xi: f64) -> Complex64 {
        self.jump_part(xi) - Complex64::new(0.0, xi * self.drift[0])
    }

    /// Tabulated `Ψ_w(ξ)`.
    pub fn psi(&self, xi: &[f64]) -> Complex64 {
        if self.dim() == 1 {
            return self.psi_1d(xi[0]);
        }
        let n = crate::profile::norm(xi);
        let dot: f64 = xi.iter().zip(&self.drift).map(|(a, b)| a * b).sum();
        self.jump_part(n) - Complex64::new(0.0, dot)
    }

    /// Truncation radius with `t Re Ψ_w(R) ≥ ln(1/tol)`.
    pub fn truncation_radius(&self, t: f64, tol: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("truncation radius needs t > 0, got {t}")));
        }
        let target = (1.0 / tol).ln();
        let mut r = (target / (self.c_lo * t)).powf(1.0 / self.decay_alpha).max(1.0);
        while t * self.radial_re(r) < target {
            r *= 1.25;
            if r > self.cutoff {
                break;
            }
        }
        if r > self.cutoff {
            return Err(Error::Resolution(format!(
                "Fourier truncation radius {r:.3e} exceeds cap {:.3e} at t = {t}",
                self.cutoff
            )));
        }
        Ok(r)
    }
}

fn check_dim(coeffs: &CoefficientSet, w: &[f64]) -> Result<()> {
    if w.len() != coeffs.dim() {
        return Err(Error::Invalid(format!("point of dimension {} for a set in dimension {}", w.len(), coeffs.dim())));
    }
    Ok(())
}

/// `Ψ_w(ξ)` by direct quadrature, without tables.
pub fn symbol_eval(sym: &FrozenSymbol, xi: &[f64]) -> Result<Complex64> {
    if xi.len() != sym.dim() {
        return Err(Error::Invalid("frequency of wrong dimension".into()));
    }
    let cfg = sym.coeffs.quad;
    let arg = if sym.dim() == 1 { xi[0] } else { crate::profile::norm(xi) };
    let jump = match &sym.parts {
        Parts::Separable { weights, bank } => {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, m) in weights.iter().zip(&bank.measures) {
                if *a != 0.0 {
                    acc += *a * m.exponent(arg, &cfg)?.0;
                }
            }
            acc
        }
        Parts::General { measure, .. } => measure.exponent(arg, &cfg)?.0,
    };
    let dot: f64 = xi.iter().zip(&sym.drift).map(|(a, b)| a * b).sum();
    Ok(jump - Complex64::new(0.0, dot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::example_catalog;
    use crate::special::EULER_GAMMA;

    fn ex1_closed(kp: f64, km: f64, xi: f64) -> Complex64 {
        let a = xi.abs();
        Complex64::new((kp + km) * 0.5 * PI * a, -(kp - km) * xi * (1.0 - EULER_GAMMA - a.ln()))
    }

    #[test]
    fn cauchy_symbol_is_pi() {
        let (set, _) = example_catalog("cauchy-const").unwrap();
        let sym = FrozenSymbol::new(Arc::new(set), &[0.0]).unwrap();
        let v = symbol_eval(&sym, &[1.0]).unwrap();
        assert!((v.re - PI).abs() < 1e-8 && v.im.abs() < 1e-8, "{v}");
        assert_eq!(symbol_eval(&sym, &[0.0]).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn ex1_term_matches_closed_form() {
        let (set, _) = example_catalog("ex1").unwrap();
        let m = JumpMeasure::term(&set, 0).unwrap();
        let table = SymbolTable::build(&m, &set.quad).unwrap();
        for &xi in &[1e-5, 3e-3, 0.7, 1.0, 13.0, 950.0, 4e4, 5e5] {
            let exact = ex1_closed(1.5, 0.5, xi);
            let (direct, _) = m.exponent(xi, &set.quad).unwrap();
            assert!((direct - exact).norm() <= 1e-7 * exact.norm(), "direct {xi}: {direct} vs {exact}");
            let tab = table.eval(xi);
            assert!((tab - exact).norm() <= 1e-6 * exact.norm(), "table {xi}: {tab} vs {exact}");
            assert!((table.eval(-xi) - exact.conj()).norm() <= 1e-6 * exact.norm());
        }
    }

    #[test]
    fn frozen_weights_scale_terms() {
        let (set, _) = example_catalog("ex1").unwrap();
        let set = Arc::new(set);
        let sym = FrozenSymbol::new(set, &[0.25]).unwrap();
        let xi = 2.0;
        let exact = 1.5 * ex1_closed(1.5, 0.5, xi);
        assert!((sym.psi_1d(xi) - exact).norm() < 1e-6 * exact.norm());
        let direct = symbol_eval(&sym, &[xi]).unwrap();
        assert!((direct - exact).norm() < 1e-7 * exact.norm());
    }

    #[test]
    fn cauchy_2d_symbol() {
        let (set, _) = example_catalog("cauchy-2d").unwrap();
        let sym = FrozenSymbol::new(Arc::new(set), &[0.0, 0.0]).unwrap();
        for &r in &[0.01, 1.0, 30.0] {
            let xi = [0.6 * r, 0.8 * r];
            let v = symbol_eval(&sym, &xi).unwrap();
            assert!((v.re - 2.0 * PI * r).abs() < 1e-6 * r, "{r}: {v}");
            assert!((sym.psi(&xi).re - 2.0 * PI * r).abs() < 1e-5 * r);
        }
    }

    #[test]
    fn truncation_radius_meets_target() {
        let (set, _) = example_catalog("cauchy-const").unwrap();
        let sym = FrozenSymbol::new(Arc::new(set), &[0.0]).unwrap();
        let r = sym.truncation_radius(0.05, 1e-12).unwrap();
        assert!(0.05 * sym.psi_1d(r).re >= (1e12f64).ln());
        assert!(sym.truncation_radius(1e-9, 1e-12).is_err());
    }

    #[test]
    fn general_kappa_symbol() {
        let (mut set, _) = example_catalog("ex1").unwrap();
        set.kappa = crate::coefficients::Kappa::General(Arc::new(|x: &[f64], z: &[f64]| {
            crate::catalog::ex1_a(x[0]) * crate::catalog::ex1_k(z[0])
        }));
        let sym = FrozenSymbol::new(Arc::new(set), &[0.25]).unwrap();
        let exact = 1.5 * ex1_closed(1.5, 0.5, 3.0);
        assert!((sym.psi_1d(3.0) - exact).norm() < 1e-6 * exact.norm());
    }
}
