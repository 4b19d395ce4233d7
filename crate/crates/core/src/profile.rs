//! Radial Lévy profiles and the scale functions derived from them.
//!
//! For a non-increasing profile ν on (0, ∞) in dimension d:
//!
//! * `h(r) = ∫ (1 ∧ |x|²/r²) ν(|x|) dx`
//! * `K(r) = r⁻² ∫_{|x|<r} |x|² ν(|x|) dx`
//! * `r_t = h⁻¹(1/t)`
//! * `Υ_t(x) = min(r_t^{-d}, t K(|x|) / |x|^d)`
//!
//! All integrals are reduced to one-dimensional radial integrals and computed
//! in the logarithmic variable `v = ln s`.

use crate::error::{Error, Result};
use crate::quadrature::{graded_gauss, integrate_to_infinity, integrate_with_breaks, QuadConfig};
use crate::report::VerificationReport;
use crate::special::{beta, sphere_area};
use std::fmt;
use std::sync::Arc;

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct LevyProfile {
    name: String,
    dim: usize,
    nu: RadialFn,
    breakpoints: Vec<f64>,
    support_max: f64,
    closed_form_h: Option<RadialFn>,
    closed_form_k: Option<RadialFn>,
    alpha_h: Option<f64>,
    beta_h: Option<f64>,
    quad: QuadConfig,
}

impl fmt::Debug for LevyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyProfile")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("alpha_h", &self.alpha_h)
            .field("closed_form", &self.closed_form_h.is_some())
            .finish()
    }
}

impl LevyProfile {
    pub fn new(name: impl Into<String>, dim: usize, nu: RadialFn) -> Self {
        Self {
            name: name.into(),
            dim,
            nu,
            breakpoints: Vec::new(),
            support_max: f64::INFINITY,
            closed_form_h: None,
            closed_form_k: None,
            alpha_h: None,
            beta_h: None,
            quad: QuadConfig::scale_functions(),
        }
    }

    pub fn with_breakpoints(mut self, mut b: Vec<f64>) -> Self {
        b.retain(|x| *x > 0.0 && x.is_finite());
        b.sort_by(|p, q| p.partial_cmp(q).unwrap());
        b.dedup();
        self.breakpoints = b;
        self
    }

    /// Profile vanishes beyond `r_max`.
    pub fn with_support(mut self, r_max: f64) -> Self {
        self.support_max = r_max;
        self
    }

    pub fn with_closed_forms(mut self, h: RadialFn, k: RadialFn) -> Self {
        self.closed_form_h = Some(h);
        self.closed_form_k = Some(k);
        self
    }

    /// Declared scaling indices (lower `alpha_h`, upper `beta_h`).
    pub fn with_scaling(mut self, alpha_h: f64, beta_h: Option<f64>) -> Self {
        self.alpha_h = Some(alpha_h);
        self.beta_h = beta_h;
        self
    }

    pub fn with_quad(mut self, quad: QuadConfig) -> Self {
        self.quad = quad;
        self
    }

    /// Drop closed forms so every value comes from quadrature.
    pub fn without_closed_forms(mut self) -> Self {
        self.closed_form_h = None;
        self.closed_form_k = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self, r: f64) -> f64 {
        if r > self.support_max {
            0.0
        } else {
            (self.nu)(r)
        }
    }

    pub fn nu_fn(&self) -> RadialFn {
        self.nu.clone()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn support_max(&self) -> f64 {
        self.support_max
    }

    pub fn alpha_h(&self) -> Option<f64> {
        self.alpha_h
    }

    pub fn beta_h(&self) -> Option<f64> {
        self.beta_h
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form_h.is_some()
    }

    pub fn quad(&self) -> &QuadConfig {
        &self.quad
    }

    /// `ω_d ∫_a^b s^{p+d-1} ν(s) ds` for `0 ≤ a < b ≤ ∞`.
    pub fn radial_moment(&self, a: f64, b: f64, p: f64) -> Result<f64> {
        let b = b.min(self.support_max);
        if !(b > a) {
            return Ok(0.0);
        }
        let pd = p + self.dim as f64;
        let g = |v: f64| {
            let s = v.exp();
            let nu = self.nu(s);
            if nu == 0.0 {
                0.0
            } else {
                (pd * v).exp() * nu
            }
        };
        let lbreaks: Vec<f64> = self
            .breakpoints
            .iter()
            .filter(|&&x| x > a && x < b)
            .map(|x| x.ln())
            .collect();
        let val = if a <= 0.0 && b.is_infinite() {
            let mid = 0.0f64;
            let lo = self.lower_tail(g, mid, &lbreaks)?;
            let hi = self.upper_tail(g, mid, &lbreaks)?;
            lo + hi
        } else if a <= 0.0 {
            self.lower_tail(g, b.ln(), &lbreaks)?
        } else if b.is_infinite() {
            self.upper_tail(g, a.ln(), &lbreaks)?
        } else {
            integrate_with_breaks(g, a.ln(), b.ln(), &lbreaks, &self.quad)?.value
        };
        Ok(sphere_area(self.dim) * val)
    }

    fn lower_tail<G: Fn(f64) -> f64>(&self, g: G, top: f64, lbreaks: &[f64]) -> Result<f64> {
        let w: Vec<f64> = lbreaks.iter().filter(|&&v| v < top).map(|v| top - v).collect();
        Ok(integrate_to_infinity(|w| g(top - w), 0.0, &w, &self.quad)?.value)
    }

    fn upper_tail<G: Fn(f64) -> f64>(&self, g: G, bottom: f64, lbreaks: &[f64]) -> Result<f64> {
        let w: Vec<f64> = lbreaks.iter().filter(|&&v| v > bottom).map(|v| v - bottom).collect();
        Ok(integrate_to_infinity(|w| g(bottom + w), 0.0, &w, &self.quad)?.value)
    }

    /// `h(r)`; closed form when present.
    pub fn h(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("h requires r > 0, got {r}")));
        }
        if let Some(f) = &self.closed_form_h {
            return Ok(f(r));
        }
        self.h_quadrature(r)
    }

    pub fn h_quadrature(&self, r: f64) -> Result<f64> {
        let inner = self.radial_moment(0.0, r, 2.0)?;
        let outer = self.radial_moment(r, f64::INFINITY, 0.0)?;
        Ok(inner / (r * r) + outer)
    }

    /// `K(r)`; closed form when present.
    pub fn k(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("K requires r > 0, got {r}")));
        }
        if let Some(f) = &self.closed_form_k {
            return Ok(f(r));
        }
        self.k_quadrature(r)
    }

    pub fn k_quadrature(&self, r: f64) -> Result<f64> {
        Ok(self.radial_moment(0.0, r, 2.0)? / (r * r))
    }

    /// Reference horizon `𝔱₀ = 1/h(1)`.
    pub fn t0(&self) -> Result<f64> {
        Ok(1.0 / self.h(1.0)?)
    }

    /// `r_t = h⁻¹(1/t)` by geometric bisection with bracket doubling.
    pub fn r_t(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("r_t requires t > 0, got {t}")));
        }
        let target = 1.0 / t;
        let (mut lo, mut hi) = (1e-2, 1e2);
        let mut guard = 0;
        while self.h(lo)? < target {
            lo *= 0.5;
            guard += 1;
            if guard > 1000 || lo < 1e-300 {
                return Err(Error::Range { target });
            }
        }
        guard = 0;
        while self.h(hi)? > target {
            hi *= 2.0;
            guard += 1;
            if guard > 1000 || hi > 1e300 {
                return Err(Error::Range { target });
            }
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.h(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-13 {
                break;
            }
        }
        Ok((lo * hi).sqrt())
    }

    /// `Υ_t` evaluated from a precomputed `r_t` and the norm `|x|`.
    pub fn upsilon_with_rt(&self, t: f64, rt: f64, norm: f64) -> Result<f64> {
        let d = self.dim as i32;
        let on = rt.powi(-d);
        if norm == 0.0 {
            return Ok(on);
        }
        let off = t * self.k(norm)? / norm.powi(d);
        Ok(on.min(off))
    }

    /// `Υ_t(x)`.
    pub fn upsilon(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let rt = self.r_t(t)?;
        self.upsilon_with_rt(t, rt, norm(x))
    }

    /// `r_t^γ (|x|^β ∧ 1) t⁻¹ Υ_t(x − shift)` for `t ∈ (0, 𝔱₀]`.
    pub fn rho_error(&self, gamma: f64, beta_exp: f64, t: f64, x: &[f64], shift: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(shift)?;
        if !(0.0..=2.0).contains(&beta_exp) {
            return Err(Error::Domain(format!("beta must lie in [0, 2], got {beta_exp}")));
        }
        let t0 = self.t0()?;
        if !(t > 0.0 && t <= t0 * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("t = {t} outside (0, t0 = {t0}]")));
        }
        let rt = self.r_t(t)?;
        self.rho_with_rt(gamma, beta_exp, t, rt, norm(x), diff_norm(x, shift))
    }

    /// ρ from precomputed `r_t`, `|x|` and `|x − shift|`.
    pub fn rho_with_rt(&self, gamma: f64, beta_exp: f64, t: f64, rt: f64, xnorm: f64, shifted: f64) -> Result<f64> {
        let hol = if beta_exp == 0.0 { 1.0 } else { xnorm.powf(beta_exp).min(1.0) };
        if hol == 0.0 {
            return Ok(0.0);
        }
        Ok(rt.powf(gamma) * hol / t * self.upsilon_with_rt(t, rt, shifted)?)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Invalid(format!(
                "point of dimension {} for a profile in dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Checks monotonicity, integrability and closed-form agreement on samples.
    pub fn validate(&self) -> VerificationReport {
        let mut rep = VerificationReport::new("profile_invariants");
        let grid = log_grid(1e-6, 1e3, 200);
        let mut mono = true;
        for w in grid.windows(2) {
            let (a, b) = (self.nu(w[0]), self.nu(w[1]));
            if b > a * (1.0 + 1e-12) + 1e-300 {
                mono = false;
                rep.push(vec![w[0], w[1]], b, a);
            }
        }
        if !mono {
            rep.note("nu is not non-increasing on the sampled grid");
            rep.pass = false;
        }
        match (self.radial_moment(0.0, 1.0, 2.0), self.radial_moment(1.0, f64::INFINITY, 0.0)) {
            (Ok(a), Ok(b)) if (a + b).is_finite() => rep.fit("levy_integral", a + b),
            _ => {
                rep.note("integral of (1 ∧ r²) ν does not converge");
                rep.pass = false;
            }
        }
        if self.closed_form_h.is_some() {
            for &r in &log_grid(1e-3, 1e2, 11) {
                let cf = self.h(r).unwrap_or(f64::NAN);
                let q = self.h_quadrature(r).unwrap_or(f64::NAN);
                let rel = ((cf - q) / q).abs();
                rep.push(vec![r], rel, 1e-8);
                if !(rel <= 1e-8) {
                    rep.pass = false;
                }
            }
        }
        rep
    }

    /// Checks `r_{λt} ≤ √λ r_t` on the product grid.
    pub fn check_condition_r(&self, t_grid: &[f64], lambda_grid: &[f64]) -> Result<VerificationReport> {
        let mut rep = VerificationReport::new("condition_R");
        for &t in t_grid {
            let rt = self.r_t(t)?;
            for &lam in lambda_grid {
                let lhs = self.r_t(lam * t)?;
                let rhs = lam.sqrt() * rt;
                rep.push(vec![t, lam], lhs, rhs);
            }
        }
        let m = rep.max_ratio();
        rep.fit("max_ratio", m);
        rep.tolerance = 1e-9;
        rep.pass = m <= 1.0 + 1e-9;
        Ok(rep)
    }

    /// Checks `∫_{r≤|z|<1} |z| ν(|z|) dz ≤ (2C_h/(1−α_h)) r^{α_h} h(r)` for `α_h < 1`.
    pub fn check_drift_integral(&self, cert: &ScalingCertificate, r_grid: &[f64]) -> Result<VerificationReport> {
        let mut rep = VerificationReport::new("drift_integral_bound");
        if cert.alpha_h >= 1.0 {
            return Err(Error::Domain("the drift integral bound needs alpha_h < 1".into()));
        }
        let c = 2.0 * cert.c_h / (1.0 - cert.alpha_h);
        for &r in r_grid {
            let lhs = self.radial_moment(r, 1.0, 1.0)?;
            let rhs = c * r.powf(cert.alpha_h) * self.h(r)?;
            rep.push(vec![r], lhs, rhs);
        }
        rep.pass = rep.max_ratio() <= 1.0 + 1e-9;
        rep.fit("max_ratio", rep.max_ratio());
        Ok(rep)
    }

    /// Both sides of the time-convolution inequality at one `(t, ε, k)`.
    ///
    /// Returns `(lhs, rhs)` with
    /// `lhs = ∫₀^t (t−s)⁻¹ r_{t−s}^ε s⁻¹ r_s^{kε} ds` and
    /// `rhs = B(ε/2, kε/2) t⁻¹ r_t^{(k+1)ε}`.
    pub fn time_convolution(&self, t: f64, eps: f64, k: f64) -> Result<(f64, f64)> {
        let mut err = None;
        let f = |s: f64| -> f64 {
            let u = t - s;
            if s <= 0.0 || u <= 0.0 {
                return 0.0;
            }
            match (self.r_t(u), self.r_t(s)) {
                (Ok(ru), Ok(rs)) => ru.powf(eps) / u * rs.powf(k * eps) / s,
                (Err(e), _) | (_, Err(e)) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        };
        let lhs = graded_gauss(f, 0.0, t, 0.25, 40, 12);
        if let Some(e) = err {
            return Err(e);
        }
        let rhs = beta(0.5 * eps, 0.5 * k * eps) / t * self.r_t(t)?.powf((k + 1.0) * eps);
        Ok((lhs, rhs))
    }

    /// Report over a grid of `(t, ε, k)` for the time-convolution inequality.
    pub fn check_time_convolution(&self, points: &[(f64, f64, f64)]) -> Result<VerificationReport> {
        let mut rep = VerificationReport::new("time_convolution");
        for &(t, eps, k) in points {
            let (lhs, rhs) = self.time_convolution(t, eps, k)?;
            rep.push(vec![t, eps, k], lhs, rhs);
        }
        rep.pass = rep.max_ratio() <= 1.0 + 1e-9;
        rep.fit("max_ratio", rep.max_ratio());
        Ok(rep)
    }
}

/// Sampled certificate for `h(r) ≤ C_h λ^{α_h} h(λr)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScalingCertificate {
    pub alpha_h: f64,
    pub c_h: f64,
    pub grid: Vec<(f64, f64)>,
    /// `max h(r) / (C_h λ^{α_h} h(λr)) − 1`, non-positive when the certificate holds.
    pub max_violation: f64,
}

impl ScalingCertificate {
    /// Default grid: 32×32 log-spaced `(λ, r)` in `[1e-4, 1]²`.
    pub fn default_grid() -> Vec<(f64, f64)> {
        let g = log_grid(1e-4, 1.0, 32);
        let mut out = Vec::with_capacity(g.len() * g.len());
        for &l in &g {
            for &r in &g {
                out.push((l, r));
            }
        }
        out
    }

    fn max_ratio(profile: &LevyProfile, alpha_h: f64, grid: &[(f64, f64)]) -> Result<f64> {
        let mut m: f64 = 0.0;
        for &(l, r) in grid {
            let ratio = profile.h(r)? / (l.powf(alpha_h) * profile.h(l * r)?);
            m = m.max(ratio);
        }
        Ok(m)
    }

    /// Smallest `C_h ≥ 1` consistent with the samples.
    pub fn fit(profile: &LevyProfile, alpha_h: f64, grid: Vec<(f64, f64)>) -> Result<Self> {
        let c_h = Self::max_ratio(profile, alpha_h, &grid)?.max(1.0);
        Ok(Self { alpha_h, c_h, grid, max_violation: 0.0 })
    }

    /// Checks a declared `(α_h, C_h)` pair.
    pub fn check(profile: &LevyProfile, alpha_h: f64, c_h: f64, grid: Vec<(f64, f64)>) -> Result<Self> {
        let m = Self::max_ratio(profile, alpha_h, &grid)?;
        Ok(Self { alpha_h, c_h, grid, max_violation: m / c_h - 1.0 })
    }

    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_violation <= rel_tol
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn diff_norm(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `ν(r) = c r^{-d-α}` with closed-form `h` and `K`.
pub fn power_law(dim: usize, alpha: f64, c: f64) -> LevyProfile {
    assert!(alpha > 0.0 && alpha < 2.0);
    let w = sphere_area(dim) * c;
    let d = dim as f64;
    let hc = w * 2.0 / (alpha * (2.0 - alpha));
    let kc = w / (2.0 - alpha);
    LevyProfile::new(format!("power(d={dim},alpha={alpha})"), dim, Arc::new(move |r: f64| c * r.powf(-d - alpha)))
        .with_closed_forms(Arc::new(move |r: f64| hc * r.powf(-alpha)), Arc::new(move |r: f64| kc * r.powf(-alpha)))
        .with_scaling(alpha, Some(alpha))
}

/// `ν(r) = r^{-d-1} φ(r)` for a slowly varying modulation φ.
pub fn modulated_cauchy(name: &str, dim: usize, phi: RadialFn, alpha_h: f64, beta_h: f64) -> LevyProfile {
    let d = dim as f64;
    LevyProfile::new(name, dim, Arc::new(move |r: f64| r.powf(-d - 1.0) * phi(r))).with_scaling(alpha_h, Some(beta_h))
}

/// `φ(r) = [ln(2 + 1/r)]^{-(1+ε)}`.
pub fn log_damped(dim: usize, eps: f64) -> LevyProfile {
    modulated_cauchy(
        &format!("log-damped(eps={eps})"),
        dim,
        Arc::new(move |r: f64| (2.0 + 1.0 / r).ln().powf(-1.0 - eps)),
        1.0,
        1.0,
    )
}

/// `φ(r) = 1 / ln(2 + 1/r)`.
pub fn log_one(dim: usize) -> LevyProfile {
    modulated_cauchy("log-1", dim, Arc::new(|r: f64| 1.0 / (2.0 + 1.0 / r).ln()), 1.0, 1.0)
}

/// `φ(r) = ln(2 + 1/r)`.
pub fn log_zero(dim: usize) -> LevyProfile {
    modulated_cauchy("log-0", dim, Arc::new(|r: f64| (2.0 + 1.0 / r).ln()), 1.0, 1.0)
}

/// Factorial-scale oscillating modulation, `φ = 0` for `r > 1`.
///
/// With `m = 2` the pieces are `c_k r^{-1/4}` on `[1/(2k+1)!, 1/(2k)!]` and
/// `c_k √((2k+1)!) r^{1/4}` on `[1/(2k+2)!, 1/(2k+1)!]` with
/// `c_k = ((2k)!!)^{-1/2}`. With `m = 3` the pieces switch at `1/(3k+2)!` and
/// `1/(3k+3)!` with `c_k = ((3k)!!!)^{-1/2}`.
pub fn oscillating(dim: usize, m: usize) -> LevyProfile {
    assert!(m == 2 || m == 3);
    // log of n! for n up to the underflow limit
    let nmax = 160usize;
    let mut lf = vec![0.0f64; nmax + 1];
    for n in 1..=nmax {
        lf[n] = lf[n - 1] + (n as f64).ln();
    }
    // pieces as (log r_lo, log r_hi, log coefficient, power)
    let mut pieces: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut log_ck = 0.0f64;
    let mut k = 0usize;
    while m * k + m < nmax {
        let a = m * k; // first piece on [1/(a+m-1)!, 1/a!]
        let sw = a + m - 1;
        let end = a + m;
        pieces.push((-lf[sw], -lf[a], log_ck, -0.25));
        pieces.push((-lf[end], -lf[sw], log_ck + 0.5 * lf[sw], 0.25));
        // c_{k+1} = c_k (m(k+1))^{-1/2}
        log_ck -= 0.5 * ((m * (k + 1)) as f64).ln();
        k += 1;
    }
    let mut breaks: Vec<f64> = pieces.iter().map(|p| p.1.exp()).filter(|&r| r > 1e-280).collect();
    breaks.push(1.0);
    let pieces = Arc::new(pieces);
    let d = dim as f64;
    let phi = move |r: f64| -> f64 {
        if r > 1.0 || r <= 0.0 {
            return 0.0;
        }
        let lr = r.ln();
        // pieces are ordered by decreasing radius
        let idx = pieces.partition_point(|p| p.0 > lr);
        let p = pieces.get(idx).or_else(|| pieces.last()).unwrap();
        (p.2 + p.3 * lr).exp()
    };
    let name = if m == 2 { "oscillating-1" } else { "oscillating-2" };
    LevyProfile::new(name, dim, Arc::new(move |r: f64| r.powf(-d - 1.0) * phi(r)))
        .with_breakpoints(breaks)
        .with_support(1.0)
        .with_scaling(0.75, Some(1.25))
}

/// Log-log linear interpolation of a tabulated profile.
///
/// Rows must have strictly increasing `r` and non-increasing positive `ν`.
/// The first and last segments are continued as power laws.
pub fn tabulated(name: &str, dim: usize, rows: &[(f64, f64)]) -> Result<LevyProfile> {
    if rows.len() < 2 {
        return Err(Error::Invalid("a tabulated profile needs at least two rows".into()));
    }
    for w in rows.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Invalid("profile radii must be strictly increasing".into()));
        }
        if w[1].1 > w[0].1 {
            return Err(Error::Invalid("profile values must be non-increasing".into()));
        }
    }
    if rows.iter().any(|r| !(r.0 > 0.0) || !(r.1 > 0.0)) {
        return Err(Error::Invalid("profile rows must be positive".into()));
    }
    let lr: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ln: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let n = rows.len();
    let first_slope = (ln[1] - ln[0]) / (lr[1] - lr[0]);
    let last_slope = (ln[n - 1] - ln[n - 2]) / (lr[n - 1] - lr[n - 2]);
    let d = dim as f64;
    if first_slope > -d || last_slope >= -d {
        // small-r end must keep r^{d+1}ν integrable and large-r end r^{d-1}ν
        if !(first_slope > -d - 2.0) || !(last_slope < -d) {
            return Err(Error::Invalid("tabulated profile end slopes are not integrable".into()));
        }
    }
    let breaks: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (lr2, ln2) = (lr.clone(), ln.clone());
    let f = move |r: f64| -> f64 {
        let x = r.ln();
        let i = lr2.partition_point(|&v| v <= x);
        let y = if i == 0 {
            ln2[0] + first_slope * (x - lr2[0])
        } else if i >= n {
            ln2[n - 1] + last_slope * (x - lr2[n - 1])
        } else {
            let s = (x - lr2[i - 1]) / (lr2[i] - lr2[i - 1]);
            ln2[i - 1] + s * (ln2[i] - ln2[i - 1])
        };
        y.exp()
    };
    Ok(LevyProfile::new(name, dim, Arc::new(f)).with_breakpoints(breaks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cauchy_q() -> LevyProfile {
        power_law(1, 1.0, 1.0).without_closed_forms()
    }

    #[test]
    fn h_and_k_by_quadrature() {
        let p = cauchy_q();
        assert!((p.h(1.0).unwrap() - 4.0).abs() < 1e-9);
        assert!((p.h(0.5).unwrap() - 8.0).abs() < 1e-9);
        assert!((p.k(1.0).unwrap() - 2.0).abs() < 1e-9);
        assert!((p.k(4.0).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn r_t_inverts_h() {
        let p = cauchy_q();
        assert!((p.r_t(0.25).unwrap() - 1.0).abs() < 1e-9);
        assert!((p.r_t(0.05).unwrap() - 0.2).abs() < 1e-10);
        let closed = power_law(1, 1.0, 1.0);
        assert!((closed.r_t(0.05).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn upsilon_and_rho_values() {
        let p = power_law(1, 1.0, 1.0);
        assert!((p.upsilon(0.25, &[0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((p.upsilon(0.25, &[1.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((p.rho_error(0.0, 0.0, 0.25, &[1.0], &[0.0]).unwrap() - 2.0).abs() < 1e-11);
        assert_eq!(p.rho_error(0.0, 0.5, 0.1, &[0.0], &[0.0]).unwrap(), 0.0);
        assert!(p.rho_error(0.0, 0.0, 0.3, &[1.0], &[0.0]).is_err());
        let g0 = p.rho_error(0.0, 0.5, 0.1, &[0.3], &[0.1]).unwrap();
        let g1 = p.rho_error(1.0, 0.5, 0.1, &[0.3], &[0.1]).unwrap();
        assert!((g1 / g0 - p.r_t(0.1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn condition_r_for_cauchy() {
        let p = power_law(1, 1.0, 1.0);
        let rep = p.check_condition_r(&[0.05, 0.1, 0.2], &[0.1, 0.5, 1.0]).unwrap();
        assert!(rep.pass);
        assert!((rep.max_ratio() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn time_convolution_closed_form() {
        let p = power_law(1, 1.0, 1.0);
        for &t in &[0.05, 0.1, 0.25] {
            let (lhs, rhs) = p.time_convolution(t, 1.0, 1.0).unwrap();
            assert!((lhs - 16.0 * t).abs() < 1e-6);
            assert!((rhs - 16.0 * std::f64::consts::PI * t).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_certificate_cauchy() {
        let p = power_law(1, 1.0, 1.0);
        let c = ScalingCertificate::fit(&p, 1.0, ScalingCertificate::default_grid()).unwrap();
        assert!((c.c_h - 1.0).abs() < 1e-12);
        let bad = ScalingCertificate::check(&p, 1.2, 1.0, ScalingCertificate::default_grid()).unwrap();
        assert!(!bad.passes(1e-9));
    }

    #[test]
    fn two_dimensional_power_law() {
        let p = power_law(2, 1.0, 1.0);
        let q = p.clone().without_closed_forms();
        for &r in &[0.1, 1.0, 3.0] {
            assert!((p.h(r).unwrap() / q.h(r).unwrap() - 1.0).abs() < 1e-9);
            assert!((p.k(r).unwrap() / q.k(r).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn oscillating_profile_is_continuous_and_monotone() {
        for m in [2, 3] {
            let p = oscillating(1, m);
            assert!(p.validate().pass, "m = {m}");
            for &b in p.breakpoints().iter().filter(|&&b| b > 1e-30 && b < 1.0) {
                let lo = p.nu(b * (1.0 - 1e-9));
                let hi = p.nu(b * (1.0 + 1e-9));
                assert!((lo / hi - 1.0).abs() < 1e-6, "jump at {b}: {lo} vs {hi}");
            }
        }
    }

    #[test]
    fn tabulated_rejects_bad_rows() {
        assert!(tabulated("t", 1, &[(1.0, 1.0), (0.5, 0.5)]).is_err());
        assert!(tabulated("t", 1, &[(1.0, 1.0), (2.0, 2.0)]).is_err());
        let t = tabulated("t", 1, &[(0.1, 100.0), (1.0, 1.0), (10.0, 0.01)]).unwrap();
        assert!((t.nu(0.5) - 4.0).abs() < 1e-9);
        assert!((t.h(1.0).unwrap() - 4.0).abs() < 1e-7);
    }
}
