//! Ground truth independent of the table engine: the Cauchy closed form, a
//! 1-stable reference density for sign-asymmetric `|z|⁻²` kernels, nested
//! quadrature for `q₀` and `q₁`, residual suites and a Monte-Carlo sampler.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::engine::{apply_pt, Build, Engine, KernelTable};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, tanh_sinh, QuadConfig};
use crate::special::EULER_GAMMA;

/// `γ/(π(γ² + (y−x)²))`, `γ = κ₀πt`.
pub fn cauchy_closed_form(t: f64, x: f64, y: f64, kappa0: f64) -> f64 {
    let g = kappa0 * PI * t;
    let u = y - x;
    g / (PI * (g * g + u * u))
}

/// `P(Y ≤ y)` for the same law.
pub fn cauchy_cdf(t: f64, x: f64, y: f64, kappa0: f64) -> f64 {
    0.5 + ((y - x) / (kappa0 * PI * t)).atan() / PI
}

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub name: String,
    pub inputs: Vec<f64>,
    pub oracle_value: f64,
    pub engine_value: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub pass: bool,
}

impl OracleResult {
    pub fn new(name: &str, inputs: Vec<f64>, oracle: f64, engine: f64, abs_tol: f64, rel_tol: f64) -> Self {
        let abs_err = (engine - oracle).abs();
        let rel_err = if oracle != 0.0 { abs_err / oracle.abs() } else { f64::INFINITY };
        let pass = abs_err <= abs_tol || rel_err <= rel_tol;
        Self { name: name.into(), inputs, oracle_value: oracle, engine_value: engine, abs_err, rel_err, abs_tol, rel_tol, pass }
    }

    pub fn to_jsonl(&self) -> String {
        let mut v = serde_json::to_value(self).expect("serializable");
        v["record"] = "oracle".into();
        format!("{v}\n")
    }
}

/// Standard 1-stable density with exponent
/// `Φ(ξ) = (k⁺+k⁻)(π/2)|ξ| − i(k⁺−k⁻)ξ(1 − γ_E − ln|ξ|)`, the Lévy exponent of
/// the measure `k^±/z²` on the half-lines with the `1_{|z|<1}` compensator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableReference {
    pub kp: f64,
    pub km: f64,
}

impl StableReference {
    pub fn new(kp: f64, km: f64) -> Result<Self> {
        if !(kp > 0.0 && km > 0.0) {
            return Err(Error::Invalid(format!("need k⁺, k⁻ > 0, got ({kp}, {km})")));
        }
        Ok(Self { kp, km })
    }

    /// `κ(x,z) = a(x) k(z)` with `k` constant on each half-line, `J = c|z|⁻²`, `b = 0`, d = 1.
    pub fn from_coefficients(coeffs: &CoefficientSet) -> Result<Self> {
        let unsupported = |m: &str| Error::Unsupported(format!("stable reference: {m}"));
        if coeffs.dim() != 1 || coeffs.has_drift() {
            return Err(unsupported("needs d = 1 and b = 0"));
        }
        let terms = coeffs.separable_terms().ok_or_else(|| unsupported("needs a separable κ"))?;
        if terms.len() != 1 {
            return Err(unsupported("needs a single product term"));
        }
        let c = coeffs.profile.nu(1.0);
        for r in [1e-3, 0.5, 2.0, 1e3] {
            if (coeffs.profile.nu(r) * r * r - c).abs() > 1e-12 * c {
                return Err(unsupported("needs ν(r) = c r⁻²"));
            }
        }
        let k = &terms[0].k;
        let kp = k(&[0.5]);
        let km = k(&[-0.5]);
        for z in [1e-6, 0.1, 0.9, 3.0, 1e4] {
            if k(&[z]) != kp || k(&[-z]) != km {
                return Err(unsupported("needs k constant on each half-line"));
            }
        }
        Self::new(c * kp, c * km)
    }

    fn s(&self) -> f64 {
        self.kp + self.km
    }

    fn d(&self) -> f64 {
        self.kp - self.km
    }

    /// `(f(v), f'(v))`.
    pub fn f(&self, v: f64) -> Result<(f64, f64)> {
        if self.kp < self.km {
            let m = Self { kp: self.km, km: self.kp }.f(-v)?;
            return Ok((m.0, -m.1));
        }
        let (s, d) = (self.s(), self.d());
        if d == 0.0 {
            let g = 0.5 * s * PI;
            let den = g * g + v * v;
            return Ok((g / (PI * den), -2.0 * g * v / (PI * den * den)));
        }
        let cfg = QuadConfig::new(1e-15, 1e-12, 4000);
        let r0 = 32.0 / s;
        let v0 = (d * r0.ln() + 5.0).max(8.0);
        if v >= 0.0 {
            // η = −iσ
            let kp = self.kp;
            let w = |sig: f64| (sig * d * (1.0 - EULER_GAMMA - sig.ln()) - v * sig).exp();
            let mut hi = 60.0 / (v + 1.0) + 40.0 * (1.0 + d) / d;
            if v > 0.0 {
                hi = hi.min(80.0 / v);
            }
            let cfg = QuadConfig::new(1e-16 / (1.0 + v * v), 1e-12, 4000);
            let br = breaks(hi, 1.0 / (kp + v + 1.0));
            let a = integrate_with_breaks(|g| w(g) * (PI * kp * g).sin(), 0.0, hi, &br, &cfg)?.value;
            let b = integrate_with_breaks(|g| -g * w(g) * (PI * kp * g).sin(), 0.0, hi, &br, &cfg)?.value;
            return Ok((a / PI, b / PI));
        }
        if v < -v0 {
            // η = iσ, closed at radius r0
            let km = self.km;
            let w = |sig: f64| (sig * d * (sig.ln() - 1.0 + EULER_GAMMA) + v * sig).exp();
            let hi = r0.min(80.0 / -v);
            let cfg = QuadConfig::new(1e-16 / (1.0 + v * v), 1e-12, 4000);
            let br = breaks(hi, 1.0 / (km - v + 1.0));
            let a = integrate_with_breaks(|g| w(g) * (PI * km * g).sin(), 0.0, hi, &br, &cfg)?.value;
            let b = integrate_with_breaks(|g| g * w(g) * (PI * km * g).sin(), 0.0, hi, &br, &cfg)?.value;
            return Ok((a / PI, b / PI));
        }
        // real axis
        let hi = 90.0 / s;
        let phase = |e: f64| d * e * (1.0 - EULER_GAMMA - e.ln()) - v * e;
        let damp = |e: f64| (-0.5 * s * PI * e).exp();
        let br = breaks(hi, PI / (v.abs() + d * (1.0 + hi.ln().abs()) + 1.0));
        let a = integrate_with_breaks(|e| damp(e) * phase(e).cos(), 0.0, hi, &br, &cfg)?.value;
        let b = integrate_with_breaks(|e| e * damp(e) * phase(e).sin(), 0.0, hi, &br, &cfg)?.value;
        Ok((a / PI, b / PI))
    }
}

impl StableLaw for StableReference {
    fn eval(&self, v: f64) -> Result<(f64, f64)> {
        self.f(v)
    }

    fn skew(&self) -> f64 {
        self.d()
    }
}

/// Shared scaling relations of a 1-stable law `f` with skew `D = k⁺ − k⁻`.
pub trait StableLaw {
    /// `(f(v), f'(v))`.
    fn eval(&self, v: f64) -> Result<(f64, f64)>;

    fn skew(&self) -> f64;

    /// Density of the law with exponent `τ a Φ` at `u`.
    fn density(&self, a: f64, tau: f64, u: f64) -> Result<f64> {
        let s = tau * a;
        Ok(self.eval(u / s - self.skew() * s.ln())?.0 / s)
    }

    /// `∂_τ` of [`Self::density`].
    fn density_dt(&self, a: f64, tau: f64, u: f64) -> Result<f64> {
        let s = tau * a;
        let (f, fp) = self.eval(u / s - self.skew() * s.ln())?;
        Ok(-(f + fp * (u / s + self.skew())) / (tau * s))
    }

    /// `q₀(τ, x, z) = −(a(z) − a(x))/a(z) · ∂_τ p_{a(z)}(τ, z − x)`.
    fn q0(&self, coeffs: &CoefficientSet, tau: f64, x: f64, z: f64) -> Result<f64> {
        let a = coeffs.separable_terms().expect("checked separable")[0].a.as_ref();
        let (ax, az) = (a(&[x]), a(&[z]));
        if ax == az {
            return Ok(0.0);
        }
        Ok(-(az - ax) / az * self.density_dt(az, tau, z - x)?)
    }
}

/// [`StableReference`] tabulated in `s = asinh v` with cubic Hermite
/// interpolation and the `k^±/v²` tails beyond the table.
#[derive(Debug, Clone, PartialEq)]
pub struct StableTable {
    reference: StableReference,
    s_max: f64,
    hs: f64,
    f: Vec<f64>,
    df: Vec<f64>,
}

impl StableTable {
    pub fn new(reference: StableReference, v_max: f64, hs: f64) -> Result<Self> {
        let s_max = v_max.asinh();
        let n = (2.0 * s_max / hs).ceil() as usize;
        let hs = 2.0 * s_max / n as f64;
        let mut f = Vec::with_capacity(n + 1);
        let mut df = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let s = -s_max + k as f64 * hs;
            let (a, b) = reference.f(s.sinh())?;
            f.push(a);
            df.push(b * s.cosh());
        }
        Ok(Self { reference, s_max, hs, f, df })
    }
}

impl StableLaw for StableTable {
    fn eval(&self, v: f64) -> Result<(f64, f64)> {
        let s = v.asinh();
        if s.abs() >= self.s_max {
            let k = if v > 0.0 { self.reference.kp } else { self.reference.km };
            return Ok((k / (v * v), -2.0 * k / (v * v * v)));
        }
        let pos = (s + self.s_max) / self.hs;
        let k = (pos.floor() as usize).min(self.f.len() - 2);
        let u = pos - k as f64;
        let h = self.hs;
        let (f0, f1, m0, m1) = (self.f[k], self.f[k + 1], self.df[k] * h, self.df[k + 1] * h);
        let (u2, u3) = (u * u, u * u * u);
        let val = (2.0 * u3 - 3.0 * u2 + 1.0) * f0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * f1 + (u3 - u2) * m1;
        let du = (6.0 * u2 - 6.0 * u) * f0 + (3.0 * u2 - 4.0 * u + 1.0) * m0 + (-6.0 * u2 + 6.0 * u) * f1 + (3.0 * u2 - 2.0 * u) * m1;
        Ok((val, du / (h * s.cosh())))
    }

    fn skew(&self) -> f64 {
        self.reference.d()
    }
}

fn breaks(hi: f64, step: f64) -> Vec<f64> {
    let step = step.max(hi / 400.0);
    (1..).map(|k| k as f64 * step).take_while(|b| *b < hi).collect()
}

/// `q₀(t,x,y)` from `∫ δ_1(t,x,y;z)(κ(x,z) − κ(y,z))J(z)dz` with tanh-sinh in `z`
/// and the stable reference for `p^{𝔎_y}`.
pub fn q0_delta_oracle<S: StableLaw>(coeffs: &CoefficientSet, st: &S, t: f64, x: f64, y: f64) -> Result<f64> {
    let a = coeffs.separable_terms().ok_or_else(|| Error::Unsupported("needs a separable κ".into()))?[0].a.clone();
    let (ax, ay) = (a(&[x]), a(&[y]));
    if ax == ay {
        return Ok(0.0);
    }
    let u = y - x;
    let w = t * ay;
    let mut err = None;
    let mut p = |s: f64| match st.density(ay, t, s) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let h = 1e-3 * w;
    let p0 = p(u);
    let d1 = (p(u + h) - p(u - h)) / (2.0 * h);
    let d2 = (p(u + h) - 2.0 * p0 + p(u - h)) / (h * h);
    let kz = |z: f64| coeffs.kappa(&[x], &[z]) - coeffs.kappa(&[y], &[z]);
    // δ_1 = P(u − z) − P(u) + 1_{|z|<1} z P'(u), divided by z²
    let mut g = |z: f64| -> f64 {
        let base = if z.abs() < 1e-4 * w {
            0.5 * d2
        } else {
            let lin = if z.abs() < 1.0 { z * d1 } else { 0.0 };
            (p(u - z) - p0 + lin) / (z * z)
        };
        base * kz(z) * coeffs.profile.nu(1.0)
    };
    let mut pts = vec![-1.0, 0.0, 1.0];
    for k in [0.0, 1.0, -1.0, 10.0, -10.0] {
        pts.push(u + k * w);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let lo = pts[0] - 1.0;
    let hi = pts[pts.len() - 1] + 1.0;
    let mut total = 0.0;
    let mut edges = vec![lo];
    edges.extend(pts);
    edges.push(hi);
    for win in edges.windows(2) {
        total += tanh_sinh(&mut g, win[0], win[1], 1e-11).value;
    }
    // z = hi/s and z = lo/s with s ∈ (0, 1]
    total += tanh_sinh(|s: f64| if s <= 0.0 { 0.0 } else { g(hi / s) * hi / (s * s) }, 0.0, 1.0, 1e-11).value;
    total += tanh_sinh(|s: f64| if s <= 0.0 { 0.0 } else { g(lo / s) * (-lo) / (s * s) }, 0.0, 1.0, 1e-11).value;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(total)
}

/// `q₁(t,x,y) = ∫₀^t ∫ q₀(t−s,x,z) q₀(s,z,y) dz ds`: tanh-sinh in `s` on
/// `[10⁻⁸t, (1 − 10⁻⁸)t]`, adaptive Gauss–Kronrod in `z` on `[x_lo, x_hi]`,
/// closed-form `q₀`.
pub fn q1_oracle<S: StableLaw>(
    coeffs: &CoefficientSet,
    st: &S,
    t: f64,
    x: f64,
    y: f64,
    z_range: (f64, f64),
) -> Result<f64> {
    let prof = &coeffs.profile;
    let cfg = QuadConfig::new(1e-9, 1e-7, 4000);
    let mut err = None;
    let mut inner = |s: f64| -> f64 {
        if s <= 1e-8 * t || s >= t * (1.0 - 1e-8) {
            return 0.0;
        }
        let (r1, r2) = match (prof.r_t(t - s), prof.r_t(s)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
                return 0.0;
            }
        };
        let mut br = vec![0.0, 1.0];
        for k in [0.0, 1.0, -1.0, 10.0, -10.0, 100.0, -100.0] {
            br.push(x + k * r1);
            br.push(y + k * r2);
        }
        br.retain(|b| *b > z_range.0 && *b < z_range.1);
        let f = |z: f64| -> f64 {
            let a = st.q0(coeffs, t - s, x, z);
            let b = st.q0(coeffs, s, z, y);
            match (a, b) {
                (Ok(a), Ok(b)) => a * b,
                _ => f64::NAN,
            }
        };
        match integrate_with_breaks(f, z_range.0, z_range.1, &br, &cfg) {
            Ok(q) if q.value.is_finite() => q.value,
            Ok(_) => {
                err.get_or_insert(Error::Quadrature { partial: f64::NAN, abs_err: f64::NAN });
                0.0
            }
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let cut = 1e-8 * t;
    let v = tanh_sinh(&mut inner, cut, t - cut, 1e-6).value;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(v)
}

/// Tolerances and probes of the residual suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub probes: Vec<f64>,
    pub mass_tol: f64,
    pub positivity_rel: f64,
    pub ck_rel: f64,
    pub contraction_tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { probes: vec![0.25, 0.5, 0.75], mass_tol: 1e-2, positivity_rel: 1e-3, ck_rel: 5e-2, contraction_tol: 1e-2 }
    }
}

/// Smooth bump on `(c − h, c + h)` with maximum 1.
pub fn bump(c: f64, h: f64) -> impl Fn(f64) -> f64 {
    move |y: f64| {
        let s = (y - c) / h;
        if s.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    }
}

/// Chapman–Kolmogorov composition `∫ p(s,x,z) p(t−s,z,y) dz` over the core cells.
pub fn compose(p: &KernelTable, s: f64, u: f64, i: usize, j: usize) -> Result<f64> {
    let (a, b) = (p.time_index(s)?, p.time_index(u)?);
    let n = p.grid.n;
    Ok(p.grid.dx * (0..n).map(|k| p.value(a, i, k) * p.value(b, k, j)).sum::<f64>())
}

/// Tables and fitted constants the residual suite reads.
pub struct SuiteInput<'a> {
    pub coeffs: &'a CoefficientSet,
    pub p: &'a KernelTable,
    pub q0: &'a KernelTable,
    pub c3: f64,
    pub eps0: f64,
}

impl<'a> SuiteInput<'a> {
    pub fn from_build(engine: &'a Engine, build: &'a Build) -> Self {
        Self { coeffs: &engine.coeffs, p: &build.p, q0: &build.q0, c3: build.budget.c3, eps0: build.budget.eps0 }
    }
}

/// Mass, positivity, Chapman–Kolmogorov, contraction and `q₀`-L¹ residuals.
pub fn run_residual_suite(input: &SuiteInput<'_>, cfg: &SuiteConfig) -> Result<Vec<OracleResult>> {
    let p = input.p;
    let g = &p.grid;
    let coeffs = input.coeffs;
    let mut out = Vec::new();
    for (ti, &t) in p.t_grid.iter().enumerate() {
        for &x in &cfg.probes {
            let i = g.cell_of(x)?;
            out.push(OracleResult::new("mass", vec![t, x], 1.0, p.mass(ti, i), cfg.mass_tol, 0.0));
        }
    }
    let (lo, hi) = p.extrema();
    out.push(OracleResult::new("positivity", vec![], 0.0, lo.min(0.0), cfg.positivity_rel * hi, 0.0));
    for &t in &p.t_grid {
        for &s in &p.t_grid {
            if s > t - s + 1e-12 || p.time_index(t - s).is_err() {
                continue;
            }
            let rt = coeffs.profile.r_t(t)?;
            for &x in &cfg.probes {
                let b = coeffs.effective_drift(&[x], rt)?[0];
                let i = g.cell_of(x)?;
                for off in [-rt, 0.0, rt] {
                    let j = g.cell_of(x + t * b + off)?;
                    let lhs = compose(p, s, t - s, i, j)?;
                    let rhs = p.value(p.time_index(t)?, i, j);
                    out.push(OracleResult::new("chapman_kolmogorov", vec![s, t, x, g.center(j)], rhs, lhs, 0.0, cfg.ck_rel));
                }
            }
        }
    }
    let f = bump(0.5, 1.0);
    for &t in &p.t_grid {
        for &x in &cfg.probes {
            let v = apply_pt(p, &f, t, x)?;
            let excess = (v - 1.0).max(-v).max(0.0);
            out.push(OracleResult::new("contraction", vec![t, x], 0.0, excess, cfg.contraction_tol, 0.0));
        }
    }
    for (ti, &t) in input.q0.t_grid.iter().enumerate() {
        let rt = coeffs.profile.r_t(t)?;
        let bound = input.c3 * rt.powf(input.eps0) / t;
        for &x in &cfg.probes {
            let l1 = input.q0.l1(ti, g.cell_of(x)?);
            out.push(OracleResult::new("q0_l1", vec![t, x], bound, l1.min(bound), f64::INFINITY, 0.0).checked(l1 <= bound * (1.0 + 1e-12)));
        }
    }
    Ok(out)
}

impl OracleResult {
    fn checked(mut self, ok: bool) -> Self {
        self.pass = ok;
        self
    }
}

/// Normalized histogram with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub paths: usize,
    pub cutoff: f64,
    pub seed: u64,
    pub workers: usize,
    pub scheme: String,
}

impl Histogram {
    /// Share of bins whose mean oracle density lies within `k` standard errors.
    pub fn agreement<F: Fn(f64, f64) -> f64>(&self, bin_mass: F, k: f64) -> f64 {
        let nb = self.density.len();
        let ok = (0..nb)
            .filter(|&b| {
                let (a, c) = (self.edges[b], self.edges[b + 1]);
                let exact = bin_mass(a, c) / (c - a);
                (self.density[b] - exact).abs() <= k * self.stderr[b].max(1e-300)
            })
            .count();
        ok as f64 / nb as f64
    }
}

/// Inverse tail sampler for `m(±z)` on `|z| ≥ ε`, interpolating `ln G` in `ln s`.
struct TailSampler {
    ln_g0: f64,
    ln_s: Vec<f64>,
    ln_g: Vec<f64>,
}

impl TailSampler {
    fn new<M: Fn(f64) -> f64>(m: M, eps: f64) -> Result<Self> {
        let n = 2400;
        let (l0, l1) = (eps.ln(), (1e12f64).ln());
        let ln_s: Vec<f64> = (0..=n).map(|k| l0 + (l1 - l0) * k as f64 / n as f64).collect();
        let cfg = QuadConfig::new(1e-300, 1e-12, 200);
        // G(s_k) = ∫_{s_k}^{∞} m, the last piece by the power-law fit of the final interval
        let mut pieces = vec![0.0; n];
        for k in 0..n {
            pieces[k] = integrate_with_breaks(|w| w.exp() * m(w.exp()), ln_s[k], ln_s[k + 1], &[], &cfg)?.value;
        }
        let sn = ln_s[n].exp();
        let tail = sn * m(sn);
        let mut g = vec![0.0; n + 1];
        g[n] = tail;
        for k in (0..n).rev() {
            g[k] = g[k + 1] + pieces[k];
        }
        if !(g[0] > 0.0) {
            return Ok(Self { ln_g0: f64::NEG_INFINITY, ln_s, ln_g: vec![] });
        }
        let ln_g: Vec<f64> = g.iter().map(|v| v.max(1e-300).ln()).collect();
        Ok(Self { ln_g0: ln_g[0], ln_s, ln_g })
    }

    fn mass(&self) -> f64 {
        self.ln_g0.exp()
    }

    fn sample(&self, u: f64) -> f64 {
        let target = self.ln_g0 + u.ln();
        // ln G is decreasing
        let k = self.ln_g.partition_point(|&v| v > target);
        if k == 0 {
            return self.ln_s[0].exp();
        }
        let k = k.min(self.ln_g.len() - 1);
        let (g0, g1) = (self.ln_g[k - 1], self.ln_g[k]);
        let w = if g1 == g0 { 0.0 } else { (target - g0) / (g1 - g0) };
        (self.ln_s[k - 1] + w * (self.ln_s[k] - self.ln_s[k - 1])).exp()
    }
}

/// Histogram of `X_t` started at `x` for the operator frozen at `w`: compound
/// Poisson jumps of `κ(w,·)J` on `|z| ≥ cutoff` plus the drift `t b^w_{cutoff}`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_density(
    coeffs: &CoefficientSet,
    w: f64,
    t: f64,
    x: f64,
    n_paths: usize,
    cutoff: f64,
    seed: u64,
    edges: &[f64],
) -> Result<Histogram> {
    if coeffs.dim() != 1 {
        return Err(Error::Unsupported("the sampler is one-dimensional".into()));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) || edges.len() < 2 || edges.windows(2).any(|e| e[1] <= e[0]) {
        return Err(Error::Invalid("need cutoff in (0, 1) and increasing bin edges".into()));
    }
    let plus = TailSampler::new(|s| coeffs.kappa(&[w], &[s]) * coeffs.j(&[s]), cutoff)?;
    let minus = TailSampler::new(|s| coeffs.kappa(&[w], &[-s]) * coeffs.j(&[-s]), cutoff)?;
    let lambda = plus.mass() + minus.mass();
    let mean_jumps = lambda * t;
    if mean_jumps > 1e5 {
        return Err(Error::Budget(format!("{mean_jumps:.3e} jumps per path; raise the cutoff")));
    }
    let drift = coeffs.effective_drift(&[w], cutoff)?[0];
    let p_plus = if lambda > 0.0 { plus.mass() / lambda } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let poisson = if mean_jumps > 0.0 { Some(Poisson::new(mean_jumps).map_err(|e| Error::Invalid(e.to_string()))?) } else { None };
    let nb = edges.len() - 1;
    let mut counts = vec![0u64; nb];
    for _ in 0..n_paths {
        let mut pos = x + t * drift;
        if let Some(po) = &poisson {
            let n: f64 = po.sample(&mut rng);
            for _ in 0..n as u64 {
                let side: f64 = rng.random();
                let u: f64 = 1.0 - rng.random::<f64>();
                if side < p_plus {
                    pos += plus.sample(u);
                } else {
                    pos -= minus.sample(u);
                }
            }
        }
        if pos >= edges[0] && pos < edges[nb] {
            let b = edges.partition_point(|e| *e <= pos) - 1;
            counts[b] += 1;
        }
    }
    let n = n_paths as f64;
    let mut density = Vec::with_capacity(nb);
    let mut stderr = Vec::with_capacity(nb);
    for (b, &c) in counts.iter().enumerate() {
        let width = edges[b + 1] - edges[b];
        let ph = c as f64 / n;
        density.push(ph / width);
        stderr.push((ph * (1.0 - ph) / n).sqrt() / width);
    }
    Ok(Histogram {
        edges: edges.to_vec(),
        density,
        stderr,
        paths: n_paths,
        cutoff,
        seed,
        workers: 1,
        scheme: "ChaCha8, stream = worker index".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::example_catalog;
    use crate::frozen::FrozenKernelEvaluator;
    use crate::symbol::FrozenSymbol;
    use std::sync::Arc;

    #[test]
    fn cauchy_values() {
        assert!((cauchy_closed_form(0.1, 0.3, 0.3, 1.0) - 1.0 / (PI * PI * 0.1)).abs() < 1e-12);
        let (l, t, u) = (3.0, 0.1, 0.4);
        assert!((cauchy_closed_form(l * t, 0.0, l * u, 1.0) - cauchy_closed_form(t, 0.0, u, 1.0) / l).abs() < 1e-12);
        assert!((cauchy_cdf(0.2, 0.0, 1e12, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stable_reference_matches_frozen_density() {
        let (c, _) = example_catalog("ex1").unwrap();
        let st = StableReference::from_coefficients(&c).unwrap();
        assert_eq!((st.kp, st.km), (1.5, 0.5));
        let c = Arc::new(c);
        for w in [0.3, 1.5] {
            let ev = FrozenKernelEvaluator::new(FrozenSymbol::new(c.clone(), &[w]).unwrap());
            let a = crate::catalog::ex1_a(w);
            for t in [0.01, 0.2] {
                for u in [-3.0, -0.4, -0.05, 0.0, 0.02, 0.3, 2.0, 40.0] {
                    let e = ev.density(t, &[0.0], &[u]).unwrap().raw;
                    let s = st.density(a, t, u).unwrap();
                    assert!((e - s).abs() < 1e-7 * e.abs().max(1e-3), "w={w} t={t} u={u}: {e} vs {s}");
                }
            }
        }
    }

    #[test]
    fn stable_branches_agree() {
        // the rotated and real-axis forms overlap near the switch points
        let st = StableReference::new(1.5, 0.5).unwrap();
        let direct = |v: f64| -> f64 {
            let cfg = QuadConfig::new(1e-15, 1e-12, 20000);
            let phase = |e: f64| (e * (1.0 - EULER_GAMMA - e.ln()) - v * e).cos() * (-PI * e).exp();
            integrate_with_breaks(phase, 0.0, 45.0, &breaks(45.0, 0.05), &cfg).unwrap().value / PI
        };
        for v in [-20.0, -9.0, -3.0, 0.5, 4.0] {
            let (f, _) = st.f(v).unwrap();
            assert!((f - direct(v)).abs() < 1e-10, "{v}: {f} vs {}", direct(v));
        }
        // mass and tails
        for v in [1e3, -1e3] {
            let k = if v > 0.0 { 1.5 } else { 0.5 };
            assert!((st.f(v).unwrap().0 * v * v / k - 1.0).abs() < 2e-2);
        }
        let h = 1e-4;
        let (_, d) = st.f(0.7).unwrap();
        let fd = (st.f(0.7 + h).unwrap().0 - st.f(0.7 - h).unwrap().0) / (2.0 * h);
        assert!((d - fd).abs() < 1e-7);
    }

    #[test]
    fn stable_mirror_and_symmetric() {
        let a = StableReference::new(0.5, 1.5).unwrap();
        let b = StableReference::new(1.5, 0.5).unwrap();
        assert!((a.f(0.3).unwrap().0 - b.f(-0.3).unwrap().0).abs() < 1e-14);
        let c = StableReference::new(0.5, 0.5).unwrap();
        assert!((c.density(1.0, 0.1, 0.2).unwrap() - cauchy_closed_form(0.1, 0.0, 0.2, 0.5)).abs() < 1e-14);
    }

    #[test]
    fn histogram_of_pure_drift_is_a_point_mass() {
        let (mut c, _) = example_catalog("cauchy-const").unwrap();
        c.jump = Arc::new(|_: &[f64]| 0.0);
        let edges: Vec<f64> = (0..=20).map(|k| -1.0 + 0.1 * k as f64).collect();
        let h = monte_carlo_density(&c, 0.0, 0.1, 0.05, 1000, 1e-3, 7, &edges).unwrap();
        let full: Vec<usize> = (0..20).filter(|&b| h.density[b] > 0.0).collect();
        assert_eq!(full, vec![10]);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let (c, _) = example_catalog("cauchy-const").unwrap();
        let edges: Vec<f64> = (0..=10).map(|k| -1.0 + 0.2 * k as f64).collect();
        let a = monte_carlo_density(&c, 0.0, 0.1, 0.0, 2000, 1e-2, 3, &edges).unwrap();
        let b = monte_carlo_density(&c, 0.0, 0.1, 0.0, 2000, 1e-2, 3, &edges).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo_density(&c, 0.0, 0.1, 0.0, 10, 1e-9, 3, &edges).is_err());
    }

    #[test]
    fn stable_table_interpolates() {
        let st = StableReference::new(1.5, 0.5).unwrap();
        let tab = StableTable::new(st, 1e8, 4e-3).unwrap();
        for v in [-1e7, -300.0, -2.3, 0.0, 0.77, 14.0, 5e5] {
            let (a, b) = (st.f(v).unwrap(), tab.eval(v).unwrap());
            assert!((a.0 - b.0).abs() < 1e-9 * a.0, "{v}");
            assert!((a.1 - b.1).abs() < 1e-6 * a.1.abs(), "{v}");
        }
        let far = tab.eval(-1e9).unwrap().0 * 1e18;
        assert!((far - 0.5).abs() < 1e-6);
    }

    #[test]
    fn q0_routes_agree() {
        let (c, p) = example_catalog("ex1").unwrap();
        let st = StableReference::from_coefficients(&c).unwrap();
        let tab = StableTable::new(st, 1e8, 4e-3).unwrap();
        let e = Engine::new(Arc::new(c.clone()), p, crate::engine::EngineConfig::default()).unwrap();
        for (t, x, y) in [(0.05, 0.25, 0.75), (0.02, 0.5, 0.45), (0.05, 0.75, 0.3), (0.01, -0.3, 0.2)] {
            let delta = q0_delta_oracle(&c, &tab, t, x, y).unwrap();
            let closed = st.q0(&c, t, x, y).unwrap();
            let engine = e.q0_eval(t, x, y).unwrap();
            assert!((delta - closed).abs() < 1e-5 * closed.abs(), "({t},{x},{y}) {delta} vs {closed}");
            assert!((engine - closed).abs() < 1e-5 * closed.abs(), "({t},{x},{y}) {engine} vs {closed}");
        }
        assert_eq!(st.q0(&c, 0.05, -0.5, -0.2).unwrap(), 0.0);
    }
}
