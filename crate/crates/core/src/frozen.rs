//! Frozen-coefficient heat kernels `p^{𝔎_w}(t, x, y) = P(t, y − x)` and the
//! frozen generators acting on them.
//!
//! In d = 1 the Fourier inversion `(1/π) ∫₀^R Re(e^{−iuξ} e^{−tΨ_w(ξ)}) dξ` is a
//! uniform trapezoid sum whose step `2π/P` is set by an aliasing bound on the
//! images `P(u + kP)`. In d = 2 (isotropic jumps) the radial Hankel integral is
//! used. Batched kernels on a uniform u-grid come from one FFT per derivative.

use crate::error::{Error, Result};
use crate::profile::norm;
use crate::quadrature::{gauss_legendre, integrate_to_infinity, integrate_with_breaks, QuadConfig};
use crate::special::{bessel_j0, bessel_j1};
use crate::symbol::FrozenSymbol;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Accuracy controls of the Fourier inversion.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DensityConfig {
    pub abs_tol: f64,
    pub max_points: usize,
    pub period_cap: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_points: 8_000_000, period_cap: 1e8 }
    }
}

/// A kernel value with its raw (unclamped) counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityValue {
    pub value: f64,
    pub raw: f64,
    /// Amount removed by clamping negative lobes to 0.
    pub clamp: f64,
    pub quad_err: f64,
}

/// Samples `e^{−tΨ_w(jη)}`, `j = 0..N`, for trapezoid inversion in d = 1.
#[derive(Debug, Clone)]
pub struct SpectralSlice {
    pub t: f64,
    pub eta: f64,
    pub period: f64,
    pub radius: f64,
    e: Vec<Complex64>,
}

impl SpectralSlice {
    /// `∂_x^k p^{𝔎_w}(t, x, x + u) = (1/π) ∫₀^∞ Re((iξ)^k e^{−iuξ} e^{−tΨ_w(ξ)}) dξ`.
    pub fn eval(&self, u: f64, k: u32) -> f64 {
        let rot = Complex64::from_polar(1.0, -u * self.eta);
        let mut ph = Complex64::new(1.0, 0.0);
        let mut acc = 0.0;
        let ik = Complex64::new(0.0, 1.0).powu(k);
        for (j, e) in self.e.iter().enumerate() {
            if j % 512 == 0 {
                ph = Complex64::from_polar(1.0, -u * self.eta * j as f64);
            }
            let xi = self.eta * j as f64;
            let w = if j == 0 { 0.5 } else { 1.0 };
            let f = if k == 0 { ph * e } else { ik * xi.powi(k as i32) * ph * e };
            acc += w * f.re;
            ph *= rot;
        }
        acc * self.eta / PI
    }

    /// `(1/π) ∫₀^∞ Re(g(ξ) e^{−iuξ} e^{−tΨ_w(ξ)}) dξ` for a frequency weight `g`.
    pub fn eval_weighted<G: Fn(f64) -> Complex64>(&self, u: f64, g: G) -> f64 {
        let mut acc = 0.0;
        for (j, e) in self.e.iter().enumerate() {
            let xi = self.eta * j as f64;
            let w = if j == 0 { 0.5 } else { 1.0 };
            acc += w * (g(xi) * Complex64::from_polar(1.0, -u * xi) * e).re;
        }
        acc * self.eta / PI
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }
}

/// Kernel `P` and its first four u-derivatives on a periodic uniform grid.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub t: f64,
    pub du: f64,
    pub half_width: f64,
    n: usize,
    vals: [Vec<f64>; 5],
}

impl DensityGrid {
    /// Builds `P^{(k)}(u_m)`, `u_m = m du`, by FFT over period `4·half_width`.
    pub fn build(sym: &FrozenSymbol, t: f64, du_target: f64, half_width: f64) -> Result<Self> {
        if sym.dim() != 1 {
            return Err(Error::Unsupported("density grids are one-dimensional".into()));
        }
        let period = 4.0 * half_width;
        let n = ((period / du_target).ceil() as usize).next_power_of_two();
        let du = period / n as f64;
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for (j, s) in spec.iter_mut().enumerate().take(n) {
            if j == n / 2 {
                continue;
            }
            let jj = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            let xi = 2.0 * PI * jj / period;
            *s = (-t * sym.psi_1d(xi)).exp();
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let mut vals: [Vec<f64>; 5] = Default::default();
        for (k, slot) in vals.iter_mut().enumerate() {
            let mut buf: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(j, e)| {
                    let jj = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                    let xi = 2.0 * PI * jj / period;
                    Complex64::new(0.0, -xi).powu(k as u32) * e
                })
                .collect();
            fft.process(&mut buf);
            *slot = buf.iter().map(|c| c.re / period).collect();
        }
        Ok(Self { t, du, half_width, n, vals })
    }

    fn node(&self, k: usize, m: i64) -> f64 {
        self.vals[k][m.rem_euclid(self.n as i64) as usize]
    }

    /// `P^{(k)}(u)` for `k ≤ 2` by quintic Hermite interpolation; 0 outside the window.
    pub fn deriv(&self, k: usize, u: f64) -> f64 {
        if u.abs() > self.half_width {
            return 0.0;
        }
        let s = u / self.du;
        let m = s.floor();
        let tau = s - m;
        let m = m as i64;
        let h = self.du;
        hermite5(
            [self.node(k, m), self.node(k + 1, m), self.node(k + 2, m)],
            [self.node(k, m + 1), self.node(k + 1, m + 1), self.node(k + 2, m + 1)],
            h,
            tau,
        )
    }

    pub fn max_value(&self) -> f64 {
        self.vals[0].iter().copied().fold(0.0, f64::max)
    }
}

/// Quintic Hermite interpolant from `(f, f', f'')` at both ends of a cell.
pub fn hermite5(a: [f64; 3], b: [f64; 3], h: f64, tau: f64) -> f64 {
    let t = tau;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
    h0 * a[0] + h * h1 * a[1] + h * h * h2 * a[2] + h3 * b[0] + h * h4 * b[1] + h * h * h5 * b[2]
}

/// Fourier-inversion evaluator of `p^{𝔎_w}` and its derivatives.
#[derive(Debug, Clone)]
pub struct FrozenKernelEvaluator {
    pub symbol: FrozenSymbol,
    pub quad_cfg: DensityConfig,
}

impl FrozenKernelEvaluator {
    pub fn new(symbol: FrozenSymbol) -> Self {
        Self { symbol, quad_cfg: DensityConfig::default() }
    }

    pub fn with_config(mut self, cfg: DensityConfig) -> Self {
        self.quad_cfg = cfg;
        self
    }

    fn check(&self, t: f64, x: &[f64], y: &[f64]) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("kernel needs t > 0, got {t}")));
        }
        let d = self.symbol.dim();
        if x.len() != d || y.len() != d {
            return Err(Error::Invalid("point dimension does not match the coefficient set".into()));
        }
        Ok(())
    }

    /// Upper bound of `Σ_{k≠0} P(u + kP)` by the single-jump tail `t c_κ c_J ν`.
    fn alias_bound(&self, t: f64, reach: f64, period: f64) -> f64 {
        let c = self.symbol.coeffs();
        let prof = &c.profile;
        let mut s = 0.0;
        for k in 1..=400 {
            let v = k as f64 * period - reach;
            s += prof.nu(v);
        }
        4.0 * t * c.c_kappa * c.c_j * s
    }

    /// Trapezoid samples adequate for `|u| ≤ u_max` at time `t`.
    pub fn slice(&self, t: f64, u_max: f64) -> Result<SpectralSlice> {
        if self.symbol.dim() != 1 {
            return Err(Error::Unsupported("spectral slices are one-dimensional".into()));
        }
        let cfg = &self.quad_cfg;
        let radius = self.symbol.truncation_radius(t, cfg.abs_tol)?;
        let rt = self.symbol.coeffs().profile.r_t(t)?;
        let shift = t * self.symbol.drift()[0].abs() + 10.0 * rt + t * 10.0 * (1.0 + (1.0 / rt).ln().abs());
        let reach = u_max.abs() + shift;
        let mut period = (2.0 * reach + 40.0).max(64.0 * rt);
        while self.alias_bound(t, reach, period) > cfg.abs_tol {
            period *= 2.0;
            if period > cfg.period_cap {
                return Err(Error::Resolution(format!("aliasing period exceeds {:.3e}", cfg.period_cap)));
            }
        }
        let eta = 2.0 * PI / period;
        let n = (radius / eta).ceil() as usize + 1;
        if n > cfg.max_points {
            return Err(Error::Resolution(format!("{n} inversion points exceed the cap {}", cfg.max_points)));
        }
        let e = (0..n).map(|j| (-t * self.symbol.psi_1d(eta * j as f64)).exp()).collect();
        Ok(SpectralSlice { t, eta, period, radius, e })
    }

    /// Raw `P(u)`, `∇P` or second derivatives in d = 2 through Hankel integrals.
    fn hankel(&self, t: f64, r: f64, order: u32) -> Result<f64> {
        let cfg = &self.quad_cfg;
        let radius = self.symbol.truncation_radius(t, cfg.abs_tol)?;
        let e = |rho: f64| (-t * self.symbol.jump_part(rho).re).exp();
        let f = |rho: f64| -> f64 {
            let x = rho * r;
            let k = match order {
                0 => rho * bessel_j0(x),
                1 => -rho * rho * bessel_j1(x),
                _ => {
                    let j1p = if x < 1e-8 { 0.5 } else { bessel_j0(x) - bessel_j1(x) / x };
                    -rho * rho * rho * j1p
                }
            };
            k * e(rho)
        };
        let breaks: Vec<f64> = if r > 0.0 {
            let step = (PI / r).max(radius / 2000.0);
            (1..).map(|i| i as f64 * step).take_while(|b| *b < radius).collect()
        } else {
            vec![]
        };
        let q = integrate_with_breaks(f, 0.0, radius, &breaks, &QuadConfig::new(cfg.abs_tol, 1e-10, 20000))?;
        Ok(q.value / (2.0 * PI))
    }

    fn shifted_u(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        y.iter().zip(x).map(|(a, b)| a - b).collect()
    }

    /// Raw `∂_x^β p^{𝔎_w}(t, x, y)` without clamping.
    pub fn raw_derivative(&self, t: f64, x: &[f64], y: &[f64], beta: &[usize]) -> Result<f64> {
        self.check(t, x, y)?;
        if beta.len() != self.symbol.dim() {
            return Err(Error::Invalid("multi-index of wrong dimension".into()));
        }
        let order: usize = beta.iter().sum();
        let u = self.shifted_u(x, y);
        if self.symbol.dim() == 1 {
            if order > 4 {
                return Err(Error::Invalid(format!("derivative order {order} above 4")));
            }
            let s = self.slice(t, u[0].abs())?;
            return Ok(s.eval(u[0], order as u32));
        }
        if order > 2 {
            return Err(Error::Invalid(format!("derivative order {order} above 2")));
        }
        // p(t, x, y) = f(|u − t b(w)|) with f radial
        let b = self.symbol.drift();
        let v: Vec<f64> = u.iter().zip(b).map(|(a, c)| a - t * c).collect();
        let r = norm(&v);
        match order {
            0 => self.hankel(t, r, 0),
            1 => {
                if r < 1e-14 {
                    return Ok(0.0);
                }
                let i = beta.iter().position(|b| *b == 1).unwrap();
                // ∂_x = −∂_u
                Ok(-self.hankel(t, r, 1)? * v[i] / r)
            }
            _ => {
                let (i, j) = match beta.iter().position(|b| *b == 2) {
                    Some(i) => (i, i),
                    None => (0, 1),
                };
                let f2 = self.hankel(t, r, 2)?;
                if r < 1e-14 {
                    return Ok(if i == j { f2 } else { 0.0 });
                }
                let f1 = self.hankel(t, r, 1)?;
                let (ei, ej) = (v[i] / r, v[j] / r);
                let delta = if i == j { 1.0 } else { 0.0 };
                Ok(f2 * ei * ej + f1 * (delta - ei * ej) / r)
            }
        }
    }

    /// `p^{𝔎_w}(t, x, y)` clamped at 0, with the raw value and clamp recorded.
    pub fn density(&self, t: f64, x: &[f64], y: &[f64]) -> Result<DensityValue> {
        let zero = vec![0; self.symbol.dim()];
        let raw = self.raw_derivative(t, x, y, &zero)?;
        Ok(DensityValue { value: raw.max(0.0), raw, clamp: (-raw).max(0.0), quad_err: 2.0 * self.quad_cfg.abs_tol })
    }

    /// `∂_x^β p^{𝔎_w}(t, x, y)` for `|β| ≤ 2`.
    pub fn density_derivative(&self, t: f64, x: &[f64], y: &[f64], beta: &[usize]) -> Result<f64> {
        if beta.iter().sum::<usize>() > 2 {
            return Err(Error::Invalid("derivatives of order above 2 are not offered".into()));
        }
        self.raw_derivative(t, x, y, beta)
    }

    fn gradient(&self, t: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let d = self.symbol.dim();
        (0..d)
            .map(|i| {
                let mut beta = vec![0; d];
                beta[i] = 1;
                self.raw_derivative(t, x, y, &beta)
            })
            .collect()
    }

    /// `δ_r(t, x, y; z) = p(t, x+z, y) − p(t, x, y) − 1_{|z|<r} ⟨z, ∇_x p(t, x, y)⟩`.
    pub fn delta_increment(&self, r: f64, t: f64, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        self.check(t, x, y)?;
        if norm(z) == 0.0 {
            return Ok(0.0);
        }
        let zero = vec![0; self.symbol.dim()];
        let xz: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
        let mut d = self.raw_derivative(t, &xz, y, &zero)? - self.raw_derivative(t, x, y, &zero)?;
        if norm(z) < r {
            let g = self.gradient(t, x, y)?;
            d -= z.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(d)
    }

    /// `𝓛^{𝔎_v}_x p^{𝔎_w}(t, x, y)` in physical space (d = 1) at split radius `r`
    /// (default `r_t`); d = 2 falls back to the Fourier multiplier route.
    pub fn apply_frozen_generator(&self, v: &[f64], r: Option<f64>, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(t, x, y)?;
        let coeffs = self.symbol.coeffs().clone();
        let rt = coeffs.profile.r_t(t)?;
        let r = r.unwrap_or(rt);
        if self.symbol.dim() != 1 {
            let sv = FrozenSymbol::new(coeffs, v)?;
            return self.apply_generator_spectral(&sv, t, x, y);
        }
        let grid = DensityGrid::build(&self.symbol, t, rt / 32.0, (64.0f64).max(64.0 * rt))?;
        self.generator_on_grid(&grid, v, r, x[0], y[0])
    }

    /// Physical generator using a prebuilt density grid of `p^{𝔎_w}(t, ·)`.
    pub fn generator_on_grid(&self, grid: &DensityGrid, v: &[f64], r: f64, x: f64, y: f64) -> Result<f64> {
        let coeffs = self.symbol.coeffs();
        let b = coeffs.effective_drift(v, r)?[0];
        self.generator_with(grid, b, |z| coeffs.kappa(v, &[z]) * coeffs.j(&[z]), r, x, y)
    }

    /// `−b ∂_u P(u) + ∫ δ_r(z) m(z) dz` on a density grid, `u = y − x`, d = 1.
    pub fn generator_with<M: Fn(f64) -> f64>(
        &self,
        grid: &DensityGrid,
        b: f64,
        m: M,
        r: f64,
        x: f64,
        y: f64,
    ) -> Result<f64> {
        let coeffs = self.symbol.coeffs();
        let t = grid.t;
        let rt = coeffs.profile.r_t(t)?;
        let u = y - x;
        let p = |k: usize, s: f64| grid.deriv(k, s);
        let scale = grid.max_value().max(1e-300);
        let cfg = QuadConfig::new(1e-11 * scale, 1e-9, 8000);

        let drift_term = -b * p(1, u);

        // |z| < r/8: δ = z² ∫₀¹ (1−θ) P''(u − θz) dθ
        let (gx, gw) = gauss_legendre(6);
        let taylor = |z: f64| -> f64 {
            let mut s = 0.0;
            for (xq, wq) in gx.iter().zip(&gw) {
                let th = 0.5 * (xq + 1.0);
                s += 0.5 * wq * (1.0 - th) * p(2, u - th * z);
            }
            z * z * s
        };
        let z_small = r / 8.0;
        let w_hi = z_small.ln();
        let w_lo = w_hi - 60.0;
        let mut total = drift_term;
        for sgn in [1.0, -1.0] {
            let q = integrate_with_breaks(
                |w| {
                    let z = sgn * w.exp();
                    w.exp() * taylor(z) * m(z)
                },
                w_lo,
                w_hi,
                &[],
                &cfg,
            )?;
            total += q.value;
        }

        let delta = |z: f64| -> f64 {
            let mut d = p(0, u - z) - p(0, u);
            if z.abs() < r {
                d += z * p(1, u);
            }
            d
        };
        let reach = grid.half_width - u.abs();
        if reach <= z_small {
            return Err(Error::Resolution("density grid too narrow for the requested point".into()));
        }
        let mut breaks = vec![r, -r, 1.0, -1.0, u, u - rt, u + rt, u - 4.0 * rt, u + 4.0 * rt];
        breaks.extend(coeffs.z_breaks.iter().copied());
        let q_pos = integrate_with_breaks(|z| delta(z) * m(z), z_small, reach, &breaks, &cfg)?;
        let q_neg = integrate_with_breaks(|z| delta(z) * m(z), -reach, -z_small, &breaks, &cfg)?;
        total += q_pos.value + q_neg.value;

        // |z| > reach: P(u − z) lies outside the window
        let far_cfg = QuadConfig::new(1e-14, 1e-10, 2000);
        let tail_p = integrate_to_infinity(&m, reach, &[], &far_cfg)?.value;
        let tail_m = integrate_to_infinity(|z| m(-z), reach, &[], &far_cfg)?.value;
        total -= p(0, u) * (tail_p + tail_m);
        Ok(total)
    }

    /// `𝓛^{𝔎_v}_x p^{𝔎_w}(t,x,y) = (2π)^{−d} ∫ e^{−i⟨y−x,ξ⟩}(−Ψ_v(ξ)) e^{−tΨ_w(ξ)} dξ`.
    pub fn apply_generator_spectral(&self, sym_v: &FrozenSymbol, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(t, x, y)?;
        let u = self.shifted_u(x, y);
        if self.symbol.dim() == 1 {
            let s = self.slice(t, u[0].abs())?;
            return Ok(s.eval_weighted(u[0], |xi| -sym_v.psi_1d(xi)));
        }
        // radial jump part and the drift of v acting as b(v)·∇_x
        let b = self.symbol.drift();
        let w: Vec<f64> = u.iter().zip(b).map(|(a, c)| a - t * c).collect();
        let r = norm(&w);
        let cfg = &self.quad_cfg;
        let radius = self.symbol.truncation_radius(t, cfg.abs_tol)?;
        let f = |rho: f64| {
            -rho * bessel_j0(rho * r) * sym_v.jump_part(rho).re * (-t * self.symbol.jump_part(rho).re).exp()
        };
        let breaks: Vec<f64> = if r > 0.0 {
            let step = (PI / r).max(radius / 2000.0);
            (1..).map(|i| i as f64 * step).take_while(|b| *b < radius).collect()
        } else {
            vec![]
        };
        let jump = integrate_with_breaks(f, 0.0, radius, &breaks, &QuadConfig::new(cfg.abs_tol, 1e-10, 20000))?.value
            / (2.0 * PI);
        let g = self.gradient(t, x, y)?;
        let drift: f64 = sym_v.drift().iter().zip(&g).map(|(a, c)| a * c).sum();
        Ok(jump + drift)
    }

    /// Fourth-order central difference of `t ↦ p^{𝔎_w}(t, x, y)`.
    pub fn time_derivative_fd(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        let h = 1e-2 * t;
        let zero = vec![0; self.symbol.dim()];
        let f = |s: f64| self.raw_derivative(s, x, y, &zero);
        Ok((-f(t + 2.0 * h)? + 8.0 * f(t + h)? - 8.0 * f(t - h)? + f(t - 2.0 * h)?) / (12.0 * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::example_catalog;
    use std::sync::Arc;

    fn cauchy(t: f64, u: f64) -> f64 {
        let g = PI * t;
        g / (PI * (g * g + u * u))
    }

    fn cauchy_eval() -> FrozenKernelEvaluator {
        let (set, _) = example_catalog("cauchy-const").unwrap();
        FrozenKernelEvaluator::new(FrozenSymbol::new(Arc::new(set), &[0.0]).unwrap())
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let f = |x: f64| 1.0 + x - 2.0 * x.powi(3) + 0.5 * x.powi(5);
        let d = |x: f64| 1.0 - 6.0 * x * x + 2.5 * x.powi(4);
        let s = |x: f64| -12.0 * x + 10.0 * x.powi(3);
        let (a, h) = (0.3, 0.7);
        for &tau in &[0.0, 0.25, 0.6, 1.0] {
            let v = hermite5([f(a), d(a), s(a)], [f(a + h), d(a + h), s(a + h)], h, tau);
            assert!((v - f(a + tau * h)).abs() < 1e-13);
        }
    }

    #[test]
    fn cauchy_on_diagonal() {
        let ev = cauchy_eval();
        let p = ev.density(0.1, &[0.0], &[0.0]).unwrap();
        assert!((p.value - 1.0 / (PI * PI * 0.1)).abs() < 1e-8, "{p:?}");
        assert!((p.value - 1.013_211_836_4).abs() < 1e-8);
    }

    #[test]
    fn cauchy_gradient_closed_form() {
        let ev = cauchy_eval();
        let t = 0.1;
        let g = PI * t;
        // ∂_x p(t, x, y) at y − x = 1
        let exact = 2.0 * g * 1.0 / (PI * (g * g + 1.0).powi(2));
        let v = ev.density_derivative(t, &[0.0], &[1.0], &[1]).unwrap();
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        let s = ev.density_derivative(t, &[0.3], &[0.3], &[1]).unwrap();
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn grid_matches_point_values() {
        let ev = cauchy_eval();
        let t = 0.05;
        let rt = 4.0 * t;
        let grid = DensityGrid::build(&ev.symbol, t, rt / 32.0, 64.0).unwrap();
        for &u in &[0.0f64, 0.013, 0.31, -1.7, 7.3] {
            // periodic images at distance 256: Σ_{k≠0} t/(256k − |u|)²
            let images: f64 = (1..1000).map(|k| t / (256.0 * k as f64 - u.abs()).powi(2) + t / (256.0 * k as f64 + u.abs()).powi(2)).sum();
            let err = (grid.deriv(0, u) - cauchy(t, u)).abs();
            assert!(err < 1.05 * images + 1e-9, "{u}: {err} vs {images}");
        }
    }

    #[test]
    fn generator_matches_time_derivative_for_cauchy() {
        let ev = cauchy_eval();
        let t = 0.05;
        let g = PI * t;
        for &u in &[0.0, 0.1, 0.8] {
            // ∂_t of γ/(π(γ²+u²)) with γ = πt
            let exact = PI * (u * u - g * g) / (PI * (g * g + u * u).powi(2));
            let l = ev.apply_frozen_generator(&[0.0], None, t, &[0.0], &[u]).unwrap();
            assert!((l - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{u}: {l} vs {exact}");
            let fd = ev.time_derivative_fd(t, &[0.0], &[u]).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{u}: {fd} vs {exact}");
        }
    }

    #[test]
    fn generator_identity_ex1() {
        let (set, _) = example_catalog("ex1").unwrap();
        let set = Arc::new(set);
        let w = [0.4];
        let ev = FrozenKernelEvaluator::new(FrozenSymbol::new(set, &w).unwrap());
        for &t in &[0.01, 0.05] {
            for &u in &[-0.3, 0.0, 0.05, 0.6] {
                let l = ev.apply_frozen_generator(&w, None, t, &[0.0], &[u]).unwrap();
                let fd = ev.time_derivative_fd(t, &[0.0], &[u]).unwrap();
                let sp = ev.apply_generator_spectral(&ev.symbol, t, &[0.0], &[u]).unwrap();
                assert!((l - fd).abs() <= 1e-4f64.max(1e-2 * fd.abs()), "t={t} u={u}: {l} vs {fd}");
                assert!((sp - fd).abs() <= 1e-4f64.max(1e-3 * fd.abs()), "t={t} u={u}: {sp} vs {fd}");
            }
        }
    }

    #[test]
    fn generator_is_split_invariant() {
        let (set, _) = example_catalog("ex1").unwrap();
        let ev = FrozenKernelEvaluator::new(FrozenSymbol::new(Arc::new(set), &[0.4]).unwrap());
        let t = 0.03;
        let a = ev.apply_frozen_generator(&[0.7], None, t, &[0.1], &[0.3]).unwrap();
        let b = ev.apply_frozen_generator(&[0.7], Some(1.0), t, &[0.1], &[0.3]).unwrap();
        assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn delta_increment_cases() {
        let ev = cauchy_eval();
        let t = 0.1;
        assert_eq!(ev.delta_increment(0.4, t, &[0.0], &[0.2], &[0.0]).unwrap(), 0.0);
        let far = ev.delta_increment(0.4, t, &[0.0], &[0.2], &[0.5]).unwrap();
        let plain = cauchy(t, 0.2 - 0.5) - cauchy(t, 0.2);
        assert!((far - plain).abs() < 1e-9);
    }

    #[test]
    fn cauchy_2d_density() {
        let (set, _) = example_catalog("cauchy-2d").unwrap();
        let ev = FrozenKernelEvaluator::new(FrozenSymbol::new(Arc::new(set), &[0.0, 0.0]).unwrap());
        let t = 0.1;
        let g = 2.0 * PI * t;
        for &r in &[0.0, 0.3, 2.0] {
            let exact = g / (2.0 * PI) * (g * g + r * r).powf(-1.5);
            let v = ev.density(t, &[0.0, 0.0], &[0.6 * r, 0.8 * r]).unwrap().value;
            assert!((v - exact).abs() < 1e-6 * exact, "{r}: {v} vs {exact}");
        }
        // radial derivative against the closed form
        let r: f64 = 0.5;
        let exact = -3.0 * g / (2.0 * PI) * r * (g * g + r * r).powf(-2.5);
        let v = ev.density_derivative(t, &[0.0, 0.0], &[r, 0.0], &[1, 0]).unwrap();
        assert!((v + exact).abs() < 1e-6 * exact.abs(), "{v} vs {}", -exact);
    }
}
