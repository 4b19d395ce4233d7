//! Parametrix series on a one-dimensional cell grid.
//!
//! Kernels are stored as averages over `x`-cells and `y`-cells of width `Δ`
//! on `[x_min, x_max]`, plus two columns holding the mass of `y` beyond
//! either end. Every translation-invariant frozen kernel entry comes from one
//! FFT per column class (distinct frozen coefficients); time integrals use
//! piecewise-constant-in-time Galerkin cells of width `Δt`, which turns the
//! Volterra recursion into block lower-triangular matrix products.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSet, DriftParameters};
use crate::error::{Error, Result};
use crate::frozen::{DensityGrid, FrozenKernelEvaluator};
use crate::quadrature::{oscillatory_tail, QuadConfig};
use crate::special::{beta, box_window, hat0_window, sinc};
use crate::symbol::{FrozenSymbol, SymbolBank};

/// Grid and budget parameters of a table build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_max: f64,
    pub output_times: Vec<f64>,
    /// FFT samples per cell.
    pub oversample: usize,
    pub fft_log2: u32,
    /// Explicit series terms `q_1 … q_n` kept for diagnostics.
    pub series_terms: usize,
    /// ε₀; the midpoint of the admissible window when absent.
    pub eps0: Option<f64>,
    /// Tolerance the analytic tail bound is compared with.
    pub tolerance: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            x_min: -2.5,
            x_max: 3.5,
            dx: 0.025,
            dt: 2.5e-3,
            t_max: 0.05,
            output_times: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            oversample: 8,
            fft_log2: 16,
            series_terms: 3,
            eps0: None,
            tolerance: 1e-3,
        }
    }
}

impl EngineConfig {
    /// Same domain and outputs with `Δ` and `Δt` halved.
    pub fn refined(&self) -> Self {
        let mut c = self.clone();
        c.dx *= 0.5;
        c.dt *= 0.5;
        c.fft_log2 += 1;
        c
    }

    pub fn cells(&self) -> usize {
        ((self.x_max - self.x_min) / self.dx).round() as usize
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    /// Step index of each output time.
    pub fn output_steps(&self) -> Result<Vec<usize>> {
        self.output_times
            .iter()
            .map(|&t| {
                let m = (t / self.dt).round();
                if !(t > 0.0) || (m * self.dt - t).abs() > 1e-9 * t.max(1.0) || m as usize > self.steps() {
                    return Err(Error::Invalid(format!("output time {t} is not a positive multiple of dt within t_max")));
                }
                Ok(m as usize)
            })
            .collect()
    }

    fn far_cells(&self) -> usize {
        self.cells() + 16
    }

    pub fn validate(&self) -> Result<()> {
        let width = self.x_max - self.x_min;
        if !(self.dx > 0.0 && width > 0.0) {
            return Err(Error::Invalid("need dx > 0 and x_max > x_min".into()));
        }
        if ((self.cells() as f64) * self.dx - width).abs() > 1e-9 * width {
            return Err(Error::Invalid(format!("dx = {} does not divide the domain width {width}", self.dx)));
        }
        if !(self.dt > 0.0 && self.t_max > 0.0) || ((self.steps() as f64) * self.dt - self.t_max).abs() > 1e-9 {
            return Err(Error::Invalid(format!("dt = {} does not divide t_max = {}", self.dt, self.t_max)));
        }
        if self.output_times.is_empty() {
            return Err(Error::Invalid("no output times".into()));
        }
        let steps = self.output_steps()?;
        if steps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("output times must be increasing".into()));
        }
        if self.oversample < 2 || !(10..=22).contains(&self.fft_log2) {
            return Err(Error::Invalid("oversample ≥ 2 and fft_log2 in 10..=22 required".into()));
        }
        let nf = 1usize << self.fft_log2;
        if 4 * self.far_cells() * self.oversample > nf {
            return Err(Error::Resolution(format!(
                "FFT length 2^{} too short for {} cells; raise fft_log2",
                self.fft_log2,
                self.cells()
            )));
        }
        if self.series_terms == 0 {
            return Err(Error::Invalid("series_terms must be at least 1".into()));
        }
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn add_scaled(&mut self, a: f64, o: &Mat) {
        for (x, y) in self.data.iter_mut().zip(&o.data) {
            *x += a * y;
        }
    }

    fn scaled(&self, a: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| a * v).collect() }
    }

    /// `self += α · a[:, :k] · b` with `k = b.rows`.
    fn gemm_acc(&mut self, alpha: f64, a: &Mat, b: &Mat) {
        assert!(a.rows == self.rows && b.cols == self.cols && a.cols >= b.rows);
        // SAFETY: dimensions and strides were checked against the buffers above.
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                b.rows,
                b.cols,
                alpha,
                a.data.as_ptr(),
                a.cols as isize,
                1,
                b.data.as_ptr(),
                b.cols as isize,
                1,
                1.0,
                self.data.as_mut_ptr(),
                self.cols as isize,
                1,
            );
        }
    }
}

/// Time weighting of a frozen kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeWindow {
    /// Value at time `t`.
    Point(f64),
    /// `∫` over `[kΔt, (k+1)Δt]`.
    Box(usize),
    /// Triangle of half-width `Δt` centred at `kΔt` (one-sided for `k = 0`).
    Hat(usize),
}

impl TimeWindow {
    fn value(self, psi: Complex64, dt: f64) -> Complex64 {
        match self {
            TimeWindow::Point(t) => (-t * psi).exp(),
            TimeWindow::Box(k) => {
                let z = dt * psi;
                dt * (-(k as f64) * z).exp() * box_window(z)
            }
            TimeWindow::Hat(0) => dt * hat0_window(dt * psi),
            TimeWindow::Hat(k) => {
                let z = dt * psi;
                let b = box_window(z);
                dt * (-((k - 1) as f64) * z).exp() * b * b
            }
        }
    }

    fn near_delta(self) -> bool {
        matches!(self, TimeWindow::Box(0) | TimeWindow::Hat(0))
    }
}

/// Spatial multiplier applied to the frozen kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelType {
    /// `p^{𝔎_y}`.
    P,
    /// `(𝓛_x − 𝓛^{𝔎_y}_x) p^{𝔎_y}`.
    Q,
    /// `𝓛_x p^{𝔎_y}`.
    L,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    One,
    Term(usize),
    Drift,
}

/// One kernel matrix to assemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub ty: KernelType,
    pub window: TimeWindow,
}

/// Uniform cell grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellGrid {
    pub x_min: f64,
    pub dx: f64,
    pub n: usize,
}

impl CellGrid {
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.n as f64 * self.dx
    }

    /// Cell containing `x`.
    pub fn cell_of(&self, x: f64) -> Result<usize> {
        let k = ((x - self.x_min) / self.dx).floor();
        if !(k >= 0.0 && (k as usize) < self.n) {
            return Err(Error::Domain(format!("x = {x} outside [{}, {})", self.x_min, self.x_max())));
        }
        Ok(k as usize)
    }
}

struct WindowCache {
    psi: Vec<Complex64>,
    ez: Vec<Complex64>,
    bz: Vec<Complex64>,
    h0: Vec<Complex64>,
}

impl WindowCache {
    fn new(psi: Vec<Complex64>, dt: f64) -> Self {
        let ez = psi.iter().map(|p| (-dt * p).exp()).collect();
        let bz = psi.iter().map(|p| box_window(dt * p)).collect();
        let h0 = psi.iter().map(|p| hat0_window(dt * p)).collect();
        Self { psi, ez, bz, h0 }
    }
}

struct Factory {
    grid: CellGrid,
    dt: f64,
    oversample: usize,
    nf: usize,
    period: f64,
    far: usize,
    xi: Vec<f64>,
    s2: Vec<f64>,
    phi: Vec<Vec<Complex64>>,
    bank: Arc<SymbolBank>,
    n_terms: usize,
    has_drift: bool,
    col_params: Vec<Vec<f64>>,
    row_params: Vec<Vec<f64>>,
    classes: Vec<Vec<usize>>,
    fft: Arc<dyn Fft<f64>>,
    gp_cfg: QuadConfig,
}

impl Factory {
    fn new(bank: Arc<SymbolBank>, cfg: &EngineConfig) -> Result<Self> {
        let coeffs = bank.coeffs().clone();
        if coeffs.dim() != 1 {
            return Err(Error::Unsupported("the table engine is one-dimensional".into()));
        }
        let n_terms = coeffs
            .separable_terms()
            .ok_or_else(|| Error::Unsupported("the table engine needs a separable κ".into()))?
            .len();
        let grid = CellGrid { x_min: cfg.x_min, dx: cfg.dx, n: cfg.cells() };
        let nf = 1usize << cfg.fft_log2;
        let delta = cfg.dx / cfg.oversample as f64;
        let period = nf as f64 * delta;
        let half = nf / 2;
        let xi: Vec<f64> = (0..=half).map(|k| 2.0 * PI * k as f64 / period).collect();
        let s2 = xi.iter().map(|x| sinc(0.5 * x * cfg.dx).powi(2)).collect();
        let phi = (0..n_terms).map(|r| xi.iter().map(|&x| bank.table(r).eval(x)).collect()).collect();
        let params = |x: f64| coeffs.frozen_parameters(&[x]).expect("separable");
        let row_params: Vec<Vec<f64>> = grid.centers().into_iter().map(params).collect();
        let mut col_params = row_params.clone();
        col_params.push(params(grid.x_max()));
        col_params.push(params(grid.x_min));
        let mut map: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
        for (j, p) in col_params.iter().enumerate() {
            map.entry(p.iter().map(|v| v.to_bits()).collect()).or_default().push(j);
        }
        let classes = map.into_values().collect();
        let fft = FftPlanner::new().plan_fft_forward(nf);
        Ok(Self {
            grid,
            dt: cfg.dt,
            oversample: cfg.oversample,
            nf,
            period,
            far: cfg.far_cells(),
            xi,
            s2,
            phi,
            bank,
            n_terms,
            has_drift: coeffs.has_drift(),
            col_params,
            row_params,
            classes,
            fft,
            gp_cfg: QuadConfig::new(1e-13, 1e-10, 200),
        })
    }

    fn factors(&self, ty: KernelType) -> Vec<Factor> {
        match ty {
            KernelType::P => vec![Factor::One],
            _ => {
                let mut f: Vec<Factor> = (0..self.n_terms).map(Factor::Term).collect();
                if self.has_drift {
                    f.push(Factor::Drift);
                }
                f
            }
        }
    }

    fn coef(&self, ty: KernelType, f: Factor, i: usize, j: usize) -> f64 {
        let idx = match f {
            Factor::One => return 1.0,
            Factor::Term(r) => r,
            Factor::Drift => self.n_terms,
        };
        match ty {
            KernelType::P => 1.0,
            KernelType::Q => self.col_params[j][idx] - self.row_params[i][idx],
            KernelType::L => -self.row_params[i][idx],
        }
    }

    fn psi_at(&self, params: &[f64], xi: f64) -> Complex64 {
        let mut s = Complex64::new(0.0, -xi * params[self.n_terms]);
        for (r, c) in params[..self.n_terms].iter().enumerate() {
            s += c * self.bank.table(r).eval(xi);
        }
        s
    }

    fn factor_at(&self, f: Factor, xi: f64) -> Complex64 {
        match f {
            Factor::One => Complex64::new(1.0, 0.0),
            Factor::Term(r) => self.bank.table(r).eval(xi),
            Factor::Drift => Complex64::new(0.0, -xi),
        }
    }

    /// Multiplier of `(window, factor)` on the FFT frequencies and the
    /// constant removed from it.
    fn multiplier(&self, cache: &WindowCache, w: TimeWindow, f: Factor, subtract: bool) -> (Vec<Complex64>, f64) {
        let half = self.nf / 2;
        let dt = self.dt;
        let mut m: Vec<Complex64> = (0..half)
            .map(|k| {
                let wv = match w {
                    TimeWindow::Point(t) => (-t * cache.psi[k]).exp(),
                    TimeWindow::Box(j) => dt * cache.ez[k].powi(j as i32) * cache.bz[k],
                    TimeWindow::Hat(0) => dt * cache.h0[k],
                    TimeWindow::Hat(j) => dt * cache.ez[k].powi(j as i32 - 1) * cache.bz[k] * cache.bz[k],
                };
                let fv = match f {
                    Factor::One => Complex64::new(1.0, 0.0),
                    Factor::Term(r) => self.phi[r][k],
                    Factor::Drift => Complex64::new(0.0, -self.xi[k]),
                };
                fv * wv
            })
            .collect();
        let c = if subtract { m[half - 1].re } else { 0.0 };
        for (v, s) in m.iter_mut().zip(&self.s2) {
            *v = (*v - c) * s;
        }
        (m, c)
    }

    /// Samples at `u = kΔ`, `|k| ≤ far`, of the cell-averaged inverse
    /// transforms of two multipliers sharing one complex FFT.
    fn transform_pair(&self, a: &(Vec<Complex64>, f64), b: Option<&(Vec<Complex64>, f64)>) -> [Vec<f64>; 2] {
        let half = self.nf / 2;
        let i = Complex64::new(0.0, 1.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut buf = vec![zero; self.nf];
        for k in 0..half {
            let x1 = a.0[k];
            let x2 = b.map_or(zero, |b| b.0[k]);
            buf[k] = x1 + i * x2;
            if k > 0 {
                buf[self.nf - k] = x1.conj() + i * x2.conj();
            }
        }
        self.fft.process(&mut buf);
        let far = self.far as isize;
        let sample = |part: usize| -> Vec<f64> {
            (-far..=far)
                .map(|k| {
                    let m = (k * self.oversample as isize).rem_euclid(self.nf as isize) as usize;
                    let v = if part == 0 { buf[m].re } else { buf[m].im };
                    v / self.period
                })
                .collect()
        };
        let mut out = [sample(0), sample(1)];
        out[0][self.far] += a.1 / self.grid.dx;
        if let Some(b) = b {
            out[1][self.far] += b.1 / self.grid.dx;
        }
        out
    }

    /// Mass beyond `±U`, `U = (far + ½)Δ`, of the `x`-averaged kernel.
    fn far_mass(&self, params: &[f64], w: TimeWindow, f: Factor, c: f64, right: bool) -> Result<f64> {
        let u = (self.far as f64 + 0.5) * self.grid.dx;
        let dx = self.grid.dx;
        let m = |xi: f64| -> Complex64 {
            (self.factor_at(f, xi) * w.value(self.psi_at(params, xi), self.dt) - c) * sinc(0.5 * xi * dx)
        };
        let sgn = if right { 1.0 } else { -1.0 };
        let g = |xi: f64| -> f64 {
            if xi == 0.0 {
                return 0.0;
            }
            (Complex64::new(0.0, -sgn * xi * u).exp() * m(xi)).im / xi
        };
        let q = oscillatory_tail(g, 0.0, PI / u, &self.gp_cfg)?;
        Ok(0.5 * m(0.0).re + sgn * q.value / PI)
    }

    /// Matrices for `specs` restricted to `rows`; tail columns when `tails`.
    fn assemble(&self, specs: &[KernelSpec], rows: &[usize], tails: bool) -> Result<Vec<Mat>> {
        let n = self.grid.n;
        let cols = if tails { n + 2 } else { n };
        let dx = self.grid.dx;
        let far = self.far;
        let mut mats: Vec<Mat> = specs.iter().map(|_| Mat::zeros(rows.len(), cols)).collect();
        for class in &self.classes {
            let members: Vec<usize> = class.iter().copied().filter(|&j| j < cols).collect();
            if members.is_empty() {
                continue;
            }
            let params = &self.col_params[members[0]];
            let psi: Vec<Complex64> = (0..self.nf / 2)
                .map(|k| {
                    let mut s = Complex64::new(0.0, -self.xi[k] * params[self.n_terms]);
                    for (c, phi) in params[..self.n_terms].iter().zip(&self.phi) {
                        s += c * phi[k];
                    }
                    s
                })
                .collect();
            let cache = WindowCache::new(psi, self.dt);
            // every (spec, factor) multiplier, transformed two at a time
            let mut jobs: Vec<(usize, Factor)> = Vec::new();
            for (si, spec) in specs.iter().enumerate() {
                for f in self.factors(spec.ty) {
                    jobs.push((si, f));
                }
            }
            let mut results: Vec<(Vec<f64>, f64)> = Vec::with_capacity(jobs.len());
            for pair in jobs.chunks(2) {
                let mults: Vec<(Vec<Complex64>, f64)> = pair
                    .iter()
                    .map(|&(si, f)| {
                        let spec = specs[si];
                        let subtract = spec.ty != KernelType::P && spec.window.near_delta() && f != Factor::One;
                        self.multiplier(&cache, spec.window, f, subtract)
                    })
                    .collect();
                let [e0, e1] = self.transform_pair(&mults[0], mults.get(1));
                results.push((e0, mults[0].1));
                if let Some(m) = mults.get(1) {
                    results.push((e1, m.1));
                }
            }
            let mut results = results.into_iter();
            for (spec, mat) in specs.iter().zip(mats.iter_mut()) {
                let factors = self.factors(spec.ty);
                let samples: Vec<(Vec<f64>, f64)> = factors.iter().map(|_| results.next().unwrap()).collect();
                for &j in &members {
                    if j < n {
                        for (ri, &i) in rows.iter().enumerate() {
                            let k = (j as isize - i as isize + far as isize) as usize;
                            let mut v = 0.0;
                            for (fi, &f) in factors.iter().enumerate() {
                                v += self.coef(spec.ty, f, i, j) * samples[fi].0[k];
                            }
                            mat.data[ri * cols + j] = v;
                        }
                        continue;
                    }
                    let right = j == n;
                    let mut masses = Vec::with_capacity(factors.len());
                    for (fi, &f) in factors.iter().enumerate() {
                        let (e, c) = &samples[fi];
                        let tail = self.far_mass(params, spec.window, f, *c, right)?;
                        // suffix[k] = Σ_{k' ≥ k} E(±k'Δ)
                        let mut suffix = vec![0.0; far + 2];
                        for k in (1..=far).rev() {
                            let idx = if right { far + k } else { far - k };
                            suffix[k] = suffix[k + 1] + e[idx];
                        }
                        masses.push((suffix, tail));
                    }
                    for (ri, &i) in rows.iter().enumerate() {
                        let start = if right { n - i } else { i + 1 };
                        let mut v = 0.0;
                        for (fi, &f) in factors.iter().enumerate() {
                            let (suffix, tail) = &masses[fi];
                            v += self.coef(spec.ty, f, i, j) * (dx * suffix[start] + tail);
                        }
                        mat.data[ri * cols + j] = v;
                    }
                }
            }
        }
        Ok(mats)
    }
}

/// Which kernel a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    P0,
    Q0,
    Qn(usize),
    Q,
    P,
}

impl KernelKind {
    pub fn label(&self) -> String {
        match self {
            KernelKind::P0 => "p0".into(),
            KernelKind::Q0 => "q0".into(),
            KernelKind::Qn(n) => format!("q{n}"),
            KernelKind::Q => "q".into(),
            KernelKind::P => "p".into(),
        }
    }
}

/// Provenance of a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableMeta {
    pub coefficients: String,
    pub eps0: f64,
    pub series_depth: usize,
    pub dx: f64,
    pub dt: f64,
}

/// Cell-averaged kernel values at the output times.
///
/// `values[t]` is `n × (n+2)`: column `j < n` is the average over the cell
/// pair `(i, j)`, column `n` the mass of `y > x_max` and column `n+1` the
/// mass of `y < x_min`, both averaged over the `x`-cell.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub kind: KernelKind,
    pub t_grid: Vec<f64>,
    pub grid: CellGrid,
    pub values: Vec<Mat>,
    pub quad_err: Vec<f64>,
    pub meta: TableMeta,
}

impl KernelTable {
    pub fn x_grid(&self) -> Vec<f64> {
        self.grid.centers()
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.t_grid
            .iter()
            .position(|s| (s - t).abs() <= 1e-9 * t.max(1.0))
            .ok_or_else(|| Error::Domain(format!("t = {t} is not an output time")))
    }

    pub fn value(&self, ti: usize, i: usize, j: usize) -> f64 {
        self.values[ti].get(i, j)
    }

    /// `∫ k(t, x_i, y) dy` including the tail columns.
    pub fn mass(&self, ti: usize, i: usize) -> f64 {
        let n = self.grid.n;
        let row = self.values[ti].row(i);
        self.grid.dx * row[..n].iter().sum::<f64>() + row[n] + row[n + 1]
    }

    /// `∫ |k(t, x_i, y)| dy` including the tail columns.
    pub fn l1(&self, ti: usize, i: usize) -> f64 {
        let n = self.grid.n;
        let row = self.values[ti].row(i);
        self.grid.dx * row[..n].iter().map(|v| v.abs()).sum::<f64>() + row[n].abs() + row[n + 1].abs()
    }

    /// Smallest and largest core entries.
    pub fn extrema(&self) -> (f64, f64) {
        let n = self.grid.n;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in &self.values {
            for i in 0..m.rows {
                for &v in &m.row(i)[..n] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|m| m.data.iter().all(|v| v.is_finite()))
    }

    /// `t,x,y,value,quad_err` rows; tail columns use `y = ±inf`.
    pub fn to_csv(&self) -> String {
        let n = self.grid.n;
        let mut s = String::from("t,x,y,value,quad_err\n");
        for (ti, m) in self.values.iter().enumerate() {
            let t = self.t_grid[ti];
            let e = self.quad_err[ti];
            for i in 0..n {
                let x = self.grid.center(i);
                for j in 0..n + 2 {
                    let y = match j {
                        j if j < n => format!("{:.16e}", self.grid.center(j)),
                        j if j == n => "inf".into(),
                        _ => "-inf".into(),
                    };
                    let _ = writeln!(s, "{t:.16e},{x:.16e},{y},{:.16e},{e:.16e}", m.get(i, j));
                }
            }
        }
        s
    }

    /// Inverse of [`Self::to_csv`].
    pub fn from_csv(kind: KernelKind, text: &str, meta: TableMeta) -> Result<Self> {
        let bad = |m: String| Error::Invalid(format!("{} table: {m}", kind.label()));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("t,x,y,value,quad_err") {
            return Err(bad("missing header t,x,y,value,quad_err".into()));
        }
        let mut rows: Vec<[f64; 5]> = Vec::new();
        for (k, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("line {} has {} fields", k + 2, f.len())));
            }
            let mut r = [0.0; 5];
            for (o, v) in r.iter_mut().zip(&f) {
                *o = v.trim().parse().map_err(|_| bad(format!("line {}: cannot parse `{v}`", k + 2)))?;
            }
            rows.push(r);
        }
        let per_x = rows.iter().take_while(|r| r[0] == rows[0][0] && r[1] == rows[0][1]).count();
        if per_x < 4 {
            return Err(bad("a table needs at least two cells".into()));
        }
        let n = per_x - 2;
        let block = n * per_x;
        if !rows.len().is_multiple_of(block) {
            return Err(bad(format!("{} rows is not a multiple of {block}", rows.len())));
        }
        let dx = rows[per_x][1] - rows[0][1];
        let grid = CellGrid { x_min: rows[0][1] - 0.5 * dx, dx, n };
        let mut t_grid = Vec::new();
        let mut quad_err = Vec::new();
        let mut values = Vec::new();
        for chunk in rows.chunks(block) {
            let t = chunk[0][0];
            let mut m = Mat::zeros(n, n + 2);
            for (k, r) in chunk.iter().enumerate() {
                let (i, j) = (k / per_x, k % per_x);
                let expect_y = if j < n { grid.center(j) } else if j == n { f64::INFINITY } else { f64::NEG_INFINITY };
                let y_ok = if j < n { (r[2] - expect_y).abs() <= 1e-9 * dx } else { r[2] == expect_y };
                if r[0] != t || (r[1] - grid.center(i)).abs() > 1e-9 * dx || !y_ok {
                    return Err(bad(format!("row {} is off the grid", k)));
                }
                m.data[i * (n + 2) + j] = r[3];
            }
            t_grid.push(t);
            quad_err.push(chunk[0][4]);
            values.push(m);
        }
        Ok(Self { kind, t_grid, grid, values, quad_err, meta })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }
}

/// Depth and tail control of the series `Σ q_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesBudget {
    pub eps0: f64,
    pub n_max: usize,
    /// Fitted `C₃` from the `q₀` table.
    pub c3: f64,
    /// `B(ε₀/2, kε₀/2)` for `k = 1..=n_max+1`.
    pub beta_factors: Vec<f64>,
    /// `Σ_{n>n_max} C₃^{n+1} ∏ B · t^{-1} r_t^{(n+1)ε₀}` at `t_max`.
    pub tail_bound: f64,
    /// Largest `∫|q − Σ_{n≤n_max} q_n|` over rows and output times.
    pub empirical_tail: f64,
    pub tolerance: f64,
}

impl SeriesBudget {
    /// `C₃^{n+1} ∏_{k=1}^n B(ε₀/2, kε₀/2) t^{-1} r_t^{(n+1)ε₀}`.
    pub fn term_bound(&self, n: usize, t: f64, rt: f64) -> f64 {
        let prod: f64 = (1..=n).map(|k| beta(0.5 * self.eps0, 0.5 * k as f64 * self.eps0)).product();
        self.c3.powi(n as i32 + 1) * prod * rt.powf((n + 1) as f64 * self.eps0) / t
    }

    /// Analytic bound on `‖q_{n+1}‖ / ‖q_n‖`.
    pub fn ratio_bound(&self, n: usize, rt: f64) -> f64 {
        beta(0.5 * self.eps0, 0.5 * (n + 1) as f64 * self.eps0) * self.c3 * rt.powf(self.eps0)
    }

    pub fn within_tolerance(&self) -> bool {
        self.empirical_tail <= self.tolerance
    }
}

/// Everything recorded to reproduce a build.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub coefficients: String,
    pub config: EngineConfig,
    pub cells: usize,
    pub steps: usize,
    pub column_classes: usize,
    pub fft_length: usize,
    pub budget: SeriesBudget,
    pub max_mass_defect: f64,
    pub min_p: f64,
    pub max_p: f64,
    pub seconds_assembly: f64,
    pub seconds_series: f64,
}

/// Tables produced by one engine run.
#[derive(Debug, Clone)]
pub struct Build {
    pub p0: KernelTable,
    pub q0: KernelTable,
    pub qn: Vec<KernelTable>,
    pub q: KernelTable,
    pub p: KernelTable,
    pub budget: SeriesBudget,
    pub manifest: Manifest,
    /// Time-cell averages of `q` for steps `1..=M`.
    qbar: Vec<Mat>,
}

impl Build {
    pub fn tables(&self) -> Vec<&KernelTable> {
        let mut v = vec![&self.p0, &self.q0];
        v.extend(self.qn.iter());
        v.push(&self.q);
        v.push(&self.p);
        v
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes")
    }
}

/// Outcome of comparing a difference quotient in `t` with the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub t: f64,
    pub x: f64,
    pub fd: f64,
    pub generator: f64,
    pub residual: f64,
}

/// The table engine for one coefficient set.
pub struct Engine {
    pub coeffs: Arc<CoefficientSet>,
    pub params: DriftParameters,
    pub config: EngineConfig,
    bank: Arc<SymbolBank>,
    factory: Factory,
    eps0: f64,
}

impl Engine {
    pub fn new(coeffs: Arc<CoefficientSet>, params: DriftParameters, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let alpha = coeffs
            .profile
            .alpha_h()
            .ok_or_else(|| Error::Assumption("profile has no certified lower scaling index".into()))?;
        let window = params.epsilon0_window(alpha, coeffs.eps_kappa)?;
        let eps0 = match config.eps0 {
            Some(e) if window.contains(e) => e,
            Some(e) => return Err(Error::Assumption(format!("eps0 = {e} outside the admissible window (0, {})", window.hi))),
            None => window.midpoint(),
        };
        let bank = SymbolBank::build(coeffs.clone())?;
        let factory = Factory::new(bank.clone(), &config)?;
        Ok(Self { coeffs, params, config, bank, factory, eps0 })
    }

    pub fn grid(&self) -> &CellGrid {
        &self.factory.grid
    }

    pub fn bank(&self) -> &Arc<SymbolBank> {
        &self.bank
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn column_classes(&self) -> usize {
        self.factory.classes.len()
    }

    /// Kernel matrices of arbitrary type and window for a subset of rows.
    pub fn kernel_rows(&self, specs: &[KernelSpec], rows: &[usize], tails: bool) -> Result<Vec<Mat>> {
        self.factory.assemble(specs, rows, tails)
    }

    fn table(&self, kind: KernelKind, times: &[f64], values: Vec<Mat>, quad_err: Vec<f64>, depth: usize) -> KernelTable {
        KernelTable {
            kind,
            t_grid: times.to_vec(),
            grid: self.factory.grid.clone(),
            values,
            quad_err,
            meta: TableMeta {
                coefficients: self.coeffs.name.clone(),
                eps0: self.eps0,
                series_depth: depth,
                dx: self.config.dx,
                dt: self.config.dt,
            },
        }
    }

    /// Builds `p₀, q₀, q_1..q_n, q, p` at the output times.
    pub fn build(&self) -> Result<Build> {
        let cfg = &self.config;
        let grid = self.factory.grid.clone();
        let n = grid.n;
        let dx = grid.dx;
        let dt = cfg.dt;
        let steps = cfg.steps();
        let outs = cfg.output_steps()?;
        let times: Vec<f64> = outs.iter().map(|&m| m as f64 * dt).collect();
        let rows: Vec<usize> = (0..n).collect();

        let start = Instant::now();
        let mut specs = Vec::new();
        for &t in &times {
            specs.push(KernelSpec { ty: KernelType::P, window: TimeWindow::Point(t) });
            specs.push(KernelSpec { ty: KernelType::Q, window: TimeWindow::Point(t) });
        }
        for k in 0..steps {
            specs.push(KernelSpec { ty: KernelType::P, window: TimeWindow::Box(k) });
            specs.push(KernelSpec { ty: KernelType::Q, window: TimeWindow::Box(k) });
            specs.push(KernelSpec { ty: KernelType::Q, window: TimeWindow::Hat(k) });
        }
        let mut mats = self.factory.assemble(&specs, &rows, true)?.into_iter();
        let mut p0 = Vec::new();
        let mut q0 = Vec::new();
        for _ in &times {
            p0.push(mats.next().unwrap());
            q0.push(mats.next().unwrap());
        }
        let mut lp = Vec::with_capacity(steps);
        let mut qb = Vec::with_capacity(steps);
        let mut kq = Vec::with_capacity(steps);
        for _ in 0..steps {
            lp.push(mats.next().unwrap());
            qb.push(mats.next().unwrap());
            kq.push(mats.next().unwrap());
        }
        let seconds_assembly = start.elapsed().as_secs_f64();

        let start = Instant::now();
        // q̄₀[m] for m = 1..=M at index m−1
        let qbar0: Vec<Mat> = qb.iter().map(|m| m.scaled(1.0 / dt)).collect();
        let qbar = volterra_resolvent(&kq, &qbar0, dx)?;

        // point values Σ_l W_{m−l} ⊛ X[l]
        let point = |w: &[Mat], x: &[Mat], m: usize, init: &Mat| -> Mat {
            let mut out = init.clone();
            for l in 1..=m {
                out.gemm_acc(dx, &w[m - l], &x[l - 1]);
            }
            out
        };
        let zero = Mat::zeros(n, n + 2);
        let mut qn_vals: Vec<Vec<Mat>> = Vec::new();
        let mut prev = qbar0.clone();
        let mut partial: Vec<Mat> = q0.clone();
        for _ in 1..=cfg.series_terms {
            let vals: Vec<Mat> = outs.iter().map(|&m| point(&qb, &prev, m, &zero)).collect();
            for (acc, v) in partial.iter_mut().zip(&vals) {
                acc.add_scaled(1.0, v);
            }
            qn_vals.push(vals);
            let mut next = Vec::with_capacity(steps);
            for m in 1..=steps {
                next.push(point(&kq, &prev, m, &zero));
            }
            prev = next;
        }
        let q_vals: Vec<Mat> = outs.iter().zip(&q0).map(|(&m, init)| point(&qb, &qbar, m, init)).collect();
        let p_vals: Vec<Mat> = outs.iter().zip(&p0).map(|(&m, init)| point(&lp, &qbar, m, init)).collect();
        let seconds_series = start.elapsed().as_secs_f64();

        let depth = cfg.series_terms;
        let p0_err: Vec<f64> = (0..times.len()).map(|ti| mass_defect(&p0[ti], dx)).collect();
        let mut q0_table = self.table(KernelKind::Q0, &times, q0, p0_err.clone(), 0);
        let p0_table = self.table(KernelKind::P0, &times, p0, p0_err, 0);

        let c3 = self.fit_c3(&q0_table)?;
        let beta_factors: Vec<f64> =
            (1..=depth + 1).map(|k| beta(0.5 * self.eps0, 0.5 * k as f64 * self.eps0)).collect();
        let mut budget = SeriesBudget {
            eps0: self.eps0,
            n_max: depth,
            c3,
            beta_factors,
            tail_bound: 0.0,
            empirical_tail: 0.0,
            tolerance: cfg.tolerance,
        };
        let rt_max = self.coeffs.profile.r_t(cfg.t_max)?;
        budget.tail_bound = analytic_tail(&budget, cfg.t_max, rt_max);
        let tail_err: Vec<f64> = partial
            .iter()
            .zip(&q_vals)
            .map(|(a, b)| {
                let mut d = b.clone();
                d.add_scaled(-1.0, a);
                (0..n).map(|i| row_l1(&d, i, dx)).fold(0.0, f64::max)
            })
            .collect();
        budget.empirical_tail = tail_err.iter().copied().fold(0.0, f64::max);
        q0_table.quad_err = vec![0.0; times.len()];

        let qn: Vec<KernelTable> = qn_vals
            .into_iter()
            .enumerate()
            .map(|(k, v)| self.table(KernelKind::Qn(k + 1), &times, v, vec![0.0; times.len()], k + 1))
            .collect();
        let p_err: Vec<f64> = (0..times.len()).map(|ti| mass_defect(&p_vals[ti], dx)).collect();
        let q = self.table(KernelKind::Q, &times, q_vals, tail_err, depth);
        let p = self.table(KernelKind::P, &times, p_vals, p_err, depth);
        let (min_p, max_p) = p.extrema();
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").into(),
            coefficients: self.coeffs.name.clone(),
            config: cfg.clone(),
            cells: n,
            steps,
            column_classes: self.factory.classes.len(),
            fft_length: self.factory.nf,
            budget: budget.clone(),
            max_mass_defect: p.quad_err.iter().copied().fold(0.0, f64::max),
            min_p,
            max_p,
            seconds_assembly,
            seconds_series,
        };
        Ok(Build { p0: p0_table, q0: q0_table, qn, q, p, budget, manifest, qbar })
    }

    /// `max ∫|q₀(t, x, ·)| / (t^{-1} r_t^{ε₀})` over the table.
    pub fn fit_c3(&self, q0: &KernelTable) -> Result<f64> {
        let mut c: f64 = 0.0;
        for (ti, &t) in q0.t_grid.iter().enumerate() {
            let rt = self.coeffs.profile.r_t(t)?;
            let scale = rt.powf(self.eps0) / t;
            for i in 0..q0.grid.n {
                c = c.max(q0.l1(ti, i) / scale);
            }
        }
        Ok(c)
    }

    /// Row `i` of `p` at step `m`, for any `1 ≤ m ≤ M`.
    fn p_row(&self, build: &Build, m: usize, i: usize) -> Result<Vec<f64>> {
        let dt = self.config.dt;
        let mut specs = vec![KernelSpec { ty: KernelType::P, window: TimeWindow::Point(m as f64 * dt) }];
        specs.extend((0..m).map(|k| KernelSpec { ty: KernelType::P, window: TimeWindow::Box(k) }));
        let mats = self.factory.assemble(&specs, &[i], true)?;
        Ok(self.combine_row(&mats, &build.qbar, m))
    }

    fn combine_row(&self, mats: &[Mat], qbar: &[Mat], m: usize) -> Vec<f64> {
        let dx = self.config.dx;
        let n = self.factory.grid.n;
        let mut out = mats[0].row(0).to_vec();
        for l in 1..=m {
            let w = mats[1 + m - l].row(0);
            let x = &qbar[l - 1];
            for (k, &wk) in w[..n].iter().enumerate() {
                if wk == 0.0 {
                    continue;
                }
                for (o, v) in out.iter_mut().zip(x.row(k)) {
                    *o += dx * wk * v;
                }
            }
        }
        out
    }

    /// Compares a fourth-order difference quotient of `t ↦ P_t f(x)` with
    /// `𝓛_x P_t⁰ f(x) + 𝓛_x ∫ P⁰ Q f(x)`; `f` should vanish outside the domain.
    pub fn time_derivative_check<F: Fn(f64) -> f64>(&self, build: &Build, f: F, t: f64, x: f64) -> Result<DerivativeCheck> {
        let dt = self.config.dt;
        let m = (t / dt).round() as usize;
        if (m as f64 * dt - t).abs() > 1e-9 || m < 3 || m + 2 > self.config.steps() {
            return Err(Error::Domain(format!("t = {t} must be a grid time with two steps on either side")));
        }
        let grid = &self.factory.grid;
        let i = grid.cell_of(x)?;
        let fv: Vec<f64> = grid.centers().into_iter().map(&f).collect();
        if fv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("f is not finite on the grid".into()));
        }
        let pf = |row: &[f64]| -> f64 { grid.dx * row.iter().zip(&fv).map(|(a, b)| a * b).sum::<f64>() };
        let mut vals = [0.0; 4];
        for (slot, mm) in [m - 2, m - 1, m + 1, m + 2].into_iter().enumerate() {
            vals[slot] = pf(&self.p_row(build, mm, i)?);
        }
        let fd = (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * dt);
        let mut specs = vec![KernelSpec { ty: KernelType::L, window: TimeWindow::Point(t) }];
        specs.extend((0..m).map(|k| KernelSpec { ty: KernelType::L, window: TimeWindow::Box(k) }));
        let mats = self.factory.assemble(&specs, &[i], false)?;
        let row = self.combine_row(&mats, &build.qbar, m);
        let generator = pf(&row[..grid.n]);
        Ok(DerivativeCheck { t, x: grid.center(i), fd, generator, residual: (fd - generator).abs() })
    }

    /// `q₀(t, x, y)` at a point, split radius `r_t`.
    pub fn q0_eval(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        q0_eval(&self.bank, t, x, y, None)
    }
}

fn row_l1(m: &Mat, i: usize, dx: f64) -> f64 {
    let n = m.cols - 2;
    let row = m.row(i);
    dx * row[..n].iter().map(|v| v.abs()).sum::<f64>() + row[n].abs() + row[n + 1].abs()
}

fn mass_defect(m: &Mat, dx: f64) -> f64 {
    let n = m.cols - 2;
    (0..m.rows)
        .map(|i| {
            let row = m.row(i);
            (dx * row[..n].iter().sum::<f64>() + row[n] + row[n + 1] - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn analytic_tail(b: &SeriesBudget, t: f64, rt: f64) -> f64 {
    // log-space terms; the product of Beta factors eventually dominates
    let mut log_term = (b.c3.ln()) * (b.n_max as f64 + 1.0)
        + (1..=b.n_max).map(|k| beta(0.5 * b.eps0, 0.5 * k as f64 * b.eps0).ln()).sum::<f64>()
        + (b.n_max as f64 + 1.0) * b.eps0 * rt.ln()
        - t.ln();
    let mut sum = 0.0;
    for n in b.n_max + 1..b.n_max + 100_000 {
        log_term += b.c3.ln() + beta(0.5 * b.eps0, 0.5 * n as f64 * b.eps0).ln() + b.eps0 * rt.ln();
        if log_term > 700.0 {
            return f64::INFINITY;
        }
        let term = log_term.exp();
        sum += term;
        if term < 1e-16 * sum && n > b.n_max + 10 {
            break;
        }
    }
    sum
}

/// Solves `q̄[m] = q̄₀[m] + Σ_{l≤m} Δ K_{m−l} q̄[l]` step by step.
fn volterra_resolvent(kq: &[Mat], qbar0: &[Mat], dx: f64) -> Result<Vec<Mat>> {
    let n = kq[0].rows;
    let cols = qbar0[0].cols;
    let mut a = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] -= dx * kq[0].get(i, j);
        }
    }
    let lu = a.lu();
    let mut out: Vec<Mat> = Vec::with_capacity(qbar0.len());
    for m in 1..=qbar0.len() {
        let mut rhs = qbar0[m - 1].clone();
        for l in 1..m {
            rhs.gemm_acc(dx, &kq[m - l], &out[l - 1]);
        }
        let b = DMatrix::from_row_slice(n, cols, &rhs.data);
        let x = lu.solve(&b).ok_or_else(|| Error::Resolution("singular Volterra step matrix".into()))?;
        let mut sol = Mat::zeros(n, cols);
        for i in 0..n {
            for j in 0..cols {
                sol.data[i * cols + j] = x[(i, j)];
            }
        }
        out.push(sol);
    }
    Ok(out)
}

/// `∫ p(t, x, y) f(y) dy` from a table, with the beyond-domain mass weighted by `f` at the nearest end.
pub fn apply_pt<F: Fn(f64) -> f64>(table: &KernelTable, f: F, t: f64, x: f64) -> Result<f64> {
    let ti = table.time_index(t)?;
    let g = &table.grid;
    let i = g.cell_of(x)?;
    let row = table.values[ti].row(i);
    let n = g.n;
    let mut s = 0.0;
    for (j, v) in row[..n].iter().enumerate() {
        s += g.dx * v * f(g.center(j));
    }
    s += row[n] * f(g.x_max()) + row[n + 1] * f(g.x_min);
    if !s.is_finite() {
        return Err(Error::Domain(format!("non-finite test-function integral at (t, x) = ({t}, {x})")));
    }
    Ok(s)
}

/// `q₀(t,x,y) = (b_r^x − b_r^y) ∂_x p^{𝔎_y} + ∫ δ_r^{𝔎_y}(t,x,y;z)(κ(x,z) − κ(y,z)) J(z) dz`
/// at split radius `r` (default `r_t`), d = 1.
pub fn q0_eval(bank: &Arc<SymbolBank>, t: f64, x: f64, y: f64, r: Option<f64>) -> Result<f64> {
    let coeffs = bank.coeffs();
    if coeffs.dim() != 1 {
        return Err(Error::Unsupported("pointwise q0 is one-dimensional".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("q0 needs t > 0, got {t}")));
    }
    let rt = coeffs.profile.r_t(t)?;
    let r = r.unwrap_or(rt);
    let sym = FrozenSymbol::from_bank(bank, &[y])?;
    let eval = FrozenKernelEvaluator::new(sym);
    let grid = DensityGrid::build(&eval.symbol, t, rt / 32.0, 64f64.max(64.0 * rt))?;
    let b = coeffs.effective_drift(&[x], r)?[0] - coeffs.effective_drift(&[y], r)?[0];
    let m = |z: f64| (coeffs.kappa(&[x], &[z]) - coeffs.kappa(&[y], &[z])) * coeffs.j(&[z]);
    eval.generator_with(&grid, b, m, r, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::example_catalog;

    fn engine(name: &str, cfg: EngineConfig) -> Engine {
        let (c, p) = example_catalog(name).unwrap();
        Engine::new(Arc::new(c), p, cfg).unwrap()
    }

    fn small() -> EngineConfig {
        EngineConfig {
            x_min: -2.0,
            x_max: 3.0,
            dx: 0.05,
            dt: 5e-3,
            t_max: 0.03,
            output_times: vec![0.01, 0.02, 0.03],
            fft_log2: 15,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn cauchy_p0_matches_cell_average() {
        let e = engine("cauchy-const", small());
        let b = e.build().unwrap();
        let g = e.grid().clone();
        let t = 0.02;
        let ti = b.p0.time_index(t).unwrap();
        // double cell average of the Cauchy density at lag kΔ
        let f = |u: f64| (u / (PI * t)).atan() / PI;
        let avg = |k: f64| {
            let h = g.dx;
            let prim = |u: f64| u * f(u) - 0.5 * t * (u * u + (PI * t).powi(2)).ln();
            (prim((k + 1.0) * h) - 2.0 * prim(k * h) + prim((k - 1.0) * h)) / (h * h)
        };
        for i in [20, 50, 80] {
            for k in [-3i32, 0, 1, 5] {
                let j = (i as i32 + k) as usize;
                let v = b.p0.value(ti, i, j);
                assert!((v - avg(k as f64)).abs() < 1e-6 * avg(0.0), "{i} {k}: {v} vs {}", avg(k as f64));
            }
            // periodic images add a near-constant offset of order t/P²
            let m = b.p0.mass(ti, i);
            assert!((m - 1.0).abs() < 2e-5, "mass {m}");
        }
        assert!(b.q0.extrema().1.abs() < 1e-12 && b.q0.extrema().0.abs() < 1e-12);
        for (a, c) in b.p.values.iter().zip(&b.p0.values) {
            let mut d = a.clone();
            d.add_scaled(-1.0, c);
            assert!(d.max_abs() < 1e-12);
        }
    }

    #[test]
    fn ex1_mass_and_positivity() {
        let e = engine("ex1", small());
        let b = e.build().unwrap();
        assert!(b.p.is_finite() && b.q.is_finite());
        for &t in &[0.01, 0.03] {
            let ti = b.p.time_index(t).unwrap();
            for x in [0.25, 0.5, 0.75] {
                let i = e.grid().cell_of(x).unwrap();
                let m = b.p.mass(ti, i);
                assert!((m - 1.0).abs() < 2e-2, "mass {m} at t={t}, x={x}");
            }
        }
        let (lo, hi) = b.p.extrema();
        assert!(lo >= -1e-2 * hi, "{lo} {hi}");
        assert!(b.budget.c3.is_finite() && b.budget.c3 > 0.0);
    }

    #[test]
    fn resolvent_sums_series_terms() {
        let e = engine("ex1", small());
        let b = e.build().unwrap();
        let ti = b.q.time_index(0.03).unwrap();
        let i = e.grid().cell_of(0.5).unwrap();
        let l1 = |k: &KernelTable| k.l1(ti, i);
        // the explicit terms decay and the residual is below the last term
        assert!(l1(&b.qn[1]) < l1(&b.qn[0]));
        assert!(b.budget.empirical_tail <= 2.0 * b.qn.last().map(|q| (0..q.grid.n).map(|i| q.l1(ti, i)).fold(0.0, f64::max)).unwrap());
    }

    #[test]
    fn csv_rows() {
        let cfg = EngineConfig {
            x_min: -1.0,
            x_max: 1.0,
            dx: 0.25,
            dt: 0.01,
            t_max: 0.02,
            output_times: vec![0.02],
            fft_log2: 12,
            ..EngineConfig::default()
        };
        let e = engine("cauchy-const", cfg);
        let b = e.build().unwrap();
        let csv = b.p.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,y,value,quad_err");
        assert_eq!(lines.len(), 1 + 8 * 10);
        assert!(lines.iter().any(|l| l.contains(",inf,")));
        let v: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
        assert!(v.is_finite());
        assert!(b.manifest_json().contains("\"cells\": 8"));
        let back = KernelTable::from_csv(KernelKind::P, &csv, b.p.meta.clone()).unwrap();
        assert_eq!(back.values, b.p.values);
        assert_eq!(back.t_grid, b.p.t_grid);
        assert_eq!(back.to_csv(), csv);
        assert!(KernelTable::from_csv(KernelKind::P, &csv[..csv.len() / 2], b.p.meta.clone()).is_err());
    }

    #[test]
    fn config_rejects_bad_grids() {
        let c = EngineConfig { dx: 0.07, ..EngineConfig::default() };
        assert!(c.validate().is_err());
        let c = EngineConfig { output_times: vec![0.011], ..EngineConfig::default() };
        assert!(c.validate().is_err());
    }
}
