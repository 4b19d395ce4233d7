//! Adaptive and fixed quadrature rules.
//!
//! The production rule is a globally adaptive 21-point Gauss–Kronrod scheme
//! with user breakpoints and a semi-infinite variant. Tanh–sinh is provided as
//! an independent rule for oracles. Oscillatory tails are summed over
//! half-periods and accelerated with the Wynn epsilon algorithm.

use crate::error::{Error, Result};

/// Tolerances and subdivision cap for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadConfig {
    pub const fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Self {
        Self { abs_tol, rel_tol, max_subdivisions }
    }

    /// Tolerances used for scale functions.
    pub const fn scale_functions() -> Self {
        Self::new(1e-14, 1e-10, 2000)
    }

    pub const fn standard() -> Self {
        Self::new(1e-12, 1e-8, 2000)
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self::standard()
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn zero() -> Self {
        Self { value: 0.0, abs_err: 0.0, evaluations: 0 }
    }

    fn add(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            abs_err: self.abs_err + other.abs_err,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// One Gauss–Kronrod 21-point panel: (kronrod, |kronrod - gauss|).
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[10];
    let mut rg = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    let k = rk * h;
    let g = rg * h;
    (k, (k - g).abs())
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Globally adaptive GK21 on `[a, b]` with interior breakpoints.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult::zero());
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    pts.push(lo);
    pts.extend(breaks.iter().copied().filter(|&p| p > lo && p < hi && p.is_finite()));
    pts.push(hi);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();

    let mut panels: Vec<Panel> = Vec::with_capacity(64);
    let mut evals = 0;
    for w in pts.windows(2) {
        let (v, e) = gk21(&mut f, w[0], w[1]);
        evals += 21;
        panels.push(Panel { a: w[0], b: w[1], value: v, err: e });
    }
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature { partial: total, abs_err: f64::INFINITY });
        }
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult { value: sign * total, abs_err: err, evaluations: evals });
        }
        if panels.len() >= cfg.max_subdivisions {
            return Err(Error::Quadrature { partial: sign * total, abs_err: err });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.err > acc.1 { (i, p.err) } else { acc });
        let p = panels[idx];
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::Quadrature { partial: sign * total, abs_err: err });
        }
        let (v1, e1) = gk21(&mut f, p.a, m);
        let (v2, e2) = gk21(&mut f, m, p.b);
        evals += 42;
        panels[idx] = Panel { a: p.a, b: m, value: v1, err: e1 };
        panels.push(Panel { a: m, b: p.b, value: v2, err: e2 });
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    integrate_with_breaks(f, a, b, &[], cfg)
}

/// Integral over `[a, ∞)` by the map `x = a + u/(1-u)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let ubreaks: Vec<f64> = breaks
        .iter()
        .filter(|&&x| x > a && x.is_finite())
        .map(|&x| (x - a) / (1.0 + x - a))
        .collect();
    integrate_with_breaks(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let om = 1.0 - u;
            let x = a + u / om;
            let v = f(x) / (om * om);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        &ubreaks,
        cfg,
    )
}

/// Sum of panel integrals over consecutive intervals, for piecewise domains.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    edges: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let mut acc = QuadResult::zero();
    for w in edges.windows(2) {
        acc = acc.add(integrate(&mut f, w[0], w[1], cfg)?);
    }
    Ok(acc)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre on a mesh graded geometrically towards both ends.
///
/// `levels` geometric layers with ratio `ratio` are placed at each end of
/// `[a, b]`; every cell carries an `order`-point rule.
pub fn graded_gauss<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    ratio: f64,
    levels: usize,
    order: usize,
) -> f64 {
    let (x, w) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut edges = vec![0.0];
    let mut s = 1.0;
    for _ in 0..levels {
        s *= ratio;
        edges.push(s);
    }
    edges.push(1.0);
    edges.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut total = 0.0;
    for side in [-1.0, 1.0] {
        for e in edges.windows(2) {
            // distance from the endpoint, as a fraction of the half interval
            let (d0, d1) = (e[0], e[1]);
            let c = 0.5 * (d0 + d1) * half;
            let h = 0.5 * (d1 - d0) * half;
            for k in 0..order {
                let d = c + h * x[k];
                let pt = if side < 0.0 { a + d } else { b - d };
                if (side < 0.0 && pt > mid) || (side > 0.0 && pt < mid) {
                    continue;
                }
                total += w[k] * h * f(pt);
            }
        }
    }
    total
}

/// Tanh–sinh quadrature on `[a, b]` with level doubling.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> QuadResult {
    let c = 0.5 * (a + b);
    let h0 = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut evals = 0usize;
    let eval = |t: f64, f: &mut F| -> f64 {
        let s = half_pi * t.sinh();
        let ch = s.cosh();
        let w = half_pi * t.cosh() / (ch * ch);
        // distance to the nearer endpoint computed without cancellation
        let dist = h0 / (s.abs().exp() * ch);
        let (x_pos, x_neg) = (b - dist, a + dist);
        let mut v = 0.0;
        if w > 1e-300 {
            let fp = f(x_pos);
            let fm = f(x_neg);
            if fp.is_finite() {
                v += fp;
            }
            if fm.is_finite() {
                v += fm;
            }
        }
        v * w
    };
    let tmax = 6.5;
    let mut h = 0.5;
    let mut sum = {
        let fc = f(c);
        evals += 1;
        fc * half_pi
    };
    let mut k = 1;
    while (k as f64) * h <= tmax {
        sum += eval(k as f64 * h, &mut f);
        evals += 2;
        k += 1;
    }
    let mut prev = sum * h * h0;
    let mut err = f64::INFINITY;
    for _level in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            sum += eval(k as f64 * h, &mut f);
            evals += 2;
            k += 2;
        }
        let cur = sum * h * h0;
        err = (cur - prev).abs();
        prev = cur;
        if err <= rel_tol * cur.abs() || err < 1e-300 {
            break;
        }
    }
    QuadResult { value: prev, abs_err: err, evaluations: evals }
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
pub fn wynn_epsilon(partial: &[f64]) -> f64 {
    let n = partial.len();
    if n < 3 {
        return *partial.last().unwrap_or(&0.0);
    }
    let mut e0: Vec<f64> = vec![0.0; n + 1];
    let mut e1: Vec<f64> = partial.to_vec();
    let mut best = partial[n - 1];
    let mut col = 1;
    while e1.len() > 1 {
        let mut next = Vec::with_capacity(e1.len() - 1);
        for i in 0..e1.len() - 1 {
            let d = e1[i + 1] - e1[i];
            let v = if d.abs() < 1e-300 { f64::INFINITY } else { e0[i + 1] + 1.0 / d };
            next.push(v);
        }
        e0 = e1;
        e1 = next;
        col += 1;
        if col % 2 == 1 {
            if let Some(&v) = e1.last() {
                if v.is_finite() {
                    best = v;
                } else {
                    break;
                }
            }
        }
    }
    best
}

/// `∫_{start}^{∞} f` for an integrand oscillating with half-period `half_period`.
///
/// The integral is summed over half-periods and the partial sums are
/// accelerated with Wynn's epsilon algorithm.
pub fn oscillatory_tail<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    half_period: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let mut partial = Vec::with_capacity(64);
    let mut acc = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    let mut last_est = f64::NAN;
    let mut stable = 0;
    for k in 0..200 {
        let a = start + k as f64 * half_period;
        let r = integrate(&mut f, a, a + half_period, cfg)?;
        acc += r.value;
        err += r.abs_err;
        evals += r.evaluations;
        partial.push(acc);
        if partial.len() >= 6 {
            let tail = &partial[partial.len().saturating_sub(24)..];
            let est = wynn_epsilon(tail);
            if (est - last_est).abs() <= cfg.abs_tol.max(cfg.rel_tol * est.abs()) {
                stable += 1;
                if stable >= 2 {
                    return Ok(QuadResult {
                        value: est,
                        abs_err: err + (est - last_est).abs(),
                        evaluations: evals,
                    });
                }
            } else {
                stable = 0;
            }
            last_est = est;
        }
    }
    Err(Error::Quadrature { partial: last_est, abs_err: f64::INFINITY })
}
