//! Special functions and stable complex helpers.

use num_complex::Complex64;
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Surface measure of the unit sphere in ℝ^d; ω₁ = 2.
pub fn sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// Beta function B(a, b) for a, b > 0.
pub fn beta(a: f64, b: f64) -> f64 {
    statrs::function::beta::beta(a, b)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Hankel asymptotic expansion of J_ν for large x.
fn bessel_asymptotic(nu: f64, x: f64) -> f64 {
    let chi = x - 0.5 * nu * PI - 0.25 * PI;
    let mu = 4.0 * nu * nu;
    let (mut p, mut q) = (1.0, 0.0);
    let mut a = 1.0f64;
    let mut prev = 1.0f64;
    for k in 1..60usize {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (8.0 * k as f64 * x);
        if a.abs() > prev || a.abs() < 1e-18 {
            break;
        }
        prev = a.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Midpoint rule for (1/π)∫₀^π cos(nθ − x sin θ) dθ, spectrally accurate.
fn bessel_integral(n: f64, x: f64) -> f64 {
    const N: usize = 64;
    let mut s = 0.0;
    for k in 0..N {
        let th = PI * (k as f64 + 0.5) / N as f64;
        s += (n * th - x * th.sin()).cos();
    }
    s / N as f64
}

/// Bessel function J₀.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 25.0 {
        bessel_integral(0.0, x)
    } else {
        bessel_asymptotic(0.0, x)
    }
}

/// Bessel function J₁.
pub fn bessel_j1(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    if x <= 25.0 {
        s * bessel_integral(1.0, x)
    } else {
        s * bessel_asymptotic(1.0, x)
    }
}

/// `1 - J₀(x)` without cancellation near zero.
pub fn one_minus_j0(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let q = 0.25 * x * x;
        // Σ_{k≥1} (−1)^{k+1} q^k / (k!)²
        let mut term = q;
        let mut s = q;
        for k in 2..10 {
            term *= -q / (k * k) as f64;
            s += term;
        }
        s
    } else {
        1.0 - bessel_j0(x)
    }
}

/// `1 - e^{-z}` without cancellation near zero.
pub fn one_minus_exp_neg(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        let mut term = z;
        let mut s = z;
        for k in 2..8 {
            term = -term * z / k as f64;
            s += term;
        }
        s
    } else {
        Complex64::new(1.0, 0.0) - (-z).exp()
    }
}

/// `(1 - e^{-z}) / z`, the normalized box window.
pub fn box_window(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut s = term;
        for k in 1..12 {
            term = -term * z / (k + 1) as f64;
            s += term;
        }
        s
    } else {
        one_minus_exp_neg(z) / z
    }
}

/// `(z - 1 + e^{-z}) / z²`, the one-sided hat window.
pub fn hat0_window(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        let mut term = Complex64::new(0.5, 0.0);
        let mut s = term;
        for k in 1..12 {
            term = -term * z / (k + 2) as f64;
            s += term;
        }
        s
    } else {
        (z - one_minus_exp_neg(z)) / (z * z)
    }
}

/// `sin u - u` without cancellation near zero.
pub fn sin_minus_id(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let u2 = u * u;
        -u * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0)))
    } else {
        u.sin() - u
    }
}

/// `1 - cos u` without cancellation near zero.
pub fn one_minus_cos(u: f64) -> f64 {
    let s = (0.5 * u).sin();
    2.0 * s * s
}

/// `sin(u)/u` with the removable singularity filled.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_j1_values() {
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-13);
        assert!((bessel_j1(10.0) - 0.043_472_746_168_861_44).abs() < 1e-13);
        assert!((bessel_j1(30.0) + 0.118_751_062_616_623_05).abs() < 1e-12);
        assert!((bessel_j1(-1.0) + 0.440_050_585_744_933_5).abs() < 1e-13);
    }

    #[test]
    fn one_minus_j0_continuity() {
        for &x in &[1e-6, 0.1, 0.49, 0.51, 2.0] {
            let direct = 1.0 - bessel_j0(x);
            assert!((one_minus_j0(x) - direct).abs() < 1e-14 + 1e-9 * direct.abs(), "{x}");
        }
        assert!((one_minus_j0(1e-4) - 2.499_999_998_437_5e-9).abs() < 1e-22);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn j0_values() {
        // reference values of J0
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((bessel_j0(30.0) + 0.086_367_983_581_040_2).abs() < 1e-12);
        // continuity across the switch
        assert!((bessel_j0(25.0 - 1e-12) - bessel_j0(25.0 + 1e-12)).abs() < 1e-11);
    }

    #[test]
    fn windows_continuous() {
        for &r in &[0.0999, 0.1001, 0.00999, 0.01001] {
            let z = Complex64::new(r * 0.6, r * 0.8);
            let direct_box = (Complex64::new(1.0, 0.0) - (-z).exp()) / z;
            assert!((box_window(z) - direct_box).norm() < 1e-12);
            let direct_hat = (z - 1.0 + (-z).exp()) / (z * z);
            assert!((hat0_window(z) - direct_hat).norm() < 1e-9);
        }
        assert!((box_window(Complex64::new(0.0, 0.0)).re - 1.0).abs() < 1e-15);
        assert!((hat0_window(Complex64::new(0.0, 0.0)).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sin_minus_id_series() {
        for &u in &[0.05, 0.0999, 0.1001] {
            assert!((sin_minus_id(u) - (u.sin() - u)).abs() < 1e-15);
        }
    }
}
