//! Free resolvent kernel of `-Δ - λ` in ℝⁿ for real `λ < 0`.
//!
//! For `λ < 0` the Hankel-function kernel reduces to real, positive closed
//! forms in `κ = √(-λ)`:
//!
//! | n | `Gₙ(t, λ)`            |
//! |---|-----------------------|
//! | 1 | `e^{-κt} / (2κ)`      |
//! | 2 | `K₀(κt) / (2π)`       |
//! | 3 | `e^{-κt} / (4πt)`     |

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// A spectral parameter strictly below the essential spectrum, with its decay
/// rate `κ = √(-λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    lambda: f64,
    kappa: f64,
}

impl SpectralPoint {
    pub fn new(lambda: f64) -> Result<Self> {
        Ok(Self {
            lambda,
            kappa: kappa(lambda)?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// Decay rate `√(-λ)` on the branch with positive real part.
pub fn kappa(lambda: f64) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::NonNegativeSpectralParameter(lambda));
    }
    Ok(math::sqrt(-lambda))
}

/// Modified Bessel function of the second kind, order zero, for `z > 0`.
///
/// Power series up to `z = 2`, Steed's continued fraction above.
pub fn bessel_k0(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if z <= 2.0 {
        k0_series(z)
    } else {
        k0_continued_fraction(z)
    }
}

fn k0_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term * harmonic < 1e-18 * tail {
            break;
        }
    }
    -(math::ln(0.5 * z) + EULER_GAMMA) * i0 + tail
}

fn k0_continued_fraction(z: f64) -> f64 {
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        let dels = q * delh;
        s += dels;
        if math::abs(dels / s) < 1e-17 {
            break;
        }
    }
    math::sqrt(PI / (2.0 * z)) * math::exp(-z) / s
}

fn check_args(n: usize, t: f64, lambda: f64) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    let k = kappa(lambda)?;
    if !(t > 0.0) {
        return Err(Error::NonPositiveDistance(t));
    }
    Ok(k)
}

/// `Gₙ(t, λ)`, the kernel of `(-Δ - λ)⁻¹` at distance `t`.
pub fn green_kernel(n: usize, t: f64, lambda: f64) -> Result<f64> {
    let k = check_args(n, t, lambda)?;
    Ok(match n {
        1 => math::exp(-k * t) / (2.0 * k),
        2 => bessel_k0(k * t) / (2.0 * PI),
        _ => math::exp(-k * t) / (4.0 * PI * t),
    })
}

/// Constant in front of `t^{-(n-1)/2} e^{-κt}` in the far-field law.
pub fn farfield_constant(n: usize, lambda: f64) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    let k = kappa(lambda)?;
    let nf = n as f64;
    Ok(math::powf(k, 0.5 * (nf - 3.0))
        / (math::powf(2.0, 0.5 * (nf + 1.0)) * math::powf(PI, 0.5 * (nf - 1.0))))
}

/// Leading large-`t` term of `Gₙ(t, λ)`.
pub fn green_farfield(n: usize, t: f64, lambda: f64) -> Result<f64> {
    let k = check_args(n, t, lambda)?;
    let c = farfield_constant(n, lambda)?;
    Ok(c * math::powf(t, -0.5 * (n as f64 - 1.0)) * math::exp(-k * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kappa_of_perfect_squares() {
        assert_eq!(kappa(-1.0).unwrap(), 1.0);
        assert_eq!(kappa(-4.0).unwrap(), 2.0);
        assert!(matches!(kappa(0.0), Err(Error::NonNegativeSpectralParameter(_))));
        assert!(kappa(f64::NAN).is_err());
    }

    #[test]
    fn spectral_point_invariant() {
        for &l in &[-1e-6, -0.3, -1.0, -17.5, -1e4] {
            let p = SpectralPoint::new(l).unwrap();
            assert!(p.kappa() > 0.0);
            assert_relative_eq!(p.kappa() * p.kappa(), -l, max_relative = 1e-14);
        }
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(
            green_kernel(1, 2.0, -1.0).unwrap(),
            0.067_667_641_618_306_35,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            green_kernel(3, 1.0, -1.0).unwrap(),
            0.029_274_915_762_159_6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn k0_reference_values() {
        // Abramowitz & Stegun table 9.8 / high-precision references.
        assert_relative_eq!(bessel_k0(0.1), 2.427_069_024_702_017, max_relative = 1e-13);
        assert_relative_eq!(bessel_k0(1.0), 0.421_024_438_240_708_3, max_relative = 1e-13);
        assert_relative_eq!(bessel_k0(2.0), 0.113_893_872_749_533_4, max_relative = 1e-13);
        assert_relative_eq!(bessel_k0(2.0 + 1e-12), 0.113_893_872_749_533_4, max_relative = 1e-11);
        assert_relative_eq!(bessel_k0(5.0), 3.691_098_334_042_594e-3, max_relative = 1e-13);
        assert_relative_eq!(bessel_k0(20.0), 5.741_237_815_336_524e-10, max_relative = 1e-12);
    }

    #[test]
    fn two_dimensional_log_singularity() {
        let mut t = 1e-2;
        let mut prev = green_kernel(2, t, -1.0).unwrap() + math::ln(t) / (2.0 * PI);
        for _ in 0..20 {
            t *= 0.5;
            let cur = green_kernel(2, t, -1.0).unwrap() + math::ln(t) / (2.0 * PI);
            assert!((cur - prev).abs() < 1e-4);
            prev = cur;
        }
        // limit is (ln 2 - γ) / (2π)
        assert_relative_eq!(prev, (core::f64::consts::LN_2 - EULER_GAMMA) / (2.0 * PI), epsilon = 1e-9);
    }

    #[test]
    fn farfield_ratios() {
        for &t in &[0.1, 1.0, 7.0, 40.0] {
            let r = green_kernel(1, t, -1.0).unwrap() / green_farfield(1, t, -1.0).unwrap();
            assert_relative_eq!(r, 1.0, max_relative = 1e-15);
        }
        let r2 = green_kernel(2, 50.0, -1.0).unwrap() / green_farfield(2, 50.0, -1.0).unwrap();
        assert!((r2 - 1.0).abs() < 0.01);
        let r3 = green_kernel(3, 50.0, -1.0).unwrap() / green_farfield(3, 50.0, -1.0).unwrap();
        assert!((r3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(green_kernel(4, 1.0, -1.0), Err(Error::UnsupportedDimension(4))));
        assert!(matches!(green_kernel(2, 0.0, -1.0), Err(Error::NonPositiveDistance(_))));
        assert!(matches!(green_farfield(3, 1.0, 0.5), Err(Error::NonNegativeSpectralParameter(_))));
    }
}
