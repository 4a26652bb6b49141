//! Complex log-gamma, the modified Bessel function of the second kind and
//! principal-branch complex powers.
//!
//! `log_gamma` combines the Stirling series (for |z| large) with the upward
//! recurrence and, in the left half-plane, the reflection formula. The result
//! is the branch obtained by summing principal logarithms, which agrees with
//! the principal branch of `ln Γ` on the positive real axis and is continuous
//! in the right half-plane.

use crate::error::{Error, Result};
use crate::quadrature;
use num_complex::Complex64;
use std::f64::consts::PI;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;
const LN_PI: f64 = 1.144_729_885_849_400_2;

/// B_{2k} / (2k (2k - 1)) for k = 1..=10.
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43_867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

/// Modulus past which the Stirling series is used directly.
const STIRLING_RADIUS: f64 = 15.0;

/// Principal-branch `ln Γ(z)`.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("log_gamma of non-finite z = {z}")));
    }
    if z.im.abs() <= 1e-14 && z.re <= 0.5 {
        let nearest = z.re.round();
        if nearest <= 0.0 && (z.re - nearest).abs() <= 1e-14 {
            return Err(Error::Pole { re: z.re, im: z.im });
        }
    }
    if z.re < 0.5 {
        let one_minus = Complex64::new(1.0, 0.0) - z;
        Ok(Complex64::new(LN_PI, 0.0) - ln_sin_pi(z) - log_gamma_right(one_minus))
    } else {
        Ok(log_gamma_right(z))
    }
}

/// `Γ(z)` as `exp(log_gamma(z))`.
pub fn gamma(z: Complex64) -> Result<Complex64> {
    log_gamma(z).map(|l| l.exp())
}

/// Real `ln Γ(x)` for x > 0.
pub fn ln_gamma_real(x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("ln_gamma_real needs x > 0, got {x}")));
    }
    Ok(log_gamma_right(Complex64::new(x, 0.0)).re)
}

fn log_gamma_right(z: Complex64) -> Complex64 {
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while w.norm() < STIRLING_RADIUS {
        shift += w.ln();
        w += 1.0;
    }
    stirling(w) - shift
}

fn stirling(w: Complex64) -> Complex64 {
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut power = inv;
    for c in STIRLING {
        series += power * c;
        power *= inv2;
    }
    (w - 0.5) * w.ln() - w + HALF_LN_TWO_PI + series
}

/// `ln sin(πz)` without overflow for large |Im z|.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im.abs() <= 1.0 {
        return (z * PI).sin().ln();
    }
    if z.im < 0.0 {
        return ln_sin_pi(z.conj()).conj();
    }
    // sin(πz) = e^{-iπz} (e^{2iπz} - 1) / (2i), with |e^{2iπz}| < 1 for Im z > 0
    let i = Complex64::new(0.0, 1.0);
    let e = (i * z * (2.0 * PI)).exp();
    -(i * z * PI) + ((e - 1.0) / (i * 2.0)).ln()
}

/// `K_λ(x)` for real order and x > 0.
pub fn bessel_k(lambda: f64, x: f64) -> Result<f64> {
    ln_bessel_k(lambda, x).map(f64::exp)
}

/// `ln K_λ(x)`; stays finite where `K_λ(x)` itself would overflow.
pub fn ln_bessel_k(lambda: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_k needs x > 0, got {x}")));
    }
    let (scaled, shift) = bessel_k_scaled(lambda, Complex64::new(x, 0.0))?;
    Ok(shift + scaled.re.ln())
}

/// `K_λ(w)` for real order and complex argument with Re w > 0, from
/// `K_λ(w) = ∫_0^∞ exp(-w cosh t) cosh(λt) dt`.
pub fn bessel_k_complex(lambda: f64, w: Complex64) -> Result<Complex64> {
    if !(w.re > 0.0) || !w.im.is_finite() {
        return Err(Error::Domain(format!("bessel_k_complex needs Re w > 0, got {w}")));
    }
    let (scaled, shift) = bessel_k_scaled(lambda, w)?;
    Ok(scaled * shift.exp())
}

/// Returns (I, s) with K_λ(w) = I · e^s.
pub(crate) fn bessel_k_scaled(lambda: f64, w: Complex64) -> Result<(Complex64, f64)> {
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("bessel_k order must be finite, got {lambda}")));
    }
    let nu = lambda.abs();
    let a = w.re;
    // log-magnitude of the integrand, peaked at a sinh t = ν
    let log_mag = |t: f64| -a * t.cosh() + ln_cosh(nu * t);
    let t_peak = (nu / a).asinh();
    let shift = log_mag(t_peak);
    let mut upper = t_peak.max(1.0);
    while log_mag(upper) - shift > -60.0 {
        upper *= 1.5;
    }
    let integrand = |t: f64| {
        let phase = -w * t.cosh() + (ln_cosh(nu * t) - shift);
        phase.exp()
    };
    let mut total = Complex64::new(0.0, 0.0);
    let pieces: &[(f64, f64)] = if t_peak > 0.0 && t_peak < upper {
        &[(0.0, t_peak), (t_peak, upper)]
    } else {
        &[(0.0, upper)]
    };
    for &(lo, hi) in pieces {
        let r = quadrature::adaptive(&integrand, lo, hi, 1e-300, 1e-14, 4000);
        total += r.value;
    }
    Ok((total, shift))
}

fn ln_cosh(y: f64) -> f64 {
    let y = y.abs();
    y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2
}

/// `exp(exponent · Log(base))` with the principal logarithm.
pub fn complex_pow(base: Complex64, exponent: Complex64) -> Result<Complex64> {
    if base.re == 0.0 && base.im == 0.0 {
        return Err(Error::Singularity("complex_pow with zero base".into()));
    }
    Ok((exponent * base.ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_gamma_special_values() {
        assert!(log_gamma(c(1.0, 0.0)).unwrap().norm() < 1e-15);
        assert!(log_gamma(c(2.0, 0.0)).unwrap().norm() < 1e-15);
        let half = log_gamma(c(0.5, 0.0)).unwrap();
        assert!((half.re - 0.572_364_942_924_700_1).abs() < 1e-14);
        assert_eq!(half.im, 0.0);
        // Γ(10) = 9!
        let g10 = gamma(c(10.0, 0.0)).unwrap();
        assert!((g10.re - 362_880.0).abs() / 362_880.0 < 1e-14);
    }

    #[test]
    fn log_gamma_rejects_poles() {
        for p in [0.0, -1.0, -2.0, -7.0] {
            assert!(matches!(log_gamma(c(p, 0.0)), Err(Error::Pole { .. })));
        }
        assert!(log_gamma(c(-1.5, 0.0)).is_ok());
        assert!(log_gamma(c(-2.0, 1e-3)).is_ok());
    }

    #[test]
    fn negative_real_axis() {
        // Γ(-1/2) = -2√π
        let g = gamma(c(-0.5, 0.0)).unwrap();
        assert!((g.re + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!(g.im.abs() < 1e-13);
    }

    #[test]
    fn bessel_half_order_closed_form() {
        for x in [0.1, 0.5, 2.0, 10.0, 40.0] {
            let exact = (PI / (2.0 * x)).sqrt() * (-x).exp();
            let got = bessel_k(0.5, x).unwrap();
            assert!((got - exact).abs() / exact < 1e-12, "x={x}");
        }
    }

    #[test]
    fn bessel_domain_error() {
        assert!(matches!(bessel_k(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn bessel_large_order_small_argument() {
        // K_ν(x) ~ Γ(ν)/2 · (2/x)^ν as x → 0
        let nu: f64 = 20.0;
        let x: f64 = 1e-3;
        let approx = ln_gamma_real(nu).unwrap() - std::f64::consts::LN_2 + nu * (2.0 / x).ln();
        let got = ln_bessel_k(nu, x).unwrap();
        assert!((got - approx).abs() < 1e-6, "{got} vs {approx}");
    }

    #[test]
    fn complex_bessel_matches_real_on_axis() {
        let z = bessel_k_complex(1.3, c(2.5, 0.0)).unwrap();
        let r = bessel_k(1.3, 2.5).unwrap();
        assert!((z.re - r).abs() / r < 1e-13);
        assert_eq!(z.im, 0.0);
    }

    #[test]
    fn complex_pow_basics() {
        assert_eq!(complex_pow(c(1.0, 0.0), c(0.3, -2.0)).unwrap(), c(1.0, 0.0));
        let m1 = complex_pow(c(0.0, 1.0), c(2.0, 0.0)).unwrap();
        assert!((m1 - c(-1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(complex_pow(c(0.0, 0.0), c(1.0, 0.0)), Err(Error::Singularity(_))));
    }
}
