use num_complex::Complex64;
use std::f64::consts::PI;
use vmmix::special::{bessel_k, bessel_k_complex, complex_pow, gamma, ln_bessel_k, log_gamma};
use vmmix::Error;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Γ(z) = ∫ exp(zs - e^s) ds over the real line (t = e^s), by the trapezoid rule;
/// the lower cut keeps e^{Re z · s} below e^{-40}.
fn gamma_oracle(z: Complex64) -> Complex64 {
    let (a, b, h) = (-40.0 / z.re.min(0.9), 4.0, 0.005);
    let steps = ((b - a) / h) as usize;
    let f = |s: f64| (z * s - s.exp()).exp();
    let mut acc = (f(a) + f(b)) * 0.5;
    for k in 1..steps {
        acc += f(a + h * k as f64);
    }
    acc * h
}

/// K_λ(x) = ½ ∫ u^{λ-1} exp(-x(u + 1/u)/2) du with u = e^s, trapezoid rule.
fn bessel_oracle(lambda: f64, x: f64) -> f64 {
    let (a, b, h) = (-12.0, 12.0, 0.002);
    let steps = ((b - a) / h) as usize;
    let f = |s: f64| 0.5 * (lambda * s - 0.5 * x * (s.exp() + (-s).exp())).exp();
    let mut acc = 0.5 * (f(a) + f(b));
    for k in 1..steps {
        acc += f(a + h * k as f64);
    }
    acc * h
}

#[test]
fn log_gamma_matches_integral_oracle() {
    for z in [c(0.9, -0.9), c(2.5, 3.0), c(0.3, 6.0), c(7.0, -1.5)] {
        let got = gamma(z).unwrap();
        let want = gamma_oracle(z);
        assert!((got - want).norm() / want.norm() < 1e-12, "z={z}: {got} vs {want}");
    }
}

#[test]
fn log_gamma_recurrence_on_strip() {
    for i in 0..=49 {
        for j in -30..=30 {
            let z = c(0.1 + 0.1 * i as f64, j as f64);
            let lhs = log_gamma(z + 1.0).unwrap();
            let rhs = z.ln() + log_gamma(z).unwrap();
            let rel = (lhs.exp() - rhs.exp()).norm() / lhs.exp().norm();
            assert!(rel <= 1e-10, "z={z}: rel={rel}");
        }
    }
}

#[test]
fn gamma_reflection_on_critical_line() {
    for y in [0.0, 0.5, 1.0, 3.0, 10.0, 25.0] {
        let g = gamma(c(0.5, y)).unwrap();
        let want = PI / (PI * y).cosh();
        assert!((g.norm_sqr() - want).abs() / want < 1e-12, "y={y}");
    }
}

#[test]
fn gamma_reflection_formula() {
    for z in [c(0.3, 0.2), c(-1.7, 0.4), c(-3.2, -2.0), c(0.9, 5.0)] {
        let prod = gamma(z).unwrap() * gamma(c(1.0, 0.0) - z).unwrap();
        let want = PI / (z * PI).sin();
        assert!((prod - want).norm() / want.norm() < 1e-11, "z={z}");
    }
}

#[test]
fn log_gamma_conjugate_symmetry() {
    for z in [c(0.7, 3.0), c(-2.3, 0.8), c(12.0, 40.0)] {
        let a = log_gamma(z.conj()).unwrap();
        let b = log_gamma(z).unwrap().conj();
        assert!((a - b).norm() < 1e-13);
    }
}

#[test]
fn gamma_lower_bound_floor() {
    for i in 0..=30 {
        let re = -2.0 + 0.1 * i as f64;
        for k in 0..=78 {
            let y = 1.0 + 0.5 * k as f64;
            for im in [y, -y] {
                let w = c(re, im);
                let g = gamma(w).unwrap().norm();
                let floor = 1e-3 * y.powf(re - 0.5) * (-y * PI / 2.0).exp();
                assert!(g > floor, "w={w}: |Γ|={g:e} floor={floor:e}");
            }
        }
    }
}

#[test]
fn log_gamma_pole_tolerance() {
    assert!(matches!(log_gamma(c(-3.0 + 5e-15, 0.0)), Err(Error::Pole { .. })));
    assert!(log_gamma(c(-3.0 + 1e-10, 0.0)).is_ok());
}

#[test]
fn bessel_reference_values() {
    assert!((bessel_k(1.0, 1.0).unwrap() - 0.601_907_230_197_234_6).abs() < 1e-14);
    assert!((bessel_k(0.0, 1.0).unwrap() - 0.421_024_438_240_708_3).abs() < 1e-14);
    assert!((bessel_k(-1.0, 1.0).unwrap() - bessel_k(1.0, 1.0).unwrap()).abs() < 1e-15);
    let half = (PI / 4.0).sqrt() * (-2.0f64).exp();
    assert!((bessel_k(0.5, 2.0).unwrap() - half).abs() < 1e-14);
    assert!((half - 0.119_937_7).abs() < 1e-7);
}

#[test]
fn bessel_matches_trapezoid_oracle() {
    for (lambda, x) in [(1.0, 1.0), (0.3, 0.05), (2.5, 4.0), (-1.7, 0.7), (6.0, 15.0)] {
        let got = bessel_k(lambda, x).unwrap();
        let want = bessel_oracle(lambda, x);
        assert!((got - want).abs() / want < 1e-12, "λ={lambda}, x={x}: {got} vs {want}");
    }
}

#[test]
fn bessel_recurrence() {
    for lambda in [-1.5, -0.3, 0.0, 0.5, 1.0, 2.7, 8.0] {
        for x in [0.05, 0.5, 1.0, 3.0, 20.0, 80.0] {
            let lhs = bessel_k(lambda + 1.0, x).unwrap();
            let rhs = bessel_k(lambda - 1.0, x).unwrap() + 2.0 * lambda / x * bessel_k(lambda, x).unwrap();
            assert!((lhs - rhs).abs() / lhs < 1e-10, "λ={lambda}, x={x}");
        }
    }
}

#[test]
fn bessel_large_argument_stays_finite_in_log() {
    let l = ln_bessel_k(1.0, 800.0).unwrap();
    let asym = 0.5 * (PI / 1600.0).ln() - 800.0;
    assert!((l - asym).abs() < 1e-3);
}

#[test]
fn complex_bessel_half_order_closed_form() {
    for w in [c(1.0, 2.0), c(0.3, -5.0), c(4.0, 0.5)] {
        let got = bessel_k_complex(0.5, w).unwrap();
        let want = (c(PI, 0.0) / (w * 2.0)).sqrt() * (-w).exp();
        assert!((got - want).norm() / want.norm() < 1e-12, "w={w}");
    }
    assert!(matches!(bessel_k_complex(1.0, c(0.0, 1.0)), Err(Error::Domain(_))));
}

#[test]
fn complex_pow_modulus_formula() {
    let mu: f64 = 0.5;
    for u in [0.1, 1.0, 4.0] {
        let psi = c(0.5 * u * u, -mu * u);
        for z in [c(0.3, 1.0), c(-0.2, -2.0), c(0.7, 0.0)] {
            let got = complex_pow(psi, z).unwrap().norm();
            let want = ((z.re / 2.0) * (mu * mu * u * u + u.powi(4) / 4.0).ln()).exp()
                * (z.im * (2.0 * mu / u).atan()).exp();
            assert!((got - want).abs() / want < 1e-13);
        }
    }
}
