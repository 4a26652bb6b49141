#![allow(dead_code)]

use vmmix::quadrature::adaptive;

/// Kolmogorov–Smirnov statistic of `values` against the law with density
/// `density`, whose mass below `lower` is negligible.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], density: F, lower: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut cdf = 0.0;
    let mut prev = lower;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        if x > prev {
            cdf += adaptive(&density, prev, x, 1e-14, 1e-11, 400).value;
            prev = x;
        }
        d = d.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
    }
    d
}

/// 1% critical value of the one-sample KS test.
pub fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Asymptotic KS critical value at level `alpha`, c(α) = sqrt(-ln(α/2)/2).
pub fn ks_critical_at(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

pub fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn sample_variance_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    let m4 = values.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (var, ((m4 - var * var) / n).sqrt())
}
