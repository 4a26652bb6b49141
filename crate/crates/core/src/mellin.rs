//! Empirical Mellin inversion for the mixing density.
//!
//! The u-integral `∫_0^U φ(u) ψ(u)^{w-1} ψ'(u) du` is discretized once per
//! estimate: φ, ln ψ and ψ' are cached at every u-node, after which each
//! Mellin value costs one pass over the nodes. The inverse transform then
//! integrates `M̂[g](γ+iv) x^{-γ-iv}` over `[-V, V]` with the Mellin values
//! cached per v-node and shared across all abscissae.

use crate::error::{Error, Result};
use crate::models::{MixtureModel, Sample};
use crate::quadrature::GaussLegendre;
use crate::special::log_gamma;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gauss–Legendre order on every panel.
const PANEL_ORDER: usize = 8;
/// Smallest graded coordinate resolved on the first u-panel.
const GRADED_FLOOR: f64 = 1e-16;
const MAX_PANEL_WIDTH: f64 = 0.25;
/// Distance from a Γ pole below which `Γ(1 - z)` is refused.
const POLE_GUARD: f64 = 1e-8;

/// φ_n(u) = (1/n) Σ e^{iuX_k}.
pub fn ecf(sample: &Sample, u: f64) -> Complex64 {
    let (mut c, mut s) = (0.0, 0.0);
    for &x in sample.values() {
        let (sn, cs) = (u * x).sin_cos();
        c += cs;
        s += sn;
    }
    let n = sample.len() as f64;
    Complex64::new(c / n, s / n)
}

/// The characteristic function fed to the estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum CharFunction {
    Empirical(Sample),
    /// Exact φ_X(u) = L_ξ(ψ(u)); used for noiseless oracle runs.
    Exact(MixtureModel),
}

impl CharFunction {
    pub fn eval(&self, u: f64) -> Result<Complex64> {
        match self {
            CharFunction::Empirical(s) => Ok(ecf(s, u)),
            CharFunction::Exact(m) => m.char_function(u),
        }
    }

    /// Oscillation scale in u: the 0.99 quantile of |X|, zero for an exact cf.
    fn oscillation_scale(&self) -> f64 {
        match self {
            CharFunction::Empirical(s) => s.abs_quantile(0.99),
            CharFunction::Exact(_) => 0.0,
        }
    }

    fn is_exact(&self) -> bool {
        matches!(self, CharFunction::Exact(_))
    }
}

/// ψ(u) = -iμu + u²/2 and its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharExponent {
    pub mu: f64,
}

impl CharExponent {
    pub fn new(mu: f64) -> Self {
        CharExponent { mu }
    }

    pub fn psi(&self, u: f64) -> Complex64 {
        Complex64::new(0.5 * u * u, -self.mu * u)
    }

    pub fn dpsi(&self, u: f64) -> Complex64 {
        Complex64::new(u, -self.mu)
    }
}

/// Which of the two conjugate u-integrals is used at a given Mellin argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// Conjugated kernel when Im w < 0 (v > 0 in the inversion integral),
    /// direct kernel when Im w > 0, independently of μ.
    #[default]
    Display,
    /// Direct kernel when μ·Im w < 0, conjugated when μ·Im w > 0, so that
    /// |ψ(u)^w| stays below |ψ(u)|^{Re w}. μ = 0 uses the direct kernel.
    Damped,
}

/// The kernel bounded along the contour for argument `w`: `true` for the
/// direct kernel `φ ψ^{w-1} ψ'`, `false` for its conjugate.
pub fn bounded_branch(mu: f64, w: Complex64) -> Result<bool> {
    if mu == 0.0 {
        return Err(Error::Singularity("branch selection is undefined for mu = 0 (psi is real)".into()));
    }
    if w.im == 0.0 {
        return Err(Error::Singularity("branch selection is undefined for real arguments".into()));
    }
    Ok(mu * w.im < 0.0)
}

/// Tuning of the Mellin estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub gamma: f64,
    pub u_max: f64,
    pub v_max: f64,
    /// Minimum Gauss–Legendre nodes per unit length in u.
    pub u_nodes_per_unit: usize,
    /// Minimum Gauss–Legendre nodes per unit length in v.
    pub v_nodes_per_unit: usize,
    /// Exponent p of the graded mesh `u = h·t^p` on the first u-panel;
    /// `None` selects `1/(1-γ)`.
    pub singularity_grading_exponent: Option<f64>,
    #[serde(default)]
    pub branch: BranchPolicy,
}

pub const PAPER_GAMMA: f64 = 0.1;
pub const PAPER_U_MAX: f64 = 7.6;
pub const PAPER_V_MAX: f64 = 0.9;

impl EstimatorConfig {
    pub fn new(gamma: f64, u_max: f64, v_max: f64) -> Result<Self> {
        let cfg = EstimatorConfig {
            gamma,
            u_max,
            v_max,
            u_nodes_per_unit: 32,
            v_nodes_per_unit: 32,
            singularity_grading_exponent: None,
            branch: BranchPolicy::Display,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// γ = 0.1, U = 7.6, V = 0.9.
    pub fn paper() -> Self {
        EstimatorConfig::new(PAPER_GAMMA, PAPER_U_MAX, PAPER_V_MAX).expect("paper tuning is valid")
    }

    /// U = n^{1/4}, V = κ ln n.
    pub fn theory(n: usize, gamma: f64, kappa: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("theory tuning needs n >= 2, got {n}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be finite and > 0, got {kappa}")));
        }
        let n = n as f64;
        EstimatorConfig::new(gamma, n.powf(0.25), kappa * n.ln())
    }

    pub fn with_branch(mut self, branch: BranchPolicy) -> Self {
        self.branch = branch;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.gamma > 0.5 {
            log::warn!("gamma = {} exceeds 1/2; the convergence theory assumes gamma < 1/2", self.gamma);
        }
        for (name, v) in [("u_max", self.u_max), ("v_max", self.v_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.u_nodes_per_unit == 0 || self.v_nodes_per_unit == 0 {
            return Err(Error::InvalidParameter("node densities must be positive".into()));
        }
        if let Some(p) = self.singularity_grading_exponent {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("grading exponent must be >= 1, got {p}")));
            }
        }
        Ok(())
    }

    pub fn grading_exponent(&self) -> f64 {
        self.singularity_grading_exponent.unwrap_or(1.0 / (1.0 - self.gamma))
    }
}

#[derive(Debug, Clone, Copy)]
struct UNode {
    /// weight · φ(u) · ψ'(u)
    coeff: Complex64,
    /// principal ln ψ(u)
    ln_psi: Complex64,
}

/// z ↦ M̂[g](z) with the u-quadrature cached.
#[derive(Debug, Clone)]
pub struct MellinEstimate {
    config: EstimatorConfig,
    exponent: CharExponent,
    nodes: Vec<UNode>,
    exact_cf: bool,
}

impl MellinEstimate {
    pub fn new(cf: &CharFunction, exponent: CharExponent, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        if !exponent.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be finite, got {}", exponent.mu)));
        }
        let rule = GaussLegendre::new(PANEL_ORDER);
        let scale = cf.oscillation_scale();
        let width = MAX_PANEL_WIDTH
            .min(PI / (2.0 * (scale + config.v_max)))
            .min(PANEL_ORDER as f64 / config.u_nodes_per_unit as f64);
        let u_max = config.u_max;
        let panels = (u_max / width).ceil().max(1.0) as usize;
        let h = u_max / panels as f64;
        let p = config.grading_exponent();

        // First panel: u = h·t^p, with t ∈ (0, 1] cut geometrically so the
        // phase v·p·ln t advances by at most π per piece.
        let ratio = (-(PI / (p * config.v_max.max(1.0))).min(1.0)).exp();
        let pieces = (GRADED_FLOOR.ln() / ratio.ln()).ceil() as usize;
        let mut points: Vec<(f64, f64)> = Vec::with_capacity((panels + pieces + 1) * PANEL_ORDER);
        let mut b = 1.0;
        for j in 0..=pieces {
            let a = if j == pieces { 0.0 } else { b * ratio };
            for (t, wt) in rule.mapped(a, b) {
                points.push((h * t.powf(p), wt * h * p * t.powf(p - 1.0)));
            }
            b = a;
        }
        for k in 1..panels {
            let a = k as f64 * h;
            points.extend(rule.mapped(a, a + h));
        }

        let nodes = points
            .par_iter()
            .map(|&(u, wt)| {
                let phi = cf.eval(u)?;
                Ok(UNode { coeff: phi * exponent.dpsi(u) * wt, ln_psi: exponent.psi(u).ln() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MellinEstimate { config: *config, exponent, nodes, exact_cf: cf.is_exact() })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn exponent(&self) -> CharExponent {
        self.exponent
    }

    pub fn u_node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn uses_exact_cf(&self) -> bool {
        self.exact_cf
    }

    /// ∫_0^U φ(u) ψ(u)^{w-1} ψ'(u) du on the cached nodes.
    pub fn direct(&self, w: Complex64) -> Complex64 {
        let e = w - 1.0;
        self.nodes.iter().map(|n| n.coeff * (e * n.ln_psi).exp()).sum()
    }

    /// ∫_0^U conj(φ) conj(ψ)^{w-1} conj(ψ') du, computed as conj(direct(conj w)).
    pub fn conjugated(&self, w: Complex64) -> Complex64 {
        self.direct(w.conj()).conj()
    }

    /// M̂[L_ξ](w) with the branch set by the configured policy.
    pub fn mellin_l(&self, w: Complex64) -> Complex64 {
        if w.im == 0.0 {
            return Complex64::new(self.direct(w).re, 0.0);
        }
        let direct = match self.config.branch {
            BranchPolicy::Display => w.im > 0.0,
            BranchPolicy::Damped => {
                let sign = if self.exponent.mu < 0.0 { -1.0 } else { 1.0 };
                sign * w.im < 0.0
            }
        };
        if direct {
            self.direct(w)
        } else {
            self.conjugated(w)
        }
    }

    /// M̂[g](z) = M̂[L_ξ](1-z) / Γ(1-z).
    pub fn mellin_g(&self, z: Complex64) -> Result<Complex64> {
        let w = Complex64::new(1.0, 0.0) - z;
        let nearest = w.re.round();
        if nearest <= 0.0 && (w.re - nearest).abs() < POLE_GUARD && w.im.abs() < POLE_GUARD {
            return Err(Error::Pole { re: w.re, im: w.im });
        }
        let ln_gamma = log_gamma(w)?;
        Ok(self.mellin_l(w) * (-ln_gamma).exp())
    }
}

/// M̂[L_ξ](z) for a single argument.
pub fn mellin_l_hat(z: Complex64, cf: &CharFunction, psi: CharExponent, cfg: &EstimatorConfig) -> Result<Complex64> {
    Ok(MellinEstimate::new(cf, psi, cfg)?.mellin_l(z))
}

/// M̂[g](z) for a single argument.
pub fn mellin_g_hat(z: Complex64, cf: &CharFunction, psi: CharExponent, cfg: &EstimatorConfig) -> Result<Complex64> {
    MellinEstimate::new(cf, psi, cfg)?.mellin_g(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    KnownMu,
    PluginMu,
    OracleCf,
}

/// Values of ĝ on a grid, unclamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// max over the grid of |Im| of the inverse-transform sum.
    pub max_imag_residual: f64,
    pub estimator_tag: EstimatorTag,
    pub mu: f64,
    pub config: EstimatorConfig,
}

impl DensityEstimate {
    /// max(ĝ, 0) pointwise.
    pub fn clamped(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(0.0)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Equidistant grid `min, min + step, …` up to `max` (inclusive within rounding).
pub fn uniform_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) || !(min.is_finite() && max.is_finite()) || max < min {
        return Err(Error::InvalidParameter(format!("bad grid: min={min}, max={max}, step={step}")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| min + step * k as f64).collect())
}

/// ĝ(x) = (1/2π) ∫_{-V}^{V} M̂[g](γ+iv) x^{-γ-iv} dv for each grid point.
pub fn invert(estimate: &MellinEstimate, grid: &[f64], tag: EstimatorTag) -> Result<DensityEstimate> {
    if let Some(bad) = grid.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!("grid points must be > 0, got {bad}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let cfg = *estimate.config();
    let rule = GaussLegendre::new(PANEL_ORDER);
    let width = MAX_PANEL_WIDTH.min(PANEL_ORDER as f64 / cfg.v_nodes_per_unit as f64);
    let panels = (cfg.v_max / width).ceil().max(1.0) as usize;
    let h = cfg.v_max / panels as f64;
    let v_nodes: Vec<(f64, f64)> =
        (0..panels).flat_map(|k| rule.mapped(k as f64 * h, (k + 1) as f64 * h).collect::<Vec<_>>()).collect();

    // (v, weight, M̂[g](γ+iv), M̂[g](γ-iv))
    let gamma = cfg.gamma;
    let table = v_nodes
        .par_iter()
        .map(|&(v, wt)| {
            let up = estimate.mellin_g(Complex64::new(gamma, v))?;
            let down = estimate.mellin_g(Complex64::new(gamma, -v))?;
            Ok((v, wt, up, down))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::with_capacity(grid.len());
    let mut max_imag: f64 = 0.0;
    for &x in grid {
        let ln_x = x.ln();
        let mut acc = Complex64::new(0.0, 0.0);
        for &(v, wt, up, down) in &table {
            let pos = Complex64::new(-gamma * ln_x, -v * ln_x).exp();
            let neg = Complex64::new(-gamma * ln_x, v * ln_x).exp();
            acc += (up * pos + down * neg) * wt;
        }
        acc /= 2.0 * PI;
        values.push(acc.re);
        max_imag = max_imag.max(acc.im.abs());
    }
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        max_imag_residual: max_imag,
        estimator_tag: tag,
        mu: estimate.exponent().mu,
        config: cfg,
    })
}

/// ĝ° with the drift known.
pub fn estimate_density_known_mu(cf: &CharFunction, mu: f64, grid: &[f64], cfg: &EstimatorConfig) -> Result<DensityEstimate> {
    let est = MellinEstimate::new(cf, CharExponent::new(mu), cfg)?;
    let tag = if cf.is_exact() { EstimatorTag::OracleCf } else { EstimatorTag::KnownMu };
    invert(&est, grid, tag)
}

/// ĝ with the drift replaced by an estimate.
pub fn estimate_density_plugin(sample: &Sample, mu_hat: f64, grid: &[f64], cfg: &EstimatorConfig) -> Result<DensityEstimate> {
    let est = MellinEstimate::new(&CharFunction::Empirical(sample.clone()), CharExponent::new(mu_hat), cfg)?;
    invert(&est, grid, EstimatorTag::PluginMu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::MixingModel;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ecf_basics() {
        let s = Sample::from_values(vec![1.0, -1.0]).unwrap();
        assert_eq!(ecf(&s, 0.0), c(1.0, 0.0));
        for u in [0.3, 1.7, 5.0] {
            let v = ecf(&s, u);
            assert!((v.re - u.cos()).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn char_exponent_values() {
        let p = CharExponent::new(0.5);
        assert_eq!(p.psi(0.0), c(0.0, -0.0));
        assert_eq!(p.psi(2.0), c(2.0, -1.0));
        assert_eq!(p.dpsi(2.0), c(2.0, -0.5));
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::new(0.0, 1.0, 1.0).is_err());
        assert!(EstimatorConfig::new(1.0, 1.0, 1.0).is_err());
        assert!(EstimatorConfig::new(0.3, 0.0, 1.0).is_err());
        assert!(EstimatorConfig::new(0.3, 1.0, f64::INFINITY).is_err());
        assert!(EstimatorConfig::new(0.7, 1.0, 1.0).is_ok());
        assert!(EstimatorConfig::theory(1000, 0.1, 0.0).is_err());
        let t = EstimatorConfig::theory(10_000, 0.1, 0.2).unwrap();
        assert!((t.u_max - 10.0).abs() < 1e-12);
        assert!((t.v_max - 0.2 * 10_000f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bounded_branch_rules() {
        assert!(bounded_branch(0.5, c(0.7, -1.0)).unwrap());
        assert!(!bounded_branch(0.5, c(0.7, 1.0)).unwrap());
        assert!(bounded_branch(-0.5, c(0.7, 1.0)).unwrap());
        assert!(matches!(bounded_branch(0.0, c(0.7, 1.0)), Err(Error::Singularity(_))));
    }

    #[test]
    fn point_mass_mellin_is_one() {
        let m = MixtureModel::new(0.5, MixingModel::PointMass { atom: 1.0 }).unwrap();
        let cfg = EstimatorConfig::new(0.3, 50.0, 1.0).unwrap();
        let v = mellin_g_hat(c(0.3, 0.0), &CharFunction::Exact(m), CharExponent::new(0.5), &cfg).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-3, "{v}");
    }

    #[test]
    fn tiny_truncation_gives_tiny_transform() {
        let s = Sample::from_values(vec![0.3, -1.2, 2.0]).unwrap();
        let cfg = EstimatorConfig::new(0.3, 1e-9, 1.0).unwrap();
        let v = mellin_l_hat(c(0.7, 0.2), &CharFunction::Empirical(s), CharExponent::new(0.5), &cfg).unwrap();
        assert!(v.norm() < 1e-4);
    }

    #[test]
    fn pole_guard() {
        let s = Sample::from_values(vec![0.3, -1.2, 2.0]).unwrap();
        let est = MellinEstimate::new(&CharFunction::Empirical(s), CharExponent::new(0.5), &EstimatorConfig::paper()).unwrap();
        assert!(matches!(est.mellin_g(c(1.0, 0.0)), Err(Error::Pole { .. })));
        assert!(matches!(est.mellin_g(c(2.0 + 1e-9, 0.0)), Err(Error::Pole { .. })));
    }

    #[test]
    fn non_positive_grid_rejected() {
        let s = Sample::from_values(vec![0.3, -1.2, 2.0]).unwrap();
        let r = estimate_density_plugin(&s, 0.1, &[0.0, 1.0], &EstimatorConfig::paper());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_grid_includes_endpoint() {
        let g = uniform_grid(0.5, 4.0, 0.05).unwrap();
        assert_eq!(g.len(), 71);
        assert!((g[70] - 4.0).abs() < 1e-12);
        assert_eq!(uniform_grid(0.1, 8.0, 0.1).unwrap().len(), 80);
    }

    #[test]
    fn plugin_with_true_mu_matches_known_mu_exactly() {
        let m = MixtureModel::new(0.5, MixingModel::Gamma { shape: 2.0, rate: 1.0 }).unwrap();
        let s = Sample::simulate(&m, 300, 3, 0).unwrap();
        let grid = uniform_grid(0.5, 3.0, 0.5).unwrap();
        let cfg = EstimatorConfig::paper();
        let a = estimate_density_known_mu(&CharFunction::Empirical(s.clone()), 0.5, &grid, &cfg).unwrap();
        let b = estimate_density_plugin(&s, 0.5, &grid, &cfg).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.estimator_tag, EstimatorTag::KnownMu);
        assert_eq!(b.estimator_tag, EstimatorTag::PluginMu);
    }
}
