//! Error metrics, Monte Carlo studies, rate regressions and the refitted
//! observable density.

use crate::error::{Error, Result};
use crate::mellin::{estimate_density_known_mu, estimate_density_plugin, CharFunction, DensityEstimate, EstimatorConfig};
use crate::models::{normal_pdf, MixingModel, MixtureModel, Sample};
use crate::mu_estimator::{estimate_mu, WeightFunction, DEFAULT_BIG_M, DEFAULT_TOL};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// R(ĝ) = sqrt((1/M) Σ (ĝ(x_k) - g(x_k))²).
pub fn r_metric(estimate: &DensityEstimate, truth: &MixingModel) -> Result<f64> {
    if estimate.grid.is_empty() {
        return Err(Error::Degenerate("empty grid".into()));
    }
    let mut sum = 0.0;
    for (&x, &v) in estimate.grid.iter().zip(&estimate.values) {
        let d = v - truth.density(x)?;
        sum += d * d;
    }
    Ok((sum / estimate.grid.len() as f64).sqrt())
}

/// RMS distance between two functions sampled on the same grid.
pub fn grid_rms(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Degenerate(format!("grid lengths {} and {} differ or are zero", a.len(), b.len())));
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / a.len() as f64).sqrt())
}

/// Least-squares slope of ln(rmse) against ln(n).
pub fn fit_slope(sizes: &[usize], rmse: &[f64]) -> Result<f64> {
    if sizes.len() != rmse.len() {
        return Err(Error::Degenerate(format!("{} sizes but {} errors", sizes.len(), rmse.len())));
    }
    if sizes.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 sizes, got {}", sizes.len())));
    }
    if let Some(r) = rmse.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Degenerate(format!("errors must be finite and > 0, got {r}")));
    }
    if sizes.contains(&0) {
        return Err(Error::Degenerate("sample sizes must be positive".into()));
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rmse.iter().map(|r| r.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all sample sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

fn grid_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::NonUniformGrid("need at least two grid points".into()));
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    for (k, w) in grid.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0) {
            return Err(Error::NonUniformGrid(format!("spacing {} at index {k} differs from {step}", w[1] - w[0])));
        }
    }
    Ok(step)
}

/// p̂(x) = Δ_s Σ_k φ_{N(μ̂ s_k, s_k)}(x) ĝ(s_k). Negative ĝ values enter as-is.
pub fn refit_density(x: f64, mu_hat: f64, g_hat: &DensityEstimate) -> Result<f64> {
    let step = grid_step(&g_hat.grid)?;
    Ok(step * kernel_sum(x, mu_hat, g_hat))
}

/// The refit rescaled so that it integrates to one.
pub fn refit_density_normalized(x: f64, mu_hat: f64, g_hat: &DensityEstimate) -> Result<f64> {
    grid_step(&g_hat.grid)?;
    let mass: f64 = g_hat.values.iter().sum();
    if mass == 0.0 {
        return Err(Error::Degenerate("estimated density has zero mass on the grid".into()));
    }
    Ok(kernel_sum(x, mu_hat, g_hat) / mass)
}

fn kernel_sum(x: f64, mu_hat: f64, g_hat: &DensityEstimate) -> f64 {
    g_hat.grid.iter().zip(&g_hat.values).map(|(&s, &g)| normal_pdf(x, mu_hat * s, s) * g).sum()
}

/// Quantity estimated in every replicate of a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyTarget {
    Mu,
    DensityKnownMu,
    DensityPlugin,
}

/// A seeded Monte Carlo experiment over several sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloStudy {
    pub model: MixtureModel,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    pub config: EstimatorConfig,
    pub targets: Vec<StudyTarget>,
    /// Evaluation grid for the density targets.
    pub grid: Vec<f64>,
    pub big_m: f64,
    /// When set, U = n^{1/4} and V = κ ln n are recomputed for every size,
    /// keeping γ and the quadrature settings of `config`.
    #[serde(default)]
    pub theory_kappa: Option<f64>,
}

impl MonteCarloStudy {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.config.validate()?;
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::InvalidParameter("sample sizes must be non-empty and positive".into()));
        }
        if self.sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("sample sizes must be strictly increasing".into()));
        }
        for &n in &self.sample_sizes {
            self.config_for(n)?;
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidParameter("at least one target is required".into()));
        }
        let wants_density = self.targets.iter().any(|t| *t != StudyTarget::Mu);
        if wants_density && self.grid.is_empty() {
            return Err(Error::InvalidParameter("density targets need a grid".into()));
        }
        if wants_density && matches!(self.model.mixing, MixingModel::PointMass { .. }) {
            return Err(Error::Unsupported("density targets for a point-mass mixing law".into()));
        }
        Ok(())
    }

    fn wants(&self, t: StudyTarget) -> bool {
        self.targets.contains(&t)
    }

    /// Estimator settings used at sample size `n`.
    pub fn config_for(&self, n: usize) -> Result<EstimatorConfig> {
        match self.theory_kappa {
            None => Ok(self.config),
            Some(kappa) => {
                let t = EstimatorConfig::theory(n, self.config.gamma, kappa)?;
                Ok(EstimatorConfig { u_max: t.u_max, v_max: t.v_max, ..self.config })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateStatus {
    Ok,
    /// The μ root search hit a boundary without bracketing a sign change.
    NoBracket,
    Failed,
}

/// Outcome of one (n, replicate) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub stream: u64,
    pub status: ReplicateStatus,
    pub mu_hat: Option<f64>,
    pub r_known: Option<f64>,
    pub r_plugin: Option<f64>,
    pub message: Option<String>,
}

/// min, q1, median, q3, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(FiveNumber {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    FiveNumber::of(values).map(|f| f.median)
}

/// Per-size summary over the successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub ok: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub mu_hat: Option<FiveNumber>,
    pub mu_abs_error: Option<FiveNumber>,
    pub mu_rmse: Option<f64>,
    pub r_known: Option<FiveNumber>,
    pub r_plugin: Option<FiveNumber>,
    /// |R(ĝ) - R(ĝ°)| over replicates that produced both.
    pub r_gap: Option<FiveNumber>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: MonteCarloStudy,
    pub records: Vec<ReplicateRecord>,
    pub summaries: Vec<SizeSummary>,
}

impl StudyResult {
    pub fn summary(&self, n: usize) -> Option<&SizeSummary> {
        self.summaries.iter().find(|s| s.n == n)
    }

    /// ln-ln slope of the μ RMSE over the sample sizes.
    pub fn mu_rate(&self) -> Result<f64> {
        let (sizes, rmse): (Vec<usize>, Vec<f64>) =
            self.summaries.iter().filter_map(|s| s.mu_rmse.map(|r| (s.n, r))).unzip();
        fit_slope(&sizes, &rmse)
    }
}

/// ChaCha20 stream of replicate `rep` at size index `size_idx`.
pub fn replicate_stream(size_idx: usize, rep: usize) -> u64 {
    ((size_idx as u64) << 32) | rep as u64
}

/// Runs every replicate in parallel; the result does not depend on scheduling.
pub fn run_study(study: &MonteCarloStudy) -> Result<StudyResult> {
    study.validate()?;
    let cells: Vec<(usize, usize, usize)> = study
        .sample_sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..study.replicates).map(move |r| (i, n, r)))
        .collect();
    let records: Vec<ReplicateRecord> =
        cells.par_iter().map(|&(i, n, r)| run_replicate(study, n, r, replicate_stream(i, r))).collect();

    let summaries = study
        .sample_sizes
        .iter()
        .map(|&n| summarize(study, n, records.iter().filter(|rec| rec.n == n)))
        .collect();
    Ok(StudyResult { study: study.clone(), records, summaries })
}

fn run_replicate(study: &MonteCarloStudy, n: usize, replicate: usize, stream: u64) -> ReplicateRecord {
    let mut rec = ReplicateRecord {
        n,
        replicate,
        stream,
        status: ReplicateStatus::Ok,
        mu_hat: None,
        r_known: None,
        r_plugin: None,
        message: None,
    };
    let outcome = (|| -> Result<()> {
        let sample = Sample::simulate(&study.model, n, study.base_seed, stream)?;
        let truth = study.model.mixing;
        let config = study.config_for(n)?;
        if study.wants(StudyTarget::Mu) || study.wants(StudyTarget::DensityPlugin) {
            let est = estimate_mu(&sample, &WeightFunction::sine(), study.big_m, DEFAULT_TOL)?;
            rec.mu_hat = Some(est.value);
            if !est.bracket_found {
                rec.status = ReplicateStatus::NoBracket;
            }
        }
        if study.wants(StudyTarget::DensityKnownMu) {
            let cf = CharFunction::Empirical(sample.clone());
            let d = estimate_density_known_mu(&cf, study.model.mu, &study.grid, &config)?;
            rec.r_known = Some(r_metric(&d, &truth)?);
        }
        if study.wants(StudyTarget::DensityPlugin) {
            let mu_hat = rec.mu_hat.expect("computed above");
            let d = estimate_density_plugin(&sample, mu_hat, &study.grid, &config)?;
            rec.r_plugin = Some(r_metric(&d, &truth)?);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.status = ReplicateStatus::Failed;
        rec.message = Some(e.to_string());
    }
    rec
}

fn summarize<'a>(study: &MonteCarloStudy, n: usize, records: impl Iterator<Item = &'a ReplicateRecord>) -> SizeSummary {
    let records: Vec<&ReplicateRecord> = records.collect();
    let ok: Vec<&&ReplicateRecord> = records.iter().filter(|r| r.status == ReplicateStatus::Ok).collect();
    let failures = records.len() - ok.len();
    let collect = |f: &dyn Fn(&ReplicateRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let mu = study.model.mu;
    let mu_hat = collect(&|r| r.mu_hat);
    let mu_err: Vec<f64> = mu_hat.iter().map(|m| (m - mu).abs()).collect();
    let mu_rmse = if mu_err.is_empty() {
        None
    } else {
        Some((mu_err.iter().map(|e| e * e).sum::<f64>() / mu_err.len() as f64).sqrt())
    };
    let r_known = collect(&|r| r.r_known);
    let r_plugin = collect(&|r| r.r_plugin);
    let r_gap = collect(&|r| Some((r.r_plugin? - r.r_known?).abs()));
    SizeSummary {
        n,
        ok: ok.len(),
        failures,
        failure_rate: failures as f64 / records.len().max(1) as f64,
        mu_hat: FiveNumber::of(&mu_hat),
        mu_abs_error: FiveNumber::of(&mu_err),
        mu_rmse,
        r_known: FiveNumber::of(&r_known),
        r_plugin: FiveNumber::of(&r_plugin),
        r_gap: FiveNumber::of(&r_gap),
    }
}

impl MonteCarloStudy {
    /// μ-only study with the default root-search bound.
    pub fn mu_only(model: MixtureModel, sample_sizes: Vec<usize>, replicates: usize, base_seed: u64) -> Self {
        MonteCarloStudy {
            model,
            sample_sizes,
            replicates,
            base_seed,
            config: EstimatorConfig::paper(),
            targets: vec![StudyTarget::Mu],
            grid: Vec::new(),
            big_m: DEFAULT_BIG_M,
            theory_kappa: None,
        }
    }
}
