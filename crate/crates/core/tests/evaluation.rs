mod common;

use common::normal_density;
use proptest::prelude::*;
use std::f64::consts::PI;
use vmmix::evaluation::*;
use vmmix::mellin::*;
use vmmix::models::*;
use vmmix::quadrature::adaptive;
use vmmix::Error;

fn on_grid(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> DensityEstimate {
    let values = grid.iter().map(|&s| f(s)).collect();
    DensityEstimate {
        grid,
        values,
        max_imag_residual: 0.0,
        estimator_tag: EstimatorTag::OracleCf,
        mu: 0.5,
        config: EstimatorConfig::paper(),
    }
}

/// Midpoints of `panels` cells of width `step` starting at `a`.
fn midpoints(a: f64, step: f64, panels: usize) -> Vec<f64> {
    (0..panels).map(|k| a + (k as f64 + 0.5) * step).collect()
}

fn unit_gig() -> GigParams {
    GigParams::new(1.0, 1.0, 1.0).unwrap()
}

fn kernel(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn sup_on_window(f: impl Fn(f64) -> f64) -> f64 {
    (0..=80).map(|k| -3.0 + 0.1 * k as f64).map(f).fold(0.0, f64::max)
}

#[test]
fn r_metric_examples() {
    let mixing = MixingModel::Gamma { shape: 2.0, rate: 1.0 };
    let grid = uniform_grid(0.1, 5.0, 0.1).unwrap();
    let exact = on_grid(grid.clone(), |s| mixing.density(s).unwrap());
    assert_eq!(r_metric(&exact, &mixing).unwrap(), 0.0);
    let shifted = on_grid(grid, |s| mixing.density(s).unwrap() - 0.03);
    assert!((r_metric(&shifted, &mixing).unwrap() - 0.03).abs() < 1e-15);
    let empty = on_grid(Vec::new(), |s| s);
    assert!(r_metric(&empty, &mixing).is_err());
}

#[test]
fn fit_slope_examples() {
    let sizes = [250, 500, 1000, 2000, 4000];
    let rmse: Vec<f64> = sizes.iter().map(|&n| 3.0 / (n as f64).sqrt()).collect();
    assert!((fit_slope(&sizes, &rmse).unwrap() + 0.5).abs() < 1e-12);
    assert!(fit_slope(&sizes, &[0.2; 5]).unwrap().abs() < 1e-12);
    assert!(matches!(fit_slope(&[100, 100, 100], &[0.1, 0.2, 0.3]), Err(Error::Degenerate(_))));
    assert!(matches!(fit_slope(&[1, 2], &[0.1, 0.2]), Err(Error::Degenerate(_))));
    assert!(matches!(fit_slope(&[1, 2, 3], &[0.1, 0.0, 0.3]), Err(Error::Degenerate(_))));
}

/// On a fixed interval the refit is a midpoint rule, so halving the step quarters the error.
#[test]
fn refit_converges_at_second_order() {
    let params = unit_gig();
    let (a, b) = (0.5, 5.3);
    let truncated = |x: f64| adaptive(|s: f64| gig_density(s, &params) * kernel(x, 0.5 * s, s), a, b, 1e-15, 1e-14, 4000).value;
    let err = |step: f64| {
        let panels = ((b - a) / step).round() as usize;
        let g = on_grid(midpoints(a, step, panels), |s| gig_density(s, &params));
        sup_on_window(|x| (refit_density(x, 0.5, &g).unwrap() - truncated(x)).abs())
    };
    let (e1, e2, e3) = (err(0.2), err(0.1), err(0.05));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((ratio - 4.0).abs() < 0.2, "{e1:e} {e2:e} {e3:e}");
    }
}

#[test]
fn refit_of_exact_mixing_density_matches_gh() {
    let params = unit_gig();
    for step in [0.2, 0.1, 0.05] {
        let g = on_grid(midpoints(0.0, step, (60.0 / step).round() as usize), |s| gig_density(s, &params));
        let err = sup_on_window(|x| (refit_density(x, 0.5, &g).unwrap() - gh_density(x, 0.5, &params)).abs());
        assert!(err <= 0.05 * step * step, "step {step}: {err:e}");
    }
}

#[test]
fn refit_preserves_mass() {
    let mixing = MixingModel::Gamma { shape: 2.0, rate: 1.0 };
    let step = 0.1;
    let mut g = on_grid(uniform_grid(0.1, 8.0, step).unwrap(), |s| mixing.density(s).unwrap());
    g.values[5] = -0.05;
    let mass: f64 = step * g.values.iter().sum::<f64>();
    let integral = adaptive(|x: f64| refit_density(x, 0.3, &g).unwrap(), -40.0, 40.0, 1e-13, 1e-12, 4000).value;
    assert!((integral - mass).abs() < 1e-9, "{integral} vs {mass}");
    let normalized = adaptive(|x: f64| refit_density_normalized(x, 0.3, &g).unwrap(), -40.0, 40.0, 1e-13, 1e-12, 4000).value;
    assert!((normalized - 1.0).abs() < 1e-9);
}

#[test]
fn narrow_bump_at_one_refits_to_standard_normal() {
    let mut prev = f64::INFINITY;
    for step in [0.02, 0.01, 0.005] {
        let h = 4.0 * step;
        let g = on_grid(uniform_grid(step, 3.0, step).unwrap(), |s| ((1.0 - (s - 1.0).abs() / h) / h).max(0.0));
        let err = sup_on_window(|x| (refit_density(x, 0.0, &g).unwrap() - normal_density(x)).abs());
        assert!(err < prev, "{err} after {prev}");
        prev = err;
    }
    assert!(prev < 1e-4, "{prev}");
}

#[test]
fn refit_rejects_nonuniform_grid() {
    let g = on_grid(vec![0.1, 0.2, 0.4], |_| 1.0);
    assert!(matches!(refit_density(0.0, 0.5, &g), Err(Error::NonUniformGrid(_))));
    let single = on_grid(vec![0.1], |_| 1.0);
    assert!(matches!(refit_density(0.0, 0.5, &single), Err(Error::NonUniformGrid(_))));
}

fn small_density_study(seed: u64) -> MonteCarloStudy {
    let model = MixtureModel::new(0.5, MixingModel::Gig(unit_gig())).unwrap();
    MonteCarloStudy {
        targets: vec![StudyTarget::Mu, StudyTarget::DensityKnownMu, StudyTarget::DensityPlugin],
        grid: uniform_grid(0.1, 5.0, 0.1).unwrap(),
        ..MonteCarloStudy::mu_only(model, vec![200, 400], 4, seed)
    }
}

#[test]
fn study_is_deterministic_across_thread_counts() {
    let study = small_density_study(2024);
    let a = run_study(&study).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| run_study(&study).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 8);
    for r in &a.records {
        assert!(r.mu_hat.unwrap().is_finite() && r.r_known.unwrap().is_finite() && r.r_plugin.unwrap().is_finite());
    }
    let c = run_study(&small_density_study(2025)).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn replicate_streams_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for i in 0..4 {
        for r in 0..100 {
            assert!(seen.insert(replicate_stream(i, r)));
        }
    }
}

#[test]
fn single_replicate_point_mass_study() {
    let model = MixtureModel::new(0.0, MixingModel::PointMass { atom: 1.0 }).unwrap();
    let result = run_study(&MonteCarloStudy::mu_only(model, vec![1000], 1, 5)).unwrap();
    let mu_hat = result.records[0].mu_hat.unwrap();
    assert!(mu_hat < 0.1, "{mu_hat}");
}

#[test]
fn failed_brackets_are_counted_not_summarized() {
    let model = MixtureModel::new(0.0, MixingModel::PointMass { atom: 1.0 }).unwrap();
    let result = run_study(&MonteCarloStudy::mu_only(model, vec![50, 100], 40, 9)).unwrap();
    for s in &result.summaries {
        let rows: Vec<_> = result.records.iter().filter(|r| r.n == s.n).collect();
        let bad = rows.iter().filter(|r| r.status != ReplicateStatus::Ok).count();
        assert!(bad > 0 && bad < 40);
        assert_eq!((s.ok, s.failures), (40 - bad, bad));
        assert!((s.failure_rate - bad as f64 / 40.0).abs() < 1e-15);
        let ok_mu: Vec<f64> = rows.iter().filter(|r| r.status == ReplicateStatus::Ok).map(|r| r.mu_hat.unwrap()).collect();
        assert_eq!(s.mu_hat, FiveNumber::of(&ok_mu));
    }
}

#[test]
fn summaries_are_ordered_and_spread_shrinks() {
    let model = MixtureModel::new(0.5, MixingModel::Gig(unit_gig())).unwrap();
    let result = run_study(&MonteCarloStudy::mu_only(model, vec![100, 300, 500, 1000], 100, 11)).unwrap();
    assert_eq!(result.records.len(), 400);
    let mut iqr = Vec::new();
    for s in &result.summaries {
        let f = s.mu_hat.unwrap();
        assert!(f.min <= f.q1 && f.q1 <= f.median && f.median <= f.q3 && f.q3 <= f.max);
        iqr.push(f.q3 - f.q1);
    }
    assert!(iqr[3] < iqr[0], "{iqr:?}");
    assert!(result.mu_rate().unwrap() < 0.0);
}

#[test]
fn study_validation() {
    let model = MixtureModel::new(0.5, MixingModel::Gig(unit_gig())).unwrap();
    let base = MonteCarloStudy::mu_only(model, vec![100, 200], 2, 1);
    assert!(run_study(&MonteCarloStudy { replicates: 0, ..base.clone() }).is_err());
    assert!(run_study(&MonteCarloStudy { sample_sizes: vec![200, 100], ..base.clone() }).is_err());
    assert!(run_study(&MonteCarloStudy { targets: vec![StudyTarget::DensityKnownMu], ..base.clone() }).is_err());
    let json = serde_json::to_string(&base).unwrap();
    assert_eq!(serde_json::from_str::<MonteCarloStudy>(&json).unwrap(), base);
    let bad = json.replacen("\"replicates\"", "\"extra\":1,\"replicates\"", 1);
    assert!(serde_json::from_str::<MonteCarloStudy>(&bad).is_err());
}

#[test]
fn five_number_uses_linear_interpolation() {
    let f = FiveNumber::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
    assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 1.75, 2.5, 3.25, 4.0));
    assert!(FiveNumber::of(&[]).is_none());
}

fn grid_fn() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 12)
}

proptest! {
    #[test]
    fn grid_rms_is_a_metric(a in grid_fn(), b in grid_fn(), c in grid_fn()) {
        let d = |x: &[f64], y: &[f64]| grid_rms(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-15);
        prop_assert!(a == b || d(&a, &b) > 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }
}
