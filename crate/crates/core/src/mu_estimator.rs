//! Estimation of the drift μ from the zero of the weighted transform
//! `W_n(ρ) = (1/n) Σ e^{-ρX_i} w(X_i)`.

use crate::error::{Error, Result};
use crate::models::Sample;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_BIG_M: f64 = 10.0;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;

/// Descriptor of a weight function, used in serialized output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `w(x) = -sin(x)` on `[-π, π]`, zero elsewhere.
    Sine,
    Custom { name: String },
}

/// An odd, compactly supported weight with `w(x) ≤ 0` for `x ≥ 0`.
#[derive(Clone)]
pub struct WeightFunction {
    kind: WeightKind,
    radius: f64,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction").field("kind", &self.kind).field("radius", &self.radius).finish()
    }
}

impl Default for WeightFunction {
    fn default() -> Self {
        WeightFunction::sine()
    }
}

impl WeightFunction {
    pub fn sine() -> Self {
        WeightFunction { kind: WeightKind::Sine, radius: PI, f: Arc::new(|x: f64| -x.sin()) }
    }

    /// Wraps `f` after checking oddness and sign on a grid over `[-radius, radius]`.
    /// Values outside the support are never evaluated.
    pub fn custom<F>(name: impl Into<String>, radius: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight support radius must be > 0, got {radius}")));
        }
        const STEPS: usize = 1000;
        for k in 0..=STEPS {
            let x = radius * k as f64 / STEPS as f64;
            let (a, b) = (f(x), f(-x));
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("weight is not finite at ±{x}")));
            }
            if (a + b).abs() > 1e-14 {
                return Err(Error::InvalidParameter(format!("weight is not odd at x = {x}: w(x) = {a}, w(-x) = {b}")));
            }
            if a > 0.0 {
                return Err(Error::InvalidParameter(format!("weight must be <= 0 on [0, A], w({x}) = {a}")));
            }
        }
        Ok(WeightFunction { kind: WeightKind::Custom { name: name.into() }, radius, f: Arc::new(f) })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() <= self.radius {
            (self.f)(x)
        } else {
            0.0
        }
    }
}

/// Result of the root search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub value: f64,
    pub bracket_found: bool,
    pub iterations: usize,
    pub w_n_at_zero: f64,
}

/// `W_n(ρ)`; only observations inside the weight's support contribute.
pub fn w_n(rho: f64, sample: &Sample, w: &WeightFunction) -> f64 {
    SupportTerms::new(sample, w).eval(rho)
}

/// Observations inside the support paired with their weights.
struct SupportTerms {
    terms: Vec<(f64, f64)>,
    n: f64,
}

impl SupportTerms {
    fn new(sample: &Sample, w: &WeightFunction) -> Self {
        let mut terms = sample
            .values()
            .iter()
            .filter(|x| x.abs() <= w.radius())
            .map(|&x| (x, w.eval(x)))
            .filter(|&(_, wx)| wx != 0.0)
            .collect::<Vec<_>>();
        // fixed summation order, independent of the sample's ordering
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        SupportTerms { terms, n: sample.len() as f64 }
    }

    fn eval(&self, rho: f64) -> f64 {
        self.terms.iter().map(|&(x, wx)| (-rho * x).exp() * wx).sum::<f64>() / self.n
    }
}

/// `μ̂ = inf{ρ > 0 : W_n(ρ) ≥ 0} ∧ M` by bisection.
///
/// When `W_n(0) > 0` no positive root exists and 0 is returned; when
/// `W_n(M) < 0` the result is `M`. Both cases set `bracket_found = false`.
pub fn estimate_mu(sample: &Sample, w: &WeightFunction, big_m: f64, tol: f64) -> Result<MuEstimate> {
    if !(big_m > 0.0 && big_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("M must be finite and > 0, got {big_m}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    let terms = SupportTerms::new(sample, w);
    let at_zero = terms.eval(0.0);
    let done = |value, bracket_found, iterations| MuEstimate { value, bracket_found, iterations, w_n_at_zero: at_zero };
    if at_zero > 0.0 {
        return Ok(done(0.0, false, 0));
    }
    if at_zero == 0.0 {
        return Ok(done(0.0, true, 0));
    }
    if terms.eval(big_m) < 0.0 {
        return Ok(done(big_m, false, 0));
    }
    let (mut lo, mut hi) = (0.0, big_m);
    let mut iterations = 0;
    while hi - lo > tol && iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if terms.eval(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(done(hi, true, iterations))
}
