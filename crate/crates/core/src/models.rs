//! Parametric mixing laws and the variance-mean mixtures they generate.
//!
//! A mixture draws `X = μξ + √ξ·η` with `ξ` from the mixing law and `η`
//! standard normal. The GIG parameter usually written ψ is called
//! `psi_gig` here so it never collides with the characteristic exponent
//! `ψ(u) = -iμu + u²/2` used by the Mellin estimator.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::{self, complex_pow, ln_bessel_k, ln_gamma_real, log_gamma};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Parameters of the generalized inverse Gaussian law GIG(λ, δ, ψ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GigParams {
    pub lambda: f64,
    pub delta: f64,
    pub psi_gig: f64,
}

impl GigParams {
    pub fn new(lambda: f64, delta: f64, psi_gig: f64) -> Result<Self> {
        let p = GigParams { lambda, delta, psi_gig };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("GIG lambda must be finite, got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("GIG delta must be > 0, got {}", self.delta)));
        }
        if !(self.psi_gig > 0.0 && self.psi_gig.is_finite()) {
            return Err(Error::InvalidParameter(format!("GIG psi_gig must be > 0, got {}", self.psi_gig)));
        }
        Ok(())
    }

    /// ω = δψ, the concentration of the standardized law.
    pub fn omega(&self) -> f64 {
        self.delta * self.psi_gig
    }

    /// ξ = (δ/ψ)·Y where Y has density ∝ y^{λ-1} exp(-ω(y + 1/y)/2).
    pub fn scale(&self) -> f64 {
        self.delta / self.psi_gig
    }

    fn ln_normalizer(&self) -> f64 {
        self.lambda * (self.psi_gig / self.delta).ln()
            - std::f64::consts::LN_2
            - ln_bessel_k(self.lambda, self.omega()).expect("omega > 0 by validation")
    }

    /// E[ξ^k] = (δ/ψ)^k K_{λ+k}(δψ) / K_λ(δψ).
    pub fn raw_moment(&self, k: f64) -> f64 {
        let w = self.omega();
        let lk = ln_bessel_k(self.lambda + k, w).expect("omega > 0");
        let l0 = ln_bessel_k(self.lambda, w).expect("omega > 0");
        (k * self.scale().ln() + lk - l0).exp()
    }
}

/// Decay class of the Mellin transform along vertical lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessClass {
    Exponential,
    Polynomial,
    None,
}

/// Law of the mixing variable ξ ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixingModel {
    Gig(GigParams),
    /// Gamma with shape `a` and rate `b`.
    Gamma { shape: f64, rate: f64 },
    Beta { p: f64, q: f64 },
    PointMass { atom: f64 },
}

impl MixingModel {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match *self {
            MixingModel::Gig(p) => p.validate(),
            MixingModel::Gamma { shape, rate } => positive("gamma shape", shape).and(positive("gamma rate", rate)),
            MixingModel::Beta { p, q } => positive("beta p", p).and(positive("beta q", q)),
            MixingModel::PointMass { atom } => positive("point mass atom", atom),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MixingModel::Gig(_) => "gig",
            MixingModel::Gamma { .. } => "gamma",
            MixingModel::Beta { .. } => "beta",
            MixingModel::PointMass { .. } => "point_mass",
        }
    }

    pub fn class_label(&self) -> SmoothnessClass {
        match self {
            MixingModel::Gig(_) | MixingModel::Gamma { .. } => SmoothnessClass::Exponential,
            MixingModel::Beta { .. } => SmoothnessClass::Polynomial,
            MixingModel::PointMass { .. } => SmoothnessClass::None,
        }
    }

    /// Lebesgue density of the law; the point mass has none.
    pub fn density(&self, s: f64) -> Result<f64> {
        match *self {
            MixingModel::Gig(p) => Ok(gig_density(s, &p)),
            MixingModel::Gamma { shape, rate } => {
                if s <= 0.0 {
                    return Ok(0.0);
                }
                let ln = shape * rate.ln() + (shape - 1.0) * s.ln() - rate * s - ln_gamma_real(shape)?;
                Ok(ln.exp())
            }
            MixingModel::Beta { p, q } => {
                if s <= 0.0 || s >= 1.0 {
                    return Ok(0.0);
                }
                let ln = (p - 1.0) * s.ln() + (q - 1.0) * (-s).ln_1p() - ln_beta(p, q)?;
                Ok(ln.exp())
            }
            MixingModel::PointMass { .. } => Err(Error::Unsupported("density of a point mass".into())),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MixingModel::Gig(p) => p.raw_moment(1.0),
            MixingModel::Gamma { shape, rate } => shape / rate,
            MixingModel::Beta { p, q } => p / (p + q),
            MixingModel::PointMass { atom } => atom,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            MixingModel::Gig(p) => {
                let m = p.raw_moment(1.0);
                p.raw_moment(2.0) - m * m
            }
            MixingModel::Gamma { shape, rate } => shape / (rate * rate),
            MixingModel::Beta { p, q } => p * q / ((p + q) * (p + q) * (p + q + 1.0)),
            MixingModel::PointMass { .. } => 0.0,
        }
    }

    /// Upper end of the support (∞ except for the beta law and the atom).
    pub fn support_max(&self) -> f64 {
        match *self {
            MixingModel::Beta { .. } => 1.0,
            MixingModel::PointMass { atom } => atom,
            _ => f64::INFINITY,
        }
    }

    /// Draws `n` mixing variables.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match *self {
            MixingModel::Gig(p) => {
                let sampler = GigSampler::new(&p)?;
                Ok((0..n).map(|_| sampler.draw(rng)).collect())
            }
            MixingModel::Gamma { shape, rate } => {
                let d = GammaDist::new(shape, 1.0 / rate)
                    .map_err(|e| Error::InvalidParameter(format!("gamma: {e}")))?;
                Ok((0..n).map(|_| d.sample(rng)).collect())
            }
            MixingModel::Beta { p, q } => {
                let d = BetaDist::new(p, q).map_err(|e| Error::InvalidParameter(format!("beta: {e}")))?;
                Ok((0..n).map(|_| d.sample(rng)).collect())
            }
            MixingModel::PointMass { atom } => Ok(vec![atom; n]),
        }
    }

    /// Laplace transform L_ξ(t) = E[e^{-tξ}] for complex t.
    ///
    /// Closed form for GIG, gamma and the point mass; the beta law is
    /// integrated numerically over its compact support.
    pub fn laplace(&self, t: Complex64) -> Result<Complex64> {
        match *self {
            MixingModel::Gig(p) => gig_laplace(t, &p),
            MixingModel::Gamma { shape, rate } => {
                let base = Complex64::new(1.0, 0.0) + t / rate;
                if base.re <= 0.0 {
                    return Err(Error::Domain(format!("gamma Laplace transform needs Re t > -rate, got {t}")));
                }
                complex_pow(base, Complex64::new(-shape, 0.0))
            }
            MixingModel::Beta { .. } => {
                let model = *self;
                let r = quadrature::adaptive(
                    |s: f64| (-t * s).exp() * model.density(s).unwrap_or(0.0),
                    0.0,
                    1.0,
                    1e-15,
                    1e-13,
                    2000,
                );
                Ok(r.value)
            }
            MixingModel::PointMass { atom } => Ok((-t * atom).exp()),
        }
    }

    /// Exact Mellin transform M[g](z) = E[ξ^{z-1}] where a closed form exists.
    pub fn mellin(&self, z: Complex64) -> Result<Complex64> {
        exact_mellin_of_mixing(z, self)
    }

    /// M[g](z) by direct quadrature of ∫ g(s) s^{z-1} ds.
    pub fn mellin_by_quadrature(&self, z: Complex64) -> Result<Complex64> {
        if let MixingModel::PointMass { atom } = *self {
            return complex_pow(Complex64::new(atom, 0.0), z - 1.0);
        }
        let model = *self;
        let f = |s: f64| {
            if s <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let g = model.density(s).unwrap_or(0.0);
            if g == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            ((z - 1.0) * s.ln()).exp() * g
        };
        let upper = self.support_max();
        let r = if upper.is_finite() {
            quadrature::adaptive(f, 0.0, upper, 1e-14, 1e-12, 4000)
        } else {
            let m = self.mean();
            let head = quadrature::adaptive(f, 0.0, m, 1e-14, 1e-12, 4000);
            let tail = quadrature::adaptive_to_infinity(f, m, 1e-14, 1e-12, 4000);
            quadrature::Adaptive {
                value: head.value + tail.value,
                error_estimate: head.error_estimate + tail.error_estimate,
                converged: head.converged && tail.converged,
            }
        };
        Ok(r.value)
    }
}

/// A normal variance-mean mixture: drift μ and mixing law G.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureModel {
    pub mu: f64,
    pub mixing: MixingModel,
}

impl MixtureModel {
    pub fn new(mu: f64, mixing: MixingModel) -> Result<Self> {
        let m = MixtureModel { mu, mixing };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be finite, got {}", self.mu)));
        }
        self.mixing.validate()
    }

    /// ψ(u) = -iμu + u²/2.
    pub fn char_exponent(&self, u: f64) -> Complex64 {
        Complex64::new(0.5 * u * u, -self.mu * u)
    }

    /// φ_X(u) = L_ξ(ψ(u)).
    pub fn char_function(&self, u: f64) -> Result<Complex64> {
        if u == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        self.mixing.laplace(self.char_exponent(u))
    }

    /// Observable density: the GH closed form at λ = 1, the normal law for an
    /// atom, and the mixing integral otherwise.
    pub fn density(&self, x: f64) -> Result<f64> {
        match self.mixing {
            MixingModel::Gig(p) if p.lambda == 1.0 => Ok(gh_density(x, self.mu, &p)),
            MixingModel::PointMass { atom } => Ok(normal_pdf(x, self.mu * atom, atom)),
            _ => mixture_density(x, self),
        }
    }

    pub fn mean(&self) -> f64 {
        self.mu * self.mixing.mean()
    }

    /// Var X = E[ξ] + μ² Var ξ.
    pub fn variance(&self) -> f64 {
        self.mixing.mean() + self.mu * self.mu * self.mixing.variance()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        mixture_sample(rng, n, self).map(|s| s.values)
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Simulated { seed: u64, stream: u64, model: MixtureModel },
    File { path: String, log_transformed: bool },
    /// Drawn from a caller-supplied generator whose seed is unknown here.
    Generated,
    Inline,
}

/// An immutable, non-empty vector of finite observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
    provenance: Provenance,
}

impl Sample {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("observation {i} is not finite: {v}")));
        }
        Ok(Sample { values, provenance })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Sample::new(values, Provenance::Inline)
    }

    /// Seeded draw from `model` on ChaCha20 stream `stream` of `seed`.
    pub fn simulate(model: &MixtureModel, n: usize, seed: u64, stream: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, stream);
        let mut sample = mixture_sample(&mut rng, n, model)?;
        sample.provenance = Provenance::Simulated { seed, stream, model: *model };
        Ok(sample)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Sample with every observation negated, for drifts below zero.
    pub fn negated(&self) -> Sample {
        Sample { values: self.values.iter().map(|x| -x).collect(), provenance: self.provenance.clone() }
    }

    /// Empirical `p`-quantile of |X| (nearest-rank).
    pub fn abs_quantile(&self, p: f64) -> f64 {
        let mut a: Vec<f64> = self.values.iter().map(|x| x.abs()).collect();
        a.sort_by(f64::total_cmp);
        let rank = ((p.clamp(0.0, 1.0) * a.len() as f64).ceil() as usize).clamp(1, a.len());
        a[rank - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// ChaCha20 generator positioned on an independent stream.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// GIG(λ, δ, ψ) density, zero off (0, ∞).
pub fn gig_density(s: f64, p: &GigParams) -> f64 {
    if s <= 0.0 || !s.is_finite() {
        return 0.0;
    }
    let ln = p.ln_normalizer() + (p.lambda - 1.0) * s.ln()
        - 0.5 * (p.psi_gig * p.psi_gig * s + p.delta * p.delta / s);
    ln.exp()
}

/// `n` i.i.d. GIG draws.
pub fn gig_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, p: &GigParams) -> Result<Sample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let sampler = GigSampler::new(p)?;
    let values = (0..n).map(|_| sampler.draw(rng)).collect();
    Sample::new(values, Provenance::Generated)
}

/// L_ξ(t) = (ψ²/(ψ²+2t))^{λ/2} K_λ(δ√(ψ²+2t)) / K_λ(δψ), for Re t > -ψ²/2.
pub fn gig_laplace(t: Complex64, p: &GigParams) -> Result<Complex64> {
    p.validate()?;
    let psi2 = p.psi_gig * p.psi_gig;
    if !(t.re > -0.5 * psi2) {
        return Err(Error::Domain(format!(
            "GIG Laplace transform needs Re t > {}, got {t}",
            -0.5 * psi2
        )));
    }
    if t.re == 0.0 && t.im == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let s = t * 2.0 + psi2;
    let arg = s.sqrt() * p.delta;
    let (num, num_shift) = special::bessel_k_scaled(p.lambda, arg)?;
    let (den, den_shift) = special::bessel_k_scaled(p.lambda, Complex64::new(p.omega(), 0.0))?;
    let prefactor = complex_pow(Complex64::new(psi2, 0.0) / s, Complex64::new(0.5 * p.lambda, 0.0))?;
    Ok(prefactor * (num / den) * (num_shift - den_shift).exp())
}

/// Generalized hyperbolic density with GIG mixing.
///
/// λ = 1 uses `ψ/(2αδK₁(δψ)) · exp(-α√(δ²+x²) + μx)` with α = √(ψ²+μ²);
/// other orders fall back to the numerical mixing integral.
pub fn gh_density(x: f64, mu: f64, p: &GigParams) -> f64 {
    if p.lambda == 1.0 {
        let alpha = (p.psi_gig * p.psi_gig + mu * mu).sqrt();
        let ln = gh_log_intercept(mu, p) - alpha * (p.delta * p.delta + x * x).sqrt() + mu * x;
        ln.exp()
    } else {
        let model = MixtureModel { mu, mixing: MixingModel::Gig(*p) };
        mixture_density(x, &model).unwrap_or(f64::NAN)
    }
}

/// ln ψ - ln(2αδK₁(δψ)): the common intercept of the two log-density asymptotes at λ = 1.
pub fn gh_log_intercept(mu: f64, p: &GigParams) -> f64 {
    let alpha = (p.psi_gig * p.psi_gig + mu * mu).sqrt();
    p.psi_gig.ln() - (2.0 * alpha * p.delta).ln() - ln_bessel_k(1.0, p.omega()).expect("omega > 0")
}

/// p(x) = ∫ φ_{N(μs, s)}(x) g(s) ds by adaptive quadrature.
pub fn mixture_density(x: f64, m: &MixtureModel) -> Result<f64> {
    if let MixingModel::PointMass { atom } = m.mixing {
        return Ok(normal_pdf(x, m.mu * atom, atom));
    }
    let mixing = m.mixing;
    let mu = m.mu;
    let f = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let g = mixing.density(s).unwrap_or(0.0);
        if g == 0.0 {
            0.0
        } else {
            normal_pdf(x, mu * s, s) * g
        }
    };
    let upper = mixing.support_max();
    let value = if upper.is_finite() {
        quadrature::adaptive(f, 0.0, upper, 1e-15, 1e-12, 4000).value
    } else {
        let split = mixing.mean().max(1.0);
        quadrature::adaptive(f, 0.0, split, 1e-15, 1e-12, 4000).value
            + quadrature::adaptive_to_infinity(f, split, 1e-15, 1e-12, 4000).value
    };
    Ok(value)
}

/// Draws X = μξ + √ξ·η.
pub fn mixture_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, m: &MixtureModel) -> Result<Sample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    m.validate()?;
    let values = match m.mixing {
        MixingModel::Gig(p) => {
            let sampler = GigSampler::new(&p)?;
            (0..n)
                .map(|_| {
                    let xi = sampler.draw(rng);
                    compose(m.mu, xi, rng)
                })
                .collect()
        }
        mixing => {
            let xis = mixing.sample(rng, n)?;
            xis.into_iter().map(|xi| compose(m.mu, xi, rng)).collect()
        }
    };
    Sample::new(values, Provenance::Generated)
}

fn compose<R: Rng + ?Sized>(mu: f64, xi: f64, rng: &mut R) -> f64 {
    let eta: f64 = rng.sample(StandardNormal);
    mu * xi + xi.sqrt() * eta
}

/// Exact M[g](z) for the gamma, beta and point-mass laws.
pub fn exact_mellin_of_mixing(z: Complex64, m: &MixingModel) -> Result<Complex64> {
    m.validate()?;
    let one = Complex64::new(1.0, 0.0);
    match *m {
        MixingModel::Gamma { shape, rate } => {
            // b^{1-z} Γ(a+z-1) / Γ(a)
            let ln = (one - z) * rate.ln() + log_gamma(z + (shape - 1.0))? - ln_gamma_real(shape)?;
            Ok(ln.exp())
        }
        MixingModel::Beta { p, q } => {
            // B(p+z-1, q) / B(p, q)
            let a = z + (p - 1.0);
            let ln = log_gamma(a)? + ln_gamma_real(q)? - log_gamma(a + q)? - ln_beta(p, q)?;
            Ok(ln.exp())
        }
        MixingModel::PointMass { atom } => complex_pow(Complex64::new(atom, 0.0), z - one),
        MixingModel::Gig(_) => Err(Error::Unsupported(
            "closed-form Mellin transform of the GIG law (use mellin_by_quadrature)".into(),
        )),
    }
}

fn ln_beta(p: f64, q: f64) -> Result<f64> {
    Ok(ln_gamma_real(p)? + ln_gamma_real(q)? - ln_gamma_real(p + q)?)
}

pub(crate) fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-(d * d) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Rejection sampler for the standardized GIG law
/// h(y) ∝ y^{l-1} exp(-ω(y + 1/y)/2), l = |λ|, rescaled by δ/ψ and inverted
/// when λ < 0.
///
/// Three envelopes cover the parameter space: ratio-of-uniforms around the
/// mode when l > 1 or ω > 1, plain ratio-of-uniforms for moderate ω, and a
/// constant/power/exponential hat when ω is small and l < 1.
#[derive(Debug, Clone)]
pub struct GigSampler {
    scale: f64,
    invert: bool,
    l: f64,
    omega: f64,
    method: GigMethod,
}

#[derive(Debug, Clone)]
enum GigMethod {
    ShiftedRou { mode: f64, ln_h_mode: f64, u_minus: f64, u_plus: f64 },
    Rou { ln_h_mode: f64, u_max: f64 },
    Hat { x0: f64, k0: f64, k1: f64, k2: f64, a: [f64; 3], tail_start: f64 },
}

impl GigSampler {
    pub fn new(p: &GigParams) -> Result<Self> {
        p.validate()?;
        let l = p.lambda.abs();
        let omega = p.omega();
        let ln_h = |y: f64| (l - 1.0) * y.ln() - 0.5 * omega * (y + 1.0 / y);
        let mode = if l >= 1.0 {
            ((l - 1.0) + ((l - 1.0).powi(2) + omega * omega).sqrt()) / omega
        } else {
            omega / ((1.0 - l) + ((1.0 - l).powi(2) + omega * omega).sqrt())
        };
        let method = if l > 1.0 || omega > 1.0 {
            let ln_h_mode = ln_h(mode);
            // extremes of (y - m)√h(y)/√h(m) on either side of the mode
            let dlog = |y: f64| 1.0 / (y - mode) + 0.5 * ((l - 1.0) / y - 0.5 * omega + 0.5 * omega / (y * y));
            let y_plus = {
                let mut hi = 2.0 * mode + 1.0;
                while dlog(hi) > 0.0 {
                    hi *= 2.0;
                }
                bisect(dlog, mode * (1.0 + 1e-12) + 1e-300, hi)
            };
            let y_minus = bisect(dlog, mode * 1e-12, mode * (1.0 - 1e-12));
            let side = |y: f64| (y - mode) * (0.5 * (ln_h(y) - ln_h_mode)).exp();
            GigMethod::ShiftedRou { mode, ln_h_mode, u_minus: side(y_minus), u_plus: side(y_plus) }
        } else if omega >= 0.5f64.min(2.0 / 3.0 * (1.0 - l).sqrt()) {
            let ln_h_mode = ln_h(mode);
            let y_star = ((l + 1.0) + ((l + 1.0).powi(2) + omega * omega).sqrt()) / omega;
            let u_max = y_star * (0.5 * (ln_h(y_star) - ln_h_mode)).exp();
            GigMethod::Rou { ln_h_mode, u_max }
        } else {
            let x0 = omega / (1.0 - l);
            let k0 = ln_h(mode).exp();
            let a0 = k0 * x0;
            let two_over = 2.0 / omega;
            let (k1, a1, k2, a2, tail_start) = if x0 >= two_over {
                let k2 = x0.powf(l - 1.0);
                (0.0, 0.0, k2, k2 * two_over * (-0.5 * omega * x0).exp(), x0)
            } else {
                let k1 = (-omega).exp();
                let a1 = if l == 0.0 {
                    k1 * (two_over / x0).ln()
                } else {
                    k1 / l * (two_over.powf(l) - x0.powf(l))
                };
                let k2 = two_over.powf(l - 1.0);
                (k1, a1, k2, k2 * two_over * (-1.0f64).exp(), two_over)
            };
            GigMethod::Hat { x0, k0, k1, k2, a: [a0, a1, a2], tail_start }
        };
        Ok(GigSampler { scale: p.scale(), invert: p.lambda < 0.0, l, omega, method })
    }

    fn ln_h(&self, y: f64) -> f64 {
        (self.l - 1.0) * y.ln() - 0.5 * self.omega * (y + 1.0 / y)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let y = self.draw_standard(rng);
        let y = if self.invert { 1.0 / y } else { y };
        self.scale * y
    }

    fn draw_standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.method {
            GigMethod::ShiftedRou { mode, ln_h_mode, u_minus, u_plus } => loop {
                let u = u_minus + (u_plus - u_minus) * rng.random::<f64>();
                let v = 1.0 - rng.random::<f64>();
                let y = u / v + mode;
                if y > 0.0 && 2.0 * v.ln() <= self.ln_h(y) - ln_h_mode {
                    return y;
                }
            },
            GigMethod::Rou { ln_h_mode, u_max } => loop {
                let u = u_max * rng.random::<f64>();
                let v = 1.0 - rng.random::<f64>();
                let y = u / v;
                if y > 0.0 && 2.0 * v.ln() <= self.ln_h(y) - ln_h_mode {
                    return y;
                }
            },
            GigMethod::Hat { x0, k0, k1, k2, a, tail_start } => {
                let l = self.l;
                let omega = self.omega;
                let total = a[0] + a[1] + a[2];
                loop {
                    let mut v = total * rng.random::<f64>();
                    let (y, hat) = if v <= a[0] {
                        (x0 * v / a[0], k0)
                    } else {
                        v -= a[0];
                        if v <= a[1] {
                            if l == 0.0 {
                                let y = x0 * (v / k1).exp();
                                (y, k1 / y)
                            } else {
                                let y = (x0.powf(l) + l / k1 * v).powf(1.0 / l);
                                (y, k1 * y.powf(l - 1.0))
                            }
                        } else {
                            v -= a[1];
                            let inner = (-0.5 * omega * tail_start).exp() - 0.5 * omega / k2 * v;
                            let y = -2.0 / omega * inner.max(f64::MIN_POSITIVE).ln();
                            (y, k2 * (-0.5 * omega * y).exp())
                        }
                    };
                    if y <= 0.0 || !y.is_finite() {
                        continue;
                    }
                    let u = rng.random::<f64>() * hat;
                    if u.ln() <= self.ln_h(y) {
                        return y;
                    }
                }
            }
        }
    }
}

/// Root of a function that is positive at `lo` and negative at `hi`.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
