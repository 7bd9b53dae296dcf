//! Densities, link function and the log-posterior (with analytic gradient)
//! of the three regression families.
//!
//! Parameter vectors are unconstrained: `[alpha, coefficients.., log_sigma?]`.
//! The noise scale is sampled as `log σ` and the log-Jacobian `log σ` is
//! added to the density so that draws of `σ` follow the intended prior.

use std::f64::consts::{LN_2, PI};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{BoatError, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
/// Probabilities entering a log are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-12;

/// Logistic function, stable for any finite input.
///
/// Negative inputs are evaluated as `1 - sigmoid(-z)` so that
/// `sigmoid(z) + sigmoid(-z) == 1` holds exactly.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        1.0 - 1.0 / (1.0 + z.exp())
    }
}

pub fn normal_logpdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(BoatError::Domain(format!("normal sigma must be > 0, got {sigma}")));
    }
    Ok(normal_logpdf_unchecked(x, mu, sigma))
}

#[inline]
fn normal_logpdf_unchecked(x: f64, mu: f64, sigma: f64) -> f64 {
    let r = (x - mu) / sigma;
    -HALF_LN_2PI - sigma.ln() - 0.5 * r * r
}

pub fn bernoulli_logpmf(t: u8, p: f64) -> Result<f64> {
    if t > 1 {
        return Err(BoatError::Domain(format!("bernoulli outcome must be 0 or 1, got {t}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(BoatError::Domain(format!("bernoulli p outside [0,1]: {p}")));
    }
    Ok(bernoulli_logpmf_unchecked(t as f64, p))
}

#[inline]
fn bernoulli_logpmf_unchecked(t: f64, p: f64) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    t * p.ln() + (1.0 - t) * (1.0 - p).ln()
}

pub fn half_cauchy_logpdf(x: f64, scale: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(BoatError::Domain(format!("half-Cauchy support is x >= 0, got {x}")));
    }
    if !(scale > 0.0) {
        return Err(BoatError::Domain(format!("half-Cauchy scale must be > 0, got {scale}")));
    }
    Ok(half_cauchy_logpdf_unchecked(x, scale))
}

#[inline]
fn half_cauchy_logpdf_unchecked(x: f64, scale: f64) -> f64 {
    let u = x / scale;
    LN_2 - PI.ln() - scale.ln() - (1.0 + u * u).ln()
}

/// Prior on the observation noise scale of the linear models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoisePrior {
    HalfCauchy { scale: f64 },
    /// Flat on `σ` (improper).
    None,
}

/// Zero-mean Gaussian prior scales (standard deviations) plus the noise prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub alpha_scale: f64,
    /// One scale per coefficient, or a single value applied to all.
    pub beta_scales: Vec<f64>,
    pub noise_prior: NoisePrior,
}

impl PriorSpec {
    pub fn new(alpha_scale: f64, beta_scale: f64, noise_prior: NoisePrior) -> Self {
        PriorSpec {
            alpha_scale,
            beta_scales: vec![beta_scale],
            noise_prior,
        }
    }

    /// `N(0,1)` on every coefficient, no noise term.
    pub fn logistic_default() -> Self {
        Self::new(1.0, 1.0, NoisePrior::None)
    }

    /// `N(0,1)` coefficients, `Half-Cauchy(0,5)` noise.
    pub fn did_default() -> Self {
        Self::new(1.0, 1.0, NoisePrior::HalfCauchy { scale: 5.0 })
    }

    /// `α ~ N(0,1)`, `β ~ N(0,0.5)`, `σ ~ Half-Cauchy(0,5)`.
    pub fn rdd_default() -> Self {
        Self::new(1.0, 0.5, NoisePrior::HalfCauchy { scale: 5.0 })
    }

    pub fn validate(&self, n_coefficients: usize) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.alpha_scale) || !self.beta_scales.iter().all(|&s| positive(s)) {
            return Err(BoatError::Domain("prior scales must be finite and > 0".into()));
        }
        if let NoisePrior::HalfCauchy { scale } = self.noise_prior {
            if !positive(scale) {
                return Err(BoatError::Domain("noise prior scale must be > 0".into()));
            }
        }
        match self.beta_scales.len() {
            1 => Ok(()),
            len if len == n_coefficients => Ok(()),
            len => Err(BoatError::Contract(format!(
                "{len} coefficient prior scales for {n_coefficients} coefficients"
            ))),
        }
    }

    fn expanded_beta_scales(&self, k: usize) -> Vec<f64> {
        if self.beta_scales.len() == 1 {
            vec![self.beta_scales[0]; k]
        } else {
            self.beta_scales.clone()
        }
    }
}

/// The regression family. Columns each family reads from a [`DesignMatrix`]:
///
/// * `Logistic`: `t ~ Bernoulli(sigmoid(α + βx))`.
/// * `DidLinear`: `y ~ α + θ_t·t + θ_τ·post + θ_tτ·t·post + βx + ε` (needs `period`).
/// * `RddLinear`: `y ~ α + β1(x−c) + β2·t + β3(x−c)t + β4·z + ε` (needs `assignment`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelFamily {
    Logistic,
    DidLinear,
    RddLinear { cutoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub priors: PriorSpec,
}

impl ModelSpec {
    pub fn logistic(priors: PriorSpec) -> Self {
        ModelSpec { family: ModelFamily::Logistic, priors }
    }

    pub fn did(priors: PriorSpec) -> Self {
        ModelSpec { family: ModelFamily::DidLinear, priors }
    }

    pub fn rdd(cutoff: f64, priors: PriorSpec) -> Self {
        ModelSpec { family: ModelFamily::RddLinear { cutoff }, priors }
    }
}

/// A differentiable log-density over an unconstrained parameter vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log-density.
    fn logp_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;

    fn logp(&self, q: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.logp_grad(q, &mut g)
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("q{i}")).collect()
    }

    /// Maps an unconstrained point to the reported parameterization.
    fn constrain(&self, q: &[f64]) -> Vec<f64> {
        q.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Likelihood {
    Bernoulli,
    Gaussian(NoisePrior),
}

/// Log-posterior of one model family bound to one dataset.
#[derive(Debug, Clone)]
pub struct RegressionPosterior {
    likelihood: Likelihood,
    features: Array2<f64>,
    response: Vec<f64>,
    alpha_scale: f64,
    beta_scales: Vec<f64>,
    names: Vec<String>,
}

impl RegressionPosterior {
    pub fn new(model: &ModelSpec, data: &DesignMatrix) -> Result<Self> {
        let n = data.len();
        let covariate_names = data
            .covariate_names
            .iter()
            .map(|c| format!("beta[{c}]"));
        let (likelihood, features, response, coef_names): (_, Array2<f64>, Vec<f64>, Vec<String>) =
            match model.family {
                ModelFamily::Logistic => (
                    Likelihood::Bernoulli,
                    data.x.clone(),
                    data.treatment.iter().map(|&t| t as f64).collect(),
                    covariate_names.collect(),
                ),
                ModelFamily::DidLinear => {
                    let period = data.period.as_ref().ok_or_else(|| {
                        BoatError::Contract("difference-in-differences model needs a period column".into())
                    })?;
                    let k = 3 + data.n_covariates();
                    let mut f = Array2::zeros((n, k));
                    for i in 0..n {
                        let t = data.treatment[i] as f64;
                        f[[i, 0]] = t;
                        f[[i, 1]] = period[i];
                        f[[i, 2]] = t * period[i];
                        for j in 0..data.n_covariates() {
                            f[[i, 3 + j]] = data.x[[i, j]];
                        }
                    }
                    let names = ["theta_treat", "theta_post", "theta_did"]
                        .iter()
                        .map(|s| s.to_string())
                        .chain(covariate_names)
                        .collect();
                    (
                        Likelihood::Gaussian(model.priors.noise_prior),
                        f,
                        data.y.clone(),
                        names,
                    )
                }
                ModelFamily::RddLinear { cutoff } => {
                    let x = data.assignment.as_ref().ok_or_else(|| {
                        BoatError::Contract("discontinuity model needs an assignment column".into())
                    })?;
                    let k = if data.z.is_some() { 4 } else { 3 };
                    let mut f = Array2::zeros((n, k));
                    for i in 0..n {
                        let d = x[i] - cutoff;
                        let t = data.treatment[i] as f64;
                        f[[i, 0]] = d;
                        f[[i, 1]] = t;
                        f[[i, 2]] = d * t;
                        if let Some(z) = &data.z {
                            f[[i, 3]] = z[i];
                        }
                    }
                    let names = (1..=k).map(|j| format!("beta{j}")).collect();
                    (
                        Likelihood::Gaussian(model.priors.noise_prior),
                        f,
                        data.y.clone(),
                        names,
                    )
                }
            };
        let k = features.ncols();
        model.priors.validate(k)?;
        let mut names = Vec::with_capacity(k + 2);
        names.push("alpha".to_string());
        names.extend(coef_names);
        if matches!(likelihood, Likelihood::Gaussian(_)) {
            names.push("sigma".to_string());
        }
        if features.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(BoatError::Domain("design contains non-finite values".into()));
        }
        Ok(RegressionPosterior {
            likelihood,
            features: features.as_standard_layout().to_owned(),
            response,
            alpha_scale: model.priors.alpha_scale,
            beta_scales: model.priors.expanded_beta_scales(k),
            names,
        })
    }

    pub fn n_coefficients(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(BoatError::Contract(format!(
                "parameter vector has {} entries, model expects {}",
                q.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

impl LogDensity for RegressionPosterior {
    fn dim(&self) -> usize {
        1 + self.n_coefficients() + usize::from(matches!(self.likelihood, Likelihood::Gaussian(_)))
    }

    fn logp_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.n_coefficients();
        let alpha = q[0];
        let beta = &q[1..=k];
        grad.fill(0.0);

        let mut lp = normal_logpdf_unchecked(alpha, 0.0, self.alpha_scale);
        grad[0] = -alpha / (self.alpha_scale * self.alpha_scale);
        for j in 0..k {
            let s = self.beta_scales[j];
            lp += normal_logpdf_unchecked(beta[j], 0.0, s);
            grad[1 + j] = -beta[j] / (s * s);
        }

        match self.likelihood {
            Likelihood::Bernoulli => {
                for (row, &t) in self.features.rows().into_iter().zip(&self.response) {
                    let eta = alpha + row.iter().zip(beta).map(|(f, b)| f * b).sum::<f64>();
                    let p = sigmoid(eta);
                    lp += bernoulli_logpmf_unchecked(t, p);
                    let r = t - p;
                    grad[0] += r;
                    for (g, f) in grad[1..=k].iter_mut().zip(row) {
                        *g += r * f;
                    }
                }
            }
            Likelihood::Gaussian(noise) => {
                let log_sigma = q[k + 1];
                let sigma = log_sigma.exp();
                let inv_var = (-2.0 * log_sigma).exp();
                let mut sum_sq = 0.0;
                for (row, &y) in self.features.rows().into_iter().zip(&self.response) {
                    let eta = alpha + row.iter().zip(beta).map(|(f, b)| f * b).sum::<f64>();
                    let r = y - eta;
                    sum_sq += r * r;
                    let g = r * inv_var;
                    grad[0] += g;
                    for (gj, f) in grad[1..=k].iter_mut().zip(row) {
                        *gj += g * f;
                    }
                }
                let n = self.n_rows() as f64;
                lp += -n * (HALF_LN_2PI + log_sigma) - 0.5 * sum_sq * inv_var;
                grad[k + 1] = -n + sum_sq * inv_var;

                // log-Jacobian of σ = exp(log σ)
                lp += log_sigma;
                grad[k + 1] += 1.0;
                if let NoisePrior::HalfCauchy { scale } = noise {
                    lp += half_cauchy_logpdf_unchecked(sigma, scale);
                    let a2 = scale * scale;
                    let s2 = sigma * sigma;
                    grad[k + 1] += -2.0 * s2 / (a2 + s2);
                }
            }
        }
        lp
    }

    fn param_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn constrain(&self, q: &[f64]) -> Vec<f64> {
        let mut out = q.to_vec();
        if matches!(self.likelihood, Likelihood::Gaussian(_)) {
            let last = out.len() - 1;
            out[last] = out[last].exp();
        }
        out
    }
}

/// Log-posterior of `model` on `data` at the unconstrained point `params`.
pub fn log_posterior(model: &ModelSpec, data: &DesignMatrix, params: &[f64]) -> Result<f64> {
    let post = RegressionPosterior::new(model, data)?;
    post.check_dim(params)?;
    Ok(post.logp(params))
}

/// Analytic gradient of [`log_posterior`] in the unconstrained space.
pub fn log_posterior_grad(model: &ModelSpec, data: &DesignMatrix, params: &[f64]) -> Result<Vec<f64>> {
    let post = RegressionPosterior::new(model, data)?;
    post.check_dim(params)?;
    let mut g = vec![0.0; post.dim()];
    post.logp_grad(params, &mut g);
    Ok(g)
}
