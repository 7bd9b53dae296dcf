//! Convergence diagnostics and posterior summaries.

use serde::{Deserialize, Serialize};

use super::samples::PosteriorSamples;

/// Probability mass of the reported central credible interval.
pub const CREDIBLE_MASS: f64 = 0.94;

/// Split potential scale reduction factor.
///
/// Every chain is split into halves (odd lengths drop the middle draw), so a
/// single chain can be diagnosed too. Returns `+∞` when the within-chain
/// variance is zero and `NaN` when a chain has fewer than 4 draws.
pub fn r_hat<C: AsRef<[f64]>>(chains: &[C]) -> f64 {
    let shortest = chains.iter().map(|c| c.as_ref().len()).min().unwrap_or(0);
    if chains.is_empty() || shortest < 4 {
        return f64::NAN;
    }
    let half = shortest / 2;
    let mut splits: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let c = &c.as_ref()[..shortest];
        splits.push(&c[..half]);
        splits.push(&c[shortest - half..]);
    }
    let n = half as f64;
    let m = splits.len() as f64;
    let means: Vec<f64> = splits.iter().map(|s| mean(s)).collect();
    let within = splits
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if within <= 0.0 {
        return f64::INFINITY;
    }
    let grand = mean(&means);
    let between = n * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central credible interval of the given mass.
pub fn central_interval(draws: &[f64], mass: f64) -> (f64, f64) {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - mass) / 2.0;
    (quantile(&sorted, tail), quantile(&sorted, 1.0 - tail))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
    pub rhat: f64,
}

/// Pooled mean, std, 94% interval and R̂ per parameter.
pub fn summarize(samples: &PosteriorSamples) -> Vec<ParamSummary> {
    samples
        .param_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let pooled = samples.pooled_column(j);
            let (lo, hi) = central_interval(&pooled, CREDIBLE_MASS);
            ParamSummary {
                name: name.clone(),
                mean: mean(&pooled),
                std: std_dev(&pooled),
                lo,
                hi,
                rhat: r_hat(&samples.chain_columns(j)),
            }
        })
        .collect()
}
