use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{BoatError, Result};

use super::diagnostics::{central_interval, mean, r_hat, CREDIBLE_MASS};

/// Affine map from the scale a parameter was sampled on to reporting units:
/// `natural = offset + scale * fitted`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitMap {
    pub offset: f64,
    pub scale: f64,
}

impl UnitMap {
    pub const IDENTITY: UnitMap = UnitMap { offset: 0.0, scale: 1.0 };

    pub fn scale_only(scale: f64) -> Self {
        UnitMap { offset: 0.0, scale }
    }

    pub fn to_natural(&self, fitted: f64) -> f64 {
        self.offset + self.scale * fitted
    }

    pub fn to_fitted(&self, natural: f64) -> f64 {
        (natural - self.offset) / self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub rhat: f64,
    pub ess_note: Option<String>,
}

/// Per-chain sampler bookkeeping over the post-warm-up iterations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub step_size: f64,
    pub divergences: usize,
    pub mean_accept: f64,
    pub max_depth_hits: usize,
    pub mean_leapfrog: f64,
}

/// Named posterior draws, `draws[chain][iteration][param]`, warm-up excluded.
///
/// Draws are stored in reporting units; `unit_maps` recovers the scale the
/// sampler actually worked on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub param_names: Vec<String>,
    pub draws: Vec<Vec<Vec<f64>>>,
    pub diagnostics: BTreeMap<String, ParamDiagnostics>,
    pub chain_stats: Vec<ChainStats>,
    pub warnings: Vec<String>,
    pub unit_maps: Vec<UnitMap>,
    /// Model-specific constants needed to interpret the draws (e.g. a cutoff).
    pub meta: BTreeMap<String, f64>,
    pub n_observations: usize,
}

impl PosteriorSamples {
    /// Wraps raw draws and computes R̂ for each parameter.
    pub fn from_draws(param_names: Vec<String>, draws: Vec<Vec<Vec<f64>>>) -> Self {
        let k = param_names.len();
        let mut s = PosteriorSamples {
            param_names,
            draws,
            diagnostics: BTreeMap::new(),
            chain_stats: Vec::new(),
            warnings: Vec::new(),
            unit_maps: vec![UnitMap::IDENTITY; k],
            meta: BTreeMap::new(),
            n_observations: 0,
        };
        s.refresh_diagnostics();
        s
    }

    /// A single-draw posterior concentrated at `values`.
    pub fn point_mass(names: &[&str], values: &[f64]) -> Self {
        Self::from_draws(
            names.iter().map(|s| s.to_string()).collect(),
            vec![vec![values.to_vec()]],
        )
    }

    pub(crate) fn refresh_diagnostics(&mut self) {
        self.diagnostics = (0..self.param_names.len())
            .map(|j| {
                let rhat = r_hat(&self.chain_columns(j));
                let ess_note = if rhat.is_infinite() {
                    Some("zero within-chain variance".to_string())
                } else if rhat.is_nan() {
                    Some("too few draws for R-hat".to_string())
                } else {
                    None
                };
                (self.param_names[j].clone(), ParamDiagnostics { rhat, ess_note })
            })
            .collect();
    }

    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_iterations(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.param_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| BoatError::Contract(format!("posterior has no parameter `{name}`")))
    }

    pub fn chain_columns(&self, j: usize) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|chain| chain.iter().map(|d| d[j]).collect())
            .collect()
    }

    pub fn pooled_column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().flatten().map(|d| d[j]).collect()
    }

    /// All draws of `name`, chains concatenated in order.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.pooled_column(self.param_index(name)?))
    }

    pub fn mean(&self, name: &str) -> Result<f64> {
        Ok(mean(&self.column(name)?))
    }

    pub fn interval(&self, name: &str) -> Result<(f64, f64)> {
        Ok(central_interval(&self.column(name)?, CREDIBLE_MASS))
    }

    /// Posterior means of every parameter, in `param_names` order.
    pub fn means(&self) -> Vec<f64> {
        (0..self.param_names.len()).map(|j| mean(&self.pooled_column(j))).collect()
    }

    pub fn rhat(&self, name: &str) -> Option<f64> {
        self.diagnostics.get(name).map(|d| d.rhat)
    }

    pub fn max_rhat(&self) -> f64 {
        self.diagnostics.values().map(|d| d.rhat).fold(f64::NAN, f64::max)
    }

    /// Every R̂ finite and below `threshold`.
    pub fn converged(&self, threshold: f64) -> bool {
        self.diagnostics.values().all(|d| d.rhat.is_finite() && d.rhat < threshold)
    }

    pub fn total_divergences(&self) -> usize {
        self.chain_stats.iter().map(|c| c.divergences).sum()
    }

    /// Rewrites draws from fitted units to reporting units.
    pub(crate) fn apply_unit_maps(&mut self, maps: Vec<UnitMap>) {
        assert_eq!(maps.len(), self.param_names.len());
        for d in self.draws.iter_mut().flatten() {
            for (v, m) in d.iter_mut().zip(&maps) {
                *v = m.to_natural(*v);
            }
        }
        self.unit_maps = maps;
        self.refresh_diagnostics();
    }

    /// Draws of `name` on the scale the sampler worked on.
    pub fn fitted_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.param_index(name)?;
        let m = self.unit_maps[j];
        Ok(self.pooled_column(j).into_iter().map(|v| m.to_fitted(v)).collect())
    }

    /// One row per chain-iteration, one column per parameter.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.param_names)?;
        for d in self.draws.iter().flatten() {
            w.write_record(d.iter().map(|v| format_float(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation, stable across runs.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:?}")
}
