//! Treatment-effect estimates shared by the three designs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{BoatError, Result};
use crate::nuts::{central_interval, CREDIBLE_MASS};

/// Which treatment effect an estimate targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "condition", rename_all = "snake_case")]
pub enum Estimand {
    Ate,
    AtePsm,
    Cate(String),
    AteDid,
    AteRdd,
}

/// Effect expressed on the scale the model was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledEffect {
    pub point: f64,
    pub interval: (f64, f64),
    /// `natural = scale * fitted`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ATEEstimate {
    pub estimand: Estimand,
    pub point: f64,
    /// Posterior standard deviation (or standard error for the closed-form
    /// difference-in-means estimates).
    pub std: f64,
    /// Central 94% credible interval.
    pub interval: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaled: Option<ScaledEffect>,
}

impl ATEEstimate {
    /// Mean, std and central interval of effect draws.
    pub fn from_draws(estimand: Estimand, draws: Vec<f64>) -> Result<Self> {
        if draws.is_empty() {
            return Err(BoatError::Estimation("no draws for the effect".into()));
        }
        let n = draws.len() as f64;
        let point = draws.iter().sum::<f64>() / n;
        let std = (draws.iter().map(|d| (d - point).powi(2)).sum::<f64>() / n).sqrt();
        let (lo, hi) = central_interval(&draws, CREDIBLE_MASS);
        // a heavily skewed draw set can push the mean past a quantile
        let interval = (lo.min(point), hi.max(point));
        Ok(ATEEstimate {
            estimand,
            point,
            std,
            interval,
            draws: Some(draws),
            scaled: None,
        })
    }

    /// Location-scale Student-t posterior summary.
    pub(crate) fn from_t(estimand: Estimand, point: f64, scale: f64, dof: f64) -> Self {
        let half = if scale > 0.0 && dof.is_finite() && dof > 0.0 {
            t_quantile(0.5 + CREDIBLE_MASS / 2.0, dof) * scale
        } else {
            0.0
        };
        ATEEstimate {
            estimand,
            point,
            std: scale,
            interval: (point - half, point + half),
            draws: None,
            scaled: None,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.interval.0 <= value && value <= self.interval.1
    }
}

fn t_quantile(p: f64, dof: f64) -> f64 {
    // statrs' inverse loses precision for huge dof; the normal limit is exact enough there
    if dof > 1e5 {
        return Normal::standard().inverse_cdf(p);
    }
    StudentsT::new(0.0, 1.0, dof)
        .expect("valid Student-t parameters")
        .inverse_cdf(p)
}

pub(crate) fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// `mean(treated) − mean(control)` with a Welch–Satterthwaite t interval.
///
/// Under independent Jeffreys priors each group mean has a Student-t
/// posterior; the difference is approximated by a single t.
pub fn difference_in_means(estimand: Estimand, treated: &[f64], control: &[f64]) -> Result<ATEEstimate> {
    if treated.is_empty() || control.is_empty() {
        return Err(BoatError::Positivity(
            "difference in means needs at least one treated and one control unit".into(),
        ));
    }
    let (mt, vt) = mean_var(treated);
    let (mc, vc) = mean_var(control);
    let (nt, nc) = (treated.len() as f64, control.len() as f64);
    let at = vt / nt;
    let ac = vc / nc;
    let se = (at + ac).sqrt();
    let dof_t = (nt - 1.0).max(1.0);
    let dof_c = (nc - 1.0).max(1.0);
    let dof = if se > 0.0 {
        (at + ac).powi(2) / (at * at / dof_t + ac * ac / dof_c)
    } else {
        f64::INFINITY
    };
    Ok(ATEEstimate::from_t(estimand, mt - mc, se, dof))
}

/// Mean of paired differences with its Jeffreys-prior t interval.
pub fn paired_mean(estimand: Estimand, differences: &[f64]) -> Result<ATEEstimate> {
    if differences.is_empty() {
        return Err(BoatError::Estimation("no matched pairs".into()));
    }
    let (m, v) = mean_var(differences);
    let n = differences.len() as f64;
    Ok(ATEEstimate::from_t(estimand, m, (v / n).sqrt(), n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_summary() {
        let e = ATEEstimate::from_draws(Estimand::AteRdd, vec![-1.0, -1.2, -1.4]).unwrap();
        assert!((e.point + 1.2).abs() < 1e-12);
        assert!(e.interval.0 <= e.point && e.point <= e.interval.1);
    }

    #[test]
    fn welch_interval_contains_point() {
        let e = difference_in_means(Estimand::Ate, &[1.0, 2.0, 3.0], &[0.0, 0.5, 1.0, 0.2]).unwrap();
        assert!((e.point - (2.0 - 0.425)).abs() < 1e-12);
        assert!(e.interval.0 < e.point && e.point < e.interval.1);
    }

    #[test]
    fn t_quantile_matches_normal_for_large_dof() {
        assert!((t_quantile(0.97, 1e7) - 1.880794).abs() < 1e-5);
    }

    #[test]
    fn empty_groups_fail() {
        assert!(difference_in_means(Estimand::Ate, &[], &[1.0]).is_err());
        assert!(paired_mean(Estimand::AtePsm, &[]).is_err());
    }
}
