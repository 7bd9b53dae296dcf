//! Which causal model fits a study, as a short yes/no questionnaire.
//!
//! Questions are asked in order and only those on the reached branch need an
//! answer. Answers that could not be given together are refused.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{BoatError, Result};

/// `None` means "not answered".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answers {
    /// Can units be randomly assigned to treatment with enough samples?
    pub randomizable: Option<bool>,
    /// Are the confounding covariates known and observed?
    pub covariates_known: Option<bool>,
    /// More than one confounding covariate?
    pub multiple_covariates: Option<bool>,
    /// A single continuous covariate dominates assignment?
    pub continuous_dominant_covariate: Option<bool>,
    /// Must a latent variable be inferred?
    pub latent_inference_needed: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    RandomisedExperiment,
    Bpsm,
    Brdd,
    Stratification,
    Bdid,
    OutOfScope,
}

impl Recommendation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Recommendation::RandomisedExperiment => "randomised experiment",
            Recommendation::Bpsm => "BPSM",
            Recommendation::Brdd => "BRDD",
            Recommendation::Stratification => "stratification",
            Recommendation::Bdid => "BDID",
            Recommendation::OutOfScope => "out of BOAT scope: see instrumental variables",
        }
    }

    pub fn rationale(&self) -> &'static str {
        match self {
            Recommendation::RandomisedExperiment => "random assignment removes confounding; no adjustment model is needed",
            Recommendation::Bpsm => "several known covariates drive assignment; match on a Bayesian propensity score",
            Recommendation::Brdd => "one continuous covariate decides assignment; compare outcomes either side of the cutoff",
            Recommendation::Stratification => "a single categorical covariate; compare within its levels",
            Recommendation::Bdid => "confounders are unobserved but shared over time; difference out the common change",
            Recommendation::OutOfScope => "a latent variable must be inferred; none of the three models applies",
        }
    }
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn need(answer: Option<bool>, question: &str) -> Result<bool> {
    answer.ok_or_else(|| BoatError::Validation(format!("`{question}` must be answered on this path")))
}

/// Walks the decision tree.
pub fn advise(a: &Answers) -> Result<Recommendation> {
    if need(a.randomizable, "randomizable")? {
        return Ok(Recommendation::RandomisedExperiment);
    }
    if need(a.covariates_known, "covariates_known")? {
        let multiple = need(a.multiple_covariates, "multiple_covariates")?;
        if multiple {
            if a.continuous_dominant_covariate == Some(true) {
                return Err(BoatError::Validation(
                    "a single dominant covariate contradicts multiple confounding covariates".into(),
                ));
            }
            return Ok(Recommendation::Bpsm);
        }
        return Ok(if need(a.continuous_dominant_covariate, "continuous_dominant_covariate")? {
            Recommendation::Brdd
        } else {
            Recommendation::Stratification
        });
    }
    if a.multiple_covariates == Some(true) || a.continuous_dominant_covariate == Some(true) {
        return Err(BoatError::Validation(
            "covariate structure was described although covariates are unknown".into(),
        ));
    }
    Ok(if need(a.latent_inference_needed, "latent_inference_needed")? {
        Recommendation::OutOfScope
    } else {
        Recommendation::Bdid
    })
}
