//! Bayesian propensity-score matching.
//!
//! A logistic propensity model is sampled with NUTS, units are scored at the
//! posterior-mean coefficients, and control units are matched to treated
//! units greedily (highest treated score first) either within a caliper or
//! one-to-one without replacement.

use std::io::Write;

use ndarray::ArrayView1;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{BoatError, Result};
use crate::estimate::{difference_in_means, mean_var, paired_mean, ATEEstimate, Estimand};
use crate::nuts::{self, format_float, PosteriorSamples, SamplerConfig};
use crate::prob::{sigmoid, ModelSpec, PriorSpec};

pub const DEFAULT_CALIPER: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    pub fn from_indicator(t: u8) -> Self {
        if t == 1 {
            Group::Treatment
        } else {
            Group::Control
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Treatment => "treatment",
        }
    }

    pub fn indicator(&self) -> u8 {
        u8::from(*self == Group::Treatment)
    }
}

impl std::str::FromStr for Group {
    type Err = BoatError;

    fn from_str(raw: &str) -> Result<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "treatment" | "treated" | "1" | "true" => Ok(Group::Treatment),
            "control" | "0" | "false" => Ok(Group::Control),
            _ => Err(BoatError::Schema(format!("group `{raw}` is neither control nor treatment"))),
        }
    }
}

/// Propensity scores at the posterior mean plus optional per-draw scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityScores {
    pub unit_ids: Vec<String>,
    pub mean_score: Vec<f64>,
    /// `draw_scores[d][unit]` for randomly selected posterior draws.
    pub draw_scores: Option<Vec<Vec<f64>>>,
    pub group: Vec<Group>,
}

impl PropensityScores {
    pub fn new(unit_ids: Vec<String>, mean_score: Vec<f64>, group: Vec<Group>) -> Result<Self> {
        if unit_ids.len() != mean_score.len() || group.len() != mean_score.len() {
            return Err(BoatError::Contract("propensity score lengths disagree".into()));
        }
        if let Some(s) = mean_score.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return Err(BoatError::Domain(format!("propensity score {s} outside (0,1)")));
        }
        Ok(PropensityScores {
            unit_ids,
            mean_score,
            draw_scores: None,
            group,
        })
    }

    fn indices_of(&self, g: Group) -> Vec<usize> {
        (0..self.group.len()).filter(|&i| self.group[i] == g).collect()
    }

    /// Long-format rows `unit_id, group, mean_score, draw_1..` for plotting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n_draws = self.draw_scores.as_ref().map_or(0, Vec::len);
        let mut header = vec!["unit_id".to_string(), "group".into(), "mean_score".into()];
        header.extend((1..=n_draws).map(|d| format!("draw_{d}")));
        w.write_record(&header)?;
        for i in 0..self.unit_ids.len() {
            let mut rec = vec![
                self.unit_ids[i].clone(),
                self.group[i].as_str().to_string(),
                format_float(self.mean_score[i]),
            ];
            if let Some(ds) = &self.draw_scores {
                rec.extend(ds.iter().map(|d| format_float(d[i])));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchMethod {
    Caliper { caliper: f64 },
    NearestNeighbour,
}

/// One matched pair; `treated`/`control` index rows of the scored data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub treated: usize,
    pub control: usize,
    pub treated_id: String,
    pub control_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_treated: Vec<usize>,
    pub method: MatchMethod,
}

impl MatchResult {
    pub fn total_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.distance).sum()
    }

    pub fn mean_distance(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.total_distance() / self.pairs.len() as f64
        }
    }

    /// CSV with header `treated_id,control_id,distance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["treated_id", "control_id", "distance"])?;
        for p in &self.pairs {
            w.write_record([p.treated_id.as_str(), p.control_id.as_str(), &format_float(p.distance)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples the logistic propensity model `t ~ Bernoulli(sigmoid(α + βx))`.
pub fn fit_propensity(data: &DesignMatrix, priors: &PriorSpec, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    let treated = data.n_treated();
    if treated == 0 || treated == data.len() {
        return Err(BoatError::Separation(format!(
            "{treated} of {} units treated; both groups are required",
            data.len()
        )));
    }
    let mut samples = nuts::sample(&ModelSpec::logistic(priors.clone()), data, cfg)?;
    if data.x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        samples
            .warnings
            .push("covariates are not min-max scaled to [0,1]; prior scales may be mis-sized".into());
    }
    Ok(samples)
}

fn linear_predictor(params: &[f64], row: ArrayView1<f64>) -> f64 {
    params[0] + row.iter().zip(&params[1..]).map(|(x, b)| x * b).sum::<f64>()
}

/// Scores every unit at the posterior-mean parameters; also scores the units
/// under `n_uncertainty_draws` posterior draws chosen with `seed`.
pub fn propensity_scores(
    posterior: &PosteriorSamples,
    data: &DesignMatrix,
    n_uncertainty_draws: usize,
    seed: u64,
) -> Result<PropensityScores> {
    let expected: Vec<String> = std::iter::once("alpha".to_string())
        .chain(data.covariate_names.iter().map(|c| format!("beta[{c}]")))
        .collect();
    if posterior.param_names != expected {
        return Err(BoatError::Contract(format!(
            "posterior parameters {:?} do not match design covariates {:?}",
            posterior.param_names, expected
        )));
    }
    let score_all = |params: &[f64]| -> Vec<f64> {
        data.x
            .rows()
            .into_iter()
            .map(|row| sigmoid(linear_predictor(params, row)).clamp(1e-12, 1.0 - 1e-12))
            .collect()
    };
    let mean_params = posterior.means();
    let mut scores = PropensityScores::new(
        data.unit_ids.clone(),
        score_all(&mean_params),
        data.treatment.iter().map(|&t| Group::from_indicator(t)).collect(),
    )?;
    if n_uncertainty_draws > 0 {
        let all: Vec<&Vec<f64>> = posterior.draws.iter().flatten().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = n_uncertainty_draws.min(all.len());
        let mut picked = sample_indices(&mut rng, all.len(), k).into_vec();
        picked.sort_unstable();
        scores.draw_scores = Some(picked.into_iter().map(|d| score_all(all[d])).collect());
    }
    Ok(scores)
}

/// Treated units by descending score, ties by lower row index.
fn treated_order(scores: &PropensityScores) -> Vec<usize> {
    let mut treated = scores.indices_of(Group::Treatment);
    treated.sort_by(|&a, &b| {
        scores.mean_score[b]
            .total_cmp(&scores.mean_score[a])
            .then(a.cmp(&b))
    });
    treated
}

fn greedy_match(scores: &PropensityScores, caliper: Option<f64>) -> (Vec<MatchedPair>, Vec<usize>) {
    let controls = scores.indices_of(Group::Control);
    let mut used = vec![false; controls.len()];
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for t in treated_order(scores) {
        let st = scores.mean_score[t];
        let best = controls
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, &c)| (k, c, (st - scores.mean_score[c]).abs()))
            .min_by(|a, b| a.2.total_cmp(&b.2).then(a.1.cmp(&b.1)));
        match best {
            Some((k, c, d)) if caliper.is_none_or(|cal| d <= cal) => {
                used[k] = true;
                pairs.push(MatchedPair {
                    treated: t,
                    control: c,
                    treated_id: scores.unit_ids[t].clone(),
                    control_id: scores.unit_ids[c].clone(),
                    distance: d,
                });
            }
            _ => unmatched.push(t),
        }
    }
    (pairs, unmatched)
}

/// Greedy caliper matching without replacement.
pub fn caliper_match(scores: &PropensityScores, caliper: f64) -> Result<MatchResult> {
    if !(caliper > 0.0) {
        return Err(BoatError::Domain(format!("caliper must be > 0, got {caliper}")));
    }
    let n_t = scores.indices_of(Group::Treatment).len();
    if n_t == 0 || n_t == scores.group.len() {
        return Err(BoatError::Contract("caliper matching needs both groups".into()));
    }
    let (pairs, unmatched_treated) = greedy_match(scores, Some(caliper));
    Ok(MatchResult {
        pairs,
        unmatched_treated,
        method: MatchMethod::Caliper { caliper },
    })
}

/// Greedy 1:1 nearest-neighbour matching without replacement; every treated
/// unit is matched.
pub fn nn_match_1to1(scores: &PropensityScores) -> Result<MatchResult> {
    let n_t = scores.indices_of(Group::Treatment).len();
    let n_c = scores.group.len() - n_t;
    if n_t == 0 {
        return Err(BoatError::Contract("no treated units to match".into()));
    }
    if n_c < n_t {
        return Err(BoatError::Infeasible(format!(
            "{n_c} controls cannot cover {n_t} treated units without replacement"
        )));
    }
    let (pairs, unmatched_treated) = greedy_match(scores, None);
    debug_assert!(unmatched_treated.is_empty());
    Ok(MatchResult {
        pairs,
        unmatched_treated,
        method: MatchMethod::NearestNeighbour,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateBalance {
    pub name: String,
    pub mean_c: f64,
    pub mean_t: f64,
    pub std_c: f64,
    pub std_t: f64,
    /// Standardized mean difference over matched units.
    pub smd_matched: f64,
    /// Standardized mean difference over all units.
    pub smd_unmatched: f64,
    /// `1 − (var_t + var_c)_matched / (var_t + var_c)_all`.
    pub variance_reduction_vs_unmatched: f64,
}

/// `(mean_t − mean_c) / sqrt((var_t + var_c) / 2)`; zero when both groups are constant.
pub fn standardized_mean_difference(treated: &[f64], control: &[f64]) -> f64 {
    let (mt, vt) = mean_var(treated);
    let (mc, vc) = mean_var(control);
    let pooled = ((vt + vc) / 2.0).sqrt();
    if pooled > 0.0 {
        (mt - mc) / pooled
    } else {
        0.0
    }
}

/// Covariate balance of the matched groups against the unmatched pool.
pub fn balance_report(matched: &MatchResult, data: &DesignMatrix) -> Result<Vec<CovariateBalance>> {
    if matched.pairs.is_empty() {
        return Err(BoatError::Estimation("balance needs at least one matched pair".into()));
    }
    let all_t: Vec<usize> = (0..data.len()).filter(|&i| data.treatment[i] == 1).collect();
    let all_c: Vec<usize> = (0..data.len()).filter(|&i| data.treatment[i] == 0).collect();
    let m_t: Vec<usize> = matched.pairs.iter().map(|p| p.treated).collect();
    let m_c: Vec<usize> = matched.pairs.iter().map(|p| p.control).collect();

    Ok(data
        .covariate_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = |rows: &[usize]| rows.iter().map(|&i| data.x[[i, j]]).collect::<Vec<f64>>();
            let (xt, xc) = (col(&m_t), col(&m_c));
            let (at, ac) = (col(&all_t), col(&all_c));
            let (mean_t, var_t) = mean_var(&xt);
            let (mean_c, var_c) = mean_var(&xc);
            let (_, var_at) = mean_var(&at);
            let (_, var_ac) = mean_var(&ac);
            let before = var_at + var_ac;
            CovariateBalance {
                name: name.clone(),
                mean_c,
                mean_t,
                std_c: var_c.sqrt(),
                std_t: var_t.sqrt(),
                smd_matched: standardized_mean_difference(&xt, &xc),
                smd_unmatched: standardized_mean_difference(&at, &ac),
                variance_reduction_vs_unmatched: if before > 0.0 {
                    1.0 - (var_t + var_c) / before
                } else {
                    0.0
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBin {
    pub lo: f64,
    pub hi: f64,
    pub control: usize,
    pub treated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub bins: Vec<ScoreBin>,
    /// Occupied bins holding units of one group only.
    pub violating_bins: Vec<usize>,
    /// Share of units in bins occupied by both groups.
    pub overlap_fraction: f64,
}

/// Histogram overlap check of the mean scores on `bins` equal-width bins.
pub fn positivity_check(scores: &PropensityScores, bins: usize) -> Result<PositivityReport> {
    if bins < 2 {
        return Err(BoatError::Domain("positivity check needs at least 2 bins".into()));
    }
    let width = 1.0 / bins as f64;
    let mut hist: Vec<ScoreBin> = (0..bins)
        .map(|b| ScoreBin {
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            control: 0,
            treated: 0,
        })
        .collect();
    for (s, g) in scores.mean_score.iter().zip(&scores.group) {
        let b = ((s * bins as f64).floor() as usize).min(bins - 1);
        match g {
            Group::Control => hist[b].control += 1,
            Group::Treatment => hist[b].treated += 1,
        }
    }
    let violating_bins = hist
        .iter()
        .enumerate()
        .filter(|(_, b)| (b.control == 0) != (b.treated == 0))
        .map(|(i, _)| i)
        .collect();
    let overlapping: usize = hist
        .iter()
        .filter(|b| b.control > 0 && b.treated > 0)
        .map(|b| b.control + b.treated)
        .sum();
    let total = scores.mean_score.len();
    Ok(PositivityReport {
        bins: hist,
        violating_bins,
        overlap_fraction: if total > 0 { overlapping as f64 / total as f64 } else { 0.0 },
    })
}

/// `E[y | t=1, e(X)] − E[y | t=0, e(X)]` over matched pairs.
///
/// The interval is the Student-t posterior of the mean pair difference.
pub fn ate_psm(matched: &MatchResult, y: &[f64]) -> Result<ATEEstimate> {
    if matched.pairs.is_empty() {
        return Err(BoatError::Estimation("no matched pairs".into()));
    }
    let diffs = matched
        .pairs
        .iter()
        .map(|p| match (y.get(p.treated), y.get(p.control)) {
            (Some(a), Some(b)) => Ok(a - b),
            _ => Err(BoatError::Contract(format!(
                "pair ({}, {}) outside target vector of length {}",
                p.treated_id,
                p.control_id,
                y.len()
            ))),
        })
        .collect::<Result<Vec<f64>>>()?;
    paired_mean(Estimand::AtePsm, &diffs)
}

/// Unadjusted difference in mean outcome between treated and control units.
pub fn naive_ate(data: &DesignMatrix, y: &[f64]) -> Result<ATEEstimate> {
    let (t, c) = split_outcomes(data, y, |_| true)?;
    difference_in_means(Estimand::Ate, &t, &c)
}

fn split_outcomes<F>(data: &DesignMatrix, y: &[f64], keep: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(usize) -> bool,
{
    if y.len() != data.len() {
        return Err(BoatError::Contract("target length differs from design rows".into()));
    }
    let mut t = Vec::new();
    let mut c = Vec::new();
    for i in (0..data.len()).filter(|&i| keep(i)) {
        if data.treatment[i] == 1 {
            t.push(y[i]);
        } else {
            c.push(y[i]);
        }
    }
    Ok((t, c))
}

/// Effect within the subgroup of rows whose covariates satisfy `subgroup`.
pub fn cate<F>(data: &DesignMatrix, y: &[f64], label: &str, subgroup: F) -> Result<ATEEstimate>
where
    F: Fn(ArrayView1<f64>) -> bool,
{
    let (t, c) = split_outcomes(data, y, |i| subgroup(data.x.row(i)))?;
    if t.is_empty() || c.is_empty() {
        return Err(BoatError::Positivity(format!(
            "subgroup `{label}` has {} treated and {} control units",
            t.len(),
            c.len()
        )));
    }
    difference_in_means(Estimand::Cate(label.to_string()), &t, &c)
}
