//! Bayesian difference-in-differences on a two-period panel.
//!
//! The panel is stacked to one row per unit-period and fitted as
//! `y ~ α + θ_treat·treated + θ_post·post + θ_did·treated·post + βX + ε`;
//! `θ_did` carries the effect. The outcome is standardized before sampling
//! and all draws are reported back in outcome units.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bpsm::Group;
use crate::design::DesignMatrix;
use crate::error::{BoatError, Result};
use crate::estimate::{ATEEstimate, Estimand, ScaledEffect};
use crate::nuts::{self, format_float, central_interval, PosteriorSamples, SamplerConfig, UnitMap, CREDIBLE_MASS};
use crate::prob::{ModelSpec, PriorSpec};

/// Period index of the pre-intervention observation used by the estimator.
pub const PRE: i64 = -1;
/// Period index of the post-intervention observation.
pub const POST: i64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub unit_ids: Vec<String>,
    pub group: Vec<Group>,
    pub y_pre: Vec<f64>,
    pub y_post: Vec<f64>,
    pub covariate_names: Vec<String>,
    pub x_pre: Option<Array2<f64>>,
    pub x_post: Option<Array2<f64>>,
}

impl PanelDataset {
    pub fn new(unit_ids: Vec<String>, group: Vec<Group>, y_pre: Vec<f64>, y_post: Vec<f64>) -> Result<Self> {
        let p = PanelDataset {
            unit_ids,
            group,
            y_pre,
            y_post,
            covariate_names: Vec::new(),
            x_pre: None,
            x_post: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_covariates(mut self, names: Vec<String>, x_pre: Array2<f64>, x_post: Array2<f64>) -> Result<Self> {
        self.covariate_names = names;
        self.x_pre = Some(x_pre);
        self.x_post = Some(x_post);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.unit_ids.len();
        if self.group.len() != n || self.y_pre.len() != n || self.y_post.len() != n {
            return Err(BoatError::Contract("every unit needs a group and both periods".into()));
        }
        let treated = self.group.iter().filter(|g| **g == Group::Treatment).count();
        if treated == 0 || treated == n {
            return Err(BoatError::Contract("panel needs both control and treatment units".into()));
        }
        for x in [&self.x_pre, &self.x_post].into_iter().flatten() {
            if x.nrows() != n || x.ncols() != self.covariate_names.len() {
                return Err(BoatError::Contract("covariate matrix shape mismatch".into()));
            }
        }
        if self.x_pre.is_some() != self.x_post.is_some() {
            return Err(BoatError::Contract("covariates must be given for both periods".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_ids.is_empty()
    }

    /// Mean outcome per (group, period) cell.
    pub fn cell_means(&self) -> CellMeans {
        let mean = |g: Group, ys: &[f64]| {
            let v: Vec<f64> = ys.iter().zip(&self.group).filter(|(_, gg)| **gg == g).map(|(y, _)| *y).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        CellMeans {
            pre_control: mean(Group::Control, &self.y_pre),
            post_control: mean(Group::Control, &self.y_post),
            pre_treatment: mean(Group::Treatment, &self.y_pre),
            post_treatment: mean(Group::Treatment, &self.y_post),
        }
    }

    /// One row per unit-period: all pre rows, then all post rows.
    pub fn to_long_design(&self) -> Result<DesignMatrix> {
        let n = self.len();
        let k = self.covariate_names.len();
        let mut x = Array2::zeros((2 * n, k));
        if let (Some(pre), Some(post)) = (&self.x_pre, &self.x_post) {
            x.slice_mut(ndarray::s![..n, ..]).assign(pre);
            x.slice_mut(ndarray::s![n.., ..]).assign(post);
        }
        let ids = self
            .unit_ids
            .iter()
            .map(|u| format!("{u}@pre"))
            .chain(self.unit_ids.iter().map(|u| format!("{u}@post")))
            .collect();
        let t: Vec<u8> = self.group.iter().map(|g| u8::from(*g == Group::Treatment)).collect();
        let treatment = [t.clone(), t].concat();
        let y = [self.y_pre.clone(), self.y_post.clone()].concat();
        let period = [vec![0.0; n], vec![1.0; n]].concat();
        DesignMatrix::new(ids, self.covariate_names.clone(), x, treatment, y)?.with_period(period)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMeans {
    pub pre_control: f64,
    pub post_control: f64,
    pub pre_treatment: f64,
    pub post_treatment: f64,
}

impl CellMeans {
    pub fn ate(&self) -> f64 {
        ate_did_from_means(self.pre_control, self.post_control, self.pre_treatment, self.post_treatment)
    }
}

/// `(post_t − pre_t) − (post_c − pre_c)`.
pub fn ate_did_from_means(mean_pre_c: f64, mean_post_c: f64, mean_pre_t: f64, mean_post_t: f64) -> f64 {
    (mean_post_t - mean_pre_t) - (mean_post_c - mean_pre_c)
}

/// Samples the stacked two-period regression.
pub fn fit_did(panel: &PanelDataset, priors: &PriorSpec, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    panel.validate()?;
    let mut design = panel.to_long_design()?;
    for (j, name) in design.covariate_names.iter().enumerate() {
        let col = design.x.column(j);
        let first = col[0];
        if col.iter().all(|v| *v == first) {
            return Err(BoatError::Rank(format!("covariate `{name}` is constant")));
        }
    }
    let n = design.len() as f64;
    let center = design.y.iter().sum::<f64>() / n;
    let spread = (design.y.iter().map(|y| (y - center).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if spread > 0.0 { spread } else { 1.0 };
    for y in design.y.iter_mut() {
        *y = (*y - center) / scale;
    }

    let mut samples = nuts::sample(&ModelSpec::did(priors.clone()), &design, cfg)?;
    let maps = samples
        .param_names
        .iter()
        .map(|name| match name.as_str() {
            "alpha" => UnitMap { offset: center, scale },
            _ => UnitMap::scale_only(scale),
        })
        .collect();
    samples.apply_unit_maps(maps);
    samples.meta.insert("y_center".into(), center);
    samples.meta.insert("y_scale".into(), scale);
    Ok(samples)
}

/// Effect = posterior of the treated×post interaction coefficient.
pub fn ate_did(posterior: &PosteriorSamples) -> Result<ATEEstimate> {
    let draws = posterior.column("theta_did")?;
    let mut est = ATEEstimate::from_draws(Estimand::AteDid, draws)?;
    let j = posterior.param_index("theta_did")?;
    let map = posterior.unit_maps[j];
    if map.scale != 1.0 {
        let fitted = posterior.fitted_column("theta_did")?;
        est.scaled = Some(ScaledEffect {
            point: fitted.iter().sum::<f64>() / fitted.len() as f64,
            interval: central_interval(&fitted, CREDIBLE_MASS),
            scale: map.scale,
        });
    }
    Ok(est)
}

/// Outcome values per pre-intervention time point and group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPanel {
    pub times: Vec<f64>,
    /// `control[k]` holds the control outcomes observed at `times[k]`.
    pub control: Vec<Vec<f64>>,
    pub treatment: Vec<Vec<f64>>,
}

impl TrendPanel {
    pub fn group_means(&self) -> (Vec<f64>, Vec<f64>) {
        let m = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        (self.control.iter().map(m).collect(), self.treatment.iter().map(m).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TrendTolerance {
    /// Multiple of the pooled within-cell standard deviation.
    RelativeToPooledStd(f64),
    Absolute(f64),
}

impl Default for TrendTolerance {
    fn default() -> Self {
        TrendTolerance::RelativeToPooledStd(0.25)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub slope_c: f64,
    pub slope_t: f64,
    pub abs_slope_gap: f64,
    pub pooled_std: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn ls_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    sxy / sxx
}

/// Compares least-squares slopes of the group-mean pre-intervention
/// trajectories.
pub fn parallel_trend_check(pre: &TrendPanel, tolerance: TrendTolerance) -> Result<TrendReport> {
    let k = pre.times.len();
    if k < 2 {
        return Err(BoatError::InsufficientData(format!(
            "parallel-trend check needs >= 2 pre-intervention time points, got {k}"
        )));
    }
    if pre.control.len() != k || pre.treatment.len() != k {
        return Err(BoatError::Contract("trend panel cells do not match time points".into()));
    }
    if pre.control.iter().chain(&pre.treatment).any(Vec::is_empty) {
        return Err(BoatError::InsufficientData("empty group at a pre-intervention time point".into()));
    }
    let (mc, mt) = pre.group_means();
    let slope_c = ls_slope(&pre.times, &mc);
    let slope_t = ls_slope(&pre.times, &mt);
    let gap = (slope_t - slope_c).abs();

    let mut ss = 0.0;
    let mut dof = 0.0;
    for cell in pre.control.iter().chain(&pre.treatment) {
        let m = cell.iter().sum::<f64>() / cell.len() as f64;
        ss += cell.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        dof += (cell.len() - 1) as f64;
    }
    let pooled_std = if dof > 0.0 { (ss / dof).sqrt() } else { 0.0 };
    let tol = match tolerance {
        TrendTolerance::RelativeToPooledStd(f) => f * pooled_std,
        TrendTolerance::Absolute(a) => a,
    };
    Ok(TrendReport {
        slope_c,
        slope_t,
        abs_slope_gap: gap,
        pooled_std,
        tolerance: tol,
        pass: gap <= tol,
    })
}

fn parse_period(raw: &str) -> Result<i64> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "pre" => Ok(PRE),
        "post" => Ok(POST),
        other => other
            .parse::<i64>()
            .map_err(|_| BoatError::Schema(format!("period `{raw}` is not pre, post or an integer"))),
    }
}

/// Column names of the panel CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelColumns {
    pub unit: String,
    pub group: String,
    pub period: String,
    pub target: String,
    pub covariates: Vec<String>,
}

impl Default for PanelColumns {
    fn default() -> Self {
        PanelColumns {
            unit: "unit_id".into(),
            group: "group".into(),
            period: "period".into(),
            target: "y".into(),
            covariates: Vec::new(),
        }
    }
}

/// A parsed panel plus any extra pre-intervention history.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFile {
    pub panel: PanelDataset,
    /// Present when rows exist for at least two periods `<= 0`.
    pub pre_trend: Option<TrendPanel>,
}

/// Reads a long-format panel CSV.
///
/// `period` is `pre`, `post` or an integer; `pre` ≡ −1 and `post` ≡ 1 feed
/// the estimator, every period `<= 0` feeds the trend check.
pub fn read_panel_csv<P: AsRef<Path>>(path: P, cols: &PanelColumns) -> Result<PanelFile> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BoatError::Schema(format!("missing column `{name}`")))
    };
    let (iu, ig, ip, iy) = (idx(&cols.unit)?, idx(&cols.group)?, idx(&cols.period)?, idx(&cols.target)?);
    let ix: Vec<usize> = cols.covariates.iter().map(|c| idx(c)).collect::<Result<_>>()?;

    struct UnitRows {
        group: Group,
        obs: BTreeMap<i64, (f64, Vec<f64>)>,
    }
    let mut units: BTreeMap<String, UnitRows> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| BoatError::Schema(format!("row {}: `{}` is not numeric", line + 2, &rec[i])))
        };
        let group: Group = rec[ig].parse()?;
        let period = parse_period(&rec[ip])?;
        let y = num(iy)?;
        let x = ix.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
        let entry = units.entry(rec[iu].to_string()).or_insert(UnitRows { group, obs: BTreeMap::new() });
        if entry.group != group {
            return Err(BoatError::Schema(format!("unit `{}` changes group", &rec[iu])));
        }
        entry.obs.insert(period, (y, x));
    }

    let n = units.len();
    let k = ix.len();
    let mut ids = Vec::with_capacity(n);
    let mut group = Vec::with_capacity(n);
    let (mut y_pre, mut y_post) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut x_pre, mut x_post) = (Array2::zeros((n, k)), Array2::zeros((n, k)));
    let mut history: BTreeMap<i64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, (id, u)) in units.into_iter().enumerate() {
        let (Some(pre), Some(post)) = (u.obs.get(&PRE), u.obs.get(&POST)) else {
            return Err(BoatError::Schema(format!("unit `{id}` is not observed in both pre and post periods")));
        };
        y_pre.push(pre.0);
        y_post.push(post.0);
        for j in 0..k {
            x_pre[[i, j]] = pre.1[j];
            x_post[[i, j]] = post.1[j];
        }
        for (&tau, (y, _)) in u.obs.range(..=0) {
            let cell = history.entry(tau).or_default();
            match u.group {
                Group::Control => cell.0.push(*y),
                Group::Treatment => cell.1.push(*y),
            }
        }
        ids.push(id);
        group.push(u.group);
    }

    let mut panel = PanelDataset::new(ids, group, y_pre, y_post)?;
    if k > 0 {
        panel = panel.with_covariates(cols.covariates.clone(), x_pre, x_post)?;
    }
    let pre_trend = (history.len() >= 2).then(|| TrendPanel {
        times: history.keys().map(|&t| t as f64).collect(),
        control: history.values().map(|c| c.0.clone()).collect(),
        treatment: history.values().map(|c| c.1.clone()).collect(),
    });
    Ok(PanelFile { panel, pre_trend })
}

/// Writes the panel (and optional extra pre-period history) in the format
/// [`read_panel_csv`] accepts.
pub fn write_panel_csv<W: Write>(out: W, panel: &PanelDataset, history: Option<&[(i64, Vec<f64>)]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["unit_id".to_string(), "group".into(), "period".into(), "y".into()];
    header.extend(panel.covariate_names.iter().cloned());
    w.write_record(&header)?;
    let mut row = |i: usize, period: String, y: f64, x: Option<&Array2<f64>>| -> Result<()> {
        let mut rec = vec![panel.unit_ids[i].clone(), panel.group[i].as_str().into(), period, format_float(y)];
        if let Some(x) = x {
            rec.extend(x.row(i).iter().map(|v| format_float(*v)));
        }
        w.write_record(&rec)?;
        Ok(())
    };
    for i in 0..panel.len() {
        if let Some(h) = history {
            for (tau, ys) in h.iter().filter(|(tau, _)| *tau != PRE && *tau <= 0) {
                row(i, tau.to_string(), ys[i], panel.x_pre.as_ref())?;
            }
        }
        row(i, "pre".into(), panel.y_pre[i], panel.x_pre.as_ref())?;
        row(i, "post".into(), panel.y_post[i], panel.x_post.as_ref())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_six_arithmetic() {
        let v = ate_did_from_means(205.30, 218.93, 190.45, 204.36);
        assert!((v - 0.28).abs() < 0.005, "{v}");
    }

    #[test]
    fn simple_cases() {
        assert_eq!(ate_did_from_means(1.0, 3.0, 5.0, 7.0), 0.0);
        assert_eq!(ate_did_from_means(0.0, 1.0, 0.0, 3.0), 2.0);
    }

    #[test]
    fn group_swap_negates() {
        let a = ate_did_from_means(1.5, 2.25, 4.0, 7.5);
        let b = ate_did_from_means(4.0, 7.5, 1.5, 2.25);
        assert_eq!(a, -b);
    }

    #[test]
    fn point_mass_interaction() {
        let post = PosteriorSamples::point_mass(&["alpha", "theta_did"], &[0.0, -0.28]);
        let e = ate_did(&post).unwrap();
        assert_eq!(e.point, -0.28);
        assert!(ate_did(&PosteriorSamples::point_mass(&["alpha"], &[0.0])).is_err());
    }

    fn trend(control: &[f64], treatment: &[f64]) -> TrendPanel {
        let jitter = |m: f64| vec![m - 0.5, m, m + 0.5];
        TrendPanel {
            times: (0..control.len()).map(|t| t as f64).collect(),
            control: control.iter().map(|&m| jitter(m)).collect(),
            treatment: treatment.iter().map(|&m| jitter(m)).collect(),
        }
    }

    #[test]
    fn identical_trajectories_pass() {
        let r = parallel_trend_check(&trend(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), TrendTolerance::default()).unwrap();
        assert_eq!(r.abs_slope_gap, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn diverging_pretrend_fails() {
        let r = parallel_trend_check(&trend(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), TrendTolerance::Absolute(0.1)).unwrap();
        assert!((r.slope_t - 1.0).abs() < 1e-12);
        assert!(!r.pass);
    }

    #[test]
    fn one_pre_point_is_insufficient() {
        let r = parallel_trend_check(&trend(&[1.0], &[1.0]), TrendTolerance::default());
        assert!(matches!(r, Err(BoatError::InsufficientData(_))));
    }

    #[test]
    fn single_group_panel_is_rejected() {
        let r = PanelDataset::new(vec!["a".into()], vec![Group::Control], vec![1.0], vec![2.0]);
        assert!(r.is_err());
    }

    #[test]
    fn panel_csv_round_trip() {
        let panel = PanelDataset::new(
            vec!["u1".into(), "u2".into(), "u3".into()],
            vec![Group::Control, Group::Treatment, Group::Treatment],
            vec![1.0, 2.0, 3.5],
            vec![1.5, 2.25, 4.0],
        )
        .unwrap();
        let history = vec![(-2, vec![0.5, 1.5, 3.0])];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        write_panel_csv(std::fs::File::create(&path).unwrap(), &panel, Some(&history)).unwrap();
        let back = read_panel_csv(&path, &PanelColumns::default()).unwrap();
        assert_eq!(back.panel, panel);
        let tp = back.pre_trend.unwrap();
        assert_eq!(tp.times, vec![-2.0, -1.0]);
        assert_eq!(tp.treatment[0], vec![1.5, 3.0]);
    }
}
