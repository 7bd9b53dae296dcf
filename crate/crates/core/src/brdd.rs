//! Bayesian sharp regression discontinuity.
//!
//! Fits `y ~ α + β1(x−c) + β2·t + β3(x−c)t + β4·z + ε` with `t = [x ≥ c]`.
//! The sampler sees a standardized outcome, the running variable centred at
//! the cutoff and divided by its spread, and `z` shifted to start at zero;
//! reported draws are in the original units. Because `z` is shifted by its
//! minimum (`z_ref` in the posterior metadata), `alpha` is the control-side
//! level at `x = c, z = z_ref`.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::design::DesignMatrix;
use crate::error::{BoatError, Result};
use crate::estimate::{ATEEstimate, Estimand, ScaledEffect};
use crate::nuts::{self, central_interval, format_float, PosteriorSamples, SamplerConfig, UnitMap, CREDIBLE_MASS};
use crate::prob::{ModelSpec, PriorSpec};

/// Significance level of the density continuity test.
pub const DENSITY_ALPHA: f64 = 0.05;
/// Default density-check half-window as a fraction of the assignment range.
pub const DEFAULT_BANDWIDTH_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct RddDataset {
    pub unit_ids: Vec<String>,
    pub assignment: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Option<Vec<f64>>,
    pub cutoff: f64,
}

impl RddDataset {
    pub fn new(unit_ids: Vec<String>, assignment: Vec<f64>, y: Vec<f64>, cutoff: f64) -> Result<Self> {
        if unit_ids.len() != assignment.len() || y.len() != assignment.len() {
            return Err(BoatError::Contract("ids, assignment and y differ in length".into()));
        }
        if !cutoff.is_finite() || assignment.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(BoatError::Domain("non-finite value in discontinuity data".into()));
        }
        Ok(RddDataset { unit_ids, assignment, y, z: None, cutoff })
    }

    pub fn with_z(mut self, z: Vec<f64>) -> Result<Self> {
        if z.len() != self.len() {
            return Err(BoatError::Contract("z differs in length from assignment".into()));
        }
        self.z = Some(z);
        Ok(self)
    }

    /// Checks an observed treatment column against the sharp rule `t = [x ≥ c]`.
    pub fn check_sharp(&self, treatment: &[u8]) -> Result<()> {
        if treatment.len() != self.len() {
            return Err(BoatError::Contract("treatment differs in length from assignment".into()));
        }
        for (i, (&x, &t)) in self.assignment.iter().zip(treatment).enumerate() {
            if t != u8::from(x >= self.cutoff) {
                return Err(BoatError::Contract(format!(
                    "row {i} ({}) breaks the sharp design: x = {x}, t = {t}, cutoff = {}",
                    self.unit_ids[i], self.cutoff
                )));
            }
        }
        Ok(())
    }

    pub fn treatment(&self) -> Vec<u8> {
        self.assignment.iter().map(|&x| u8::from(x >= self.cutoff)).collect()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Rows kept by `filter`; rows without `z` are an error.
    pub fn filter_z(&self, filter: &ZFilter) -> Result<Self> {
        let z = self
            .z
            .as_ref()
            .ok_or_else(|| BoatError::Contract("z filter given but the data has no z column".into()))?;
        let keep: Vec<usize> = (0..self.len()).filter(|&i| filter.keeps(z[i])).collect();
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Ok(RddDataset {
            unit_ids: keep.iter().map(|&i| self.unit_ids[i].clone()).collect(),
            assignment: pick(&self.assignment),
            y: pick(&self.y),
            z: Some(pick(z)),
            cutoff: self.cutoff,
        })
    }

    fn check_identified(&self) -> Result<()> {
        let right = self.assignment.iter().filter(|&&x| x >= self.cutoff).count();
        if right == 0 || right == self.len() {
            return Err(BoatError::Identification(format!(
                "all {} observations lie on one side of the cutoff {}",
                self.len(),
                self.cutoff
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Gt,
    Ge,
    Lt,
    Le,
}

/// Row filter on the adjustment covariate, written like `z>90` or `z <= 40`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZFilter {
    pub op: Comparison,
    pub threshold: f64,
}

impl ZFilter {
    pub fn keeps(&self, z: f64) -> bool {
        match self.op {
            Comparison::Gt => z > self.threshold,
            Comparison::Ge => z >= self.threshold,
            Comparison::Lt => z < self.threshold,
            Comparison::Le => z <= self.threshold,
        }
    }
}

impl FromStr for ZFilter {
    type Err = BoatError;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let rest = compact.strip_prefix('z').unwrap_or(&compact);
        let (op, num) = if let Some(r) = rest.strip_prefix(">=") {
            (Comparison::Ge, r)
        } else if let Some(r) = rest.strip_prefix("<=") {
            (Comparison::Le, r)
        } else if let Some(r) = rest.strip_prefix('>') {
            (Comparison::Gt, r)
        } else if let Some(r) = rest.strip_prefix('<') {
            (Comparison::Lt, r)
        } else {
            return Err(BoatError::Validation(format!("cannot parse z filter `{s}`")));
        };
        let threshold = num
            .parse::<f64>()
            .map_err(|_| BoatError::Validation(format!("bad threshold in z filter `{s}`")))?;
        Ok(ZFilter { op, threshold })
    }
}

fn center_scale(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    (m, if sd > 0.0 { sd } else { 1.0 })
}

/// Samples the discontinuity regression. Parameters are `alpha, beta1..beta3`
/// (plus `beta4` when `z` is present) and `sigma`.
pub fn fit_rdd(data: &RddDataset, priors: &PriorSpec, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    data.check_identified()?;
    let (y_center, y_scale) = center_scale(&data.y);
    let (_, x_scale) = center_scale(&data.assignment);
    let y: Vec<f64> = data.y.iter().map(|v| (v - y_center) / y_scale).collect();
    let x: Vec<f64> = data.assignment.iter().map(|v| (v - data.cutoff) / x_scale).collect();

    let mut design = DesignMatrix::without_covariates(data.unit_ids.clone(), data.treatment(), y)?.with_assignment(x)?;
    let mut z_ref = 0.0;
    let mut z_scale = 1.0;
    if let Some(z) = &data.z {
        let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(BoatError::Rank("adjustment covariate z is constant".into()));
        }
        z_ref = lo;
        z_scale = hi - lo;
        design = design.with_z(z.iter().map(|v| (v - lo) / z_scale).collect())?;
    }

    let mut samples = nuts::sample(&ModelSpec::rdd(0.0, priors.clone()), &design, cfg)?;
    let maps = samples
        .param_names
        .iter()
        .map(|name| match name.as_str() {
            "alpha" => UnitMap { offset: y_center, scale: y_scale },
            "beta1" | "beta3" => UnitMap::scale_only(y_scale / x_scale),
            "beta4" => UnitMap::scale_only(y_scale / z_scale),
            _ => UnitMap::scale_only(y_scale),
        })
        .collect();
    samples.apply_unit_maps(maps);
    samples.meta.insert("cutoff".into(), data.cutoff);
    samples.meta.insert("z_ref".into(), z_ref);
    samples.meta.insert("y_center".into(), y_center);
    samples.meta.insert("y_scale".into(), y_scale);
    samples.meta.insert("x_scale".into(), x_scale);
    samples.meta.insert("z_scale".into(), z_scale);
    Ok(samples)
}

/// Effect at the cutoff: the jump coefficient `beta2`, draw by draw.
pub fn ate_rdd(posterior: &PosteriorSamples) -> Result<ATEEstimate> {
    let draws = posterior.column("beta2")?;
    let mut est = ATEEstimate::from_draws(Estimand::AteRdd, draws)?;
    let map = posterior.unit_maps[posterior.param_index("beta2")?];
    if map.scale != 1.0 {
        let fitted = posterior.fitted_column("beta2")?;
        est.scaled = Some(ScaledEffect {
            point: fitted.iter().sum::<f64>() / fitted.len() as f64,
            interval: central_interval(&fitted, CREDIBLE_MASS),
            scale: map.scale,
        });
    }
    Ok(est)
}

/// Control and treated regression lines at the posterior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RddLines {
    pub x: Vec<f64>,
    pub y_control: Vec<f64>,
    pub y_treated: Vec<f64>,
    pub cutoff: f64,
    /// `y_treated − y_control` at the cutoff, i.e. the mean of `beta2`.
    pub gap_at_cutoff: f64,
}

impl RddLines {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y_control", "y_treated"])?;
        for i in 0..self.x.len() {
            w.write_record([
                format_float(self.x[i]),
                format_float(self.y_control[i]),
                format_float(self.y_treated[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates both lines at `xs` with `z` held at `z_fixed`.
///
/// Cutoff and `z` reference come from the posterior metadata (zero when
/// absent, e.g. for hand-built point masses).
pub fn predict_lines(posterior: &PosteriorSamples, xs: &[f64], z_fixed: f64) -> Result<RddLines> {
    let get = |name: &str| posterior.mean(name);
    let alpha = get("alpha")?;
    let b1 = get("beta1")?;
    let b2 = get("beta2")?;
    let b3 = get("beta3")?;
    let b4 = if posterior.param_index("beta4").is_ok() { get("beta4")? } else { 0.0 };
    let cutoff = posterior.meta.get("cutoff").copied().unwrap_or(0.0);
    let z_ref = posterior.meta.get("z_ref").copied().unwrap_or(0.0);
    let z_term = b4 * (z_fixed - z_ref);

    let mut y_control = Vec::with_capacity(xs.len());
    let mut y_treated = Vec::with_capacity(xs.len());
    for &x in xs {
        let d = x - cutoff;
        y_control.push(alpha + b1 * d + z_term);
        y_treated.push((alpha + b2) + (b1 + b3) * d + z_term);
    }
    Ok(RddLines { x: xs.to_vec(), y_control, y_treated, cutoff, gap_at_cutoff: b2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub bandwidth: f64,
    pub left_count: usize,
    pub right_count: usize,
    /// `right_count / left_count`.
    pub ratio: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// Default density-check half-window: a tenth of the assignment range.
pub fn default_bandwidth(assignment: &[f64]) -> f64 {
    let lo = assignment.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = assignment.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    DEFAULT_BANDWIDTH_FRACTION * (hi - lo)
}

/// Exact binomial test for bunching: counts in `(c−h, c)` against `[c, c+h)`
/// under a fair split.
pub fn density_continuity_check(assignment: &[f64], cutoff: f64, bandwidth: f64) -> Result<DensityReport> {
    if !(bandwidth > 0.0) {
        return Err(BoatError::Domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let left = assignment.iter().filter(|&&x| x > cutoff - bandwidth && x < cutoff).count();
    let right = assignment.iter().filter(|&&x| x >= cutoff && x < cutoff + bandwidth).count();
    let n = left + right;
    if n == 0 {
        return Err(BoatError::InsufficientData(format!(
            "no observations within {bandwidth} of the cutoff {cutoff}"
        )));
    }
    let binom = Binomial::new(0.5, n as u64).expect("valid binomial");
    let p_value = (2.0 * binom.cdf(left.min(right) as u64)).min(1.0);
    Ok(DensityReport {
        bandwidth,
        left_count: left,
        right_count: right,
        ratio: right as f64 / left as f64,
        p_value,
        pass: p_value >= DENSITY_ALPHA,
    })
}

/// Column names of the discontinuity CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RddColumns {
    pub unit: String,
    pub assignment: String,
    pub target: String,
    pub z: Option<String>,
    /// Optional observed treatment column, checked against the sharp rule.
    pub treatment: Option<String>,
}

impl Default for RddColumns {
    fn default() -> Self {
        RddColumns {
            unit: "unit_id".into(),
            assignment: "x".into(),
            target: "y".into(),
            z: None,
            treatment: None,
        }
    }
}

pub fn read_rdd_csv<P: AsRef<Path>>(path: P, cols: &RddColumns, cutoff: f64) -> Result<RddDataset> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BoatError::Schema(format!("missing column `{name}`")))
    };
    let (iu, ix, iy) = (idx(&cols.unit)?, idx(&cols.assignment)?, idx(&cols.target)?);
    let iz = cols.z.as_deref().map(idx).transpose()?;
    let it = cols.treatment.as_deref().map(idx).transpose()?;

    let (mut ids, mut xs, mut ys, mut zs, mut ts) = (vec![], vec![], vec![], vec![], vec![]);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| BoatError::Schema(format!("row {}: `{}` is not numeric", line + 2, &rec[i])))
        };
        ids.push(rec[iu].to_string());
        xs.push(num(ix)?);
        ys.push(num(iy)?);
        if let Some(i) = iz {
            zs.push(num(i)?);
        }
        if let Some(i) = it {
            ts.push(match num(i)? {
                v if v == 0.0 => 0u8,
                v if v == 1.0 => 1u8,
                v => return Err(BoatError::Schema(format!("row {}: treatment {v} is not 0/1", line + 2))),
            });
        }
    }
    let mut data = RddDataset::new(ids, xs, ys, cutoff)?;
    if iz.is_some() {
        data = data.with_z(zs)?;
    }
    if it.is_some() {
        data.check_sharp(&ts)?;
    }
    Ok(data)
}

pub fn write_rdd_csv<W: Write>(out: W, data: &RddDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["unit_id", "x", "y", "t"];
    if data.z.is_some() {
        header.push("z");
    }
    w.write_record(&header)?;
    let t = data.treatment();
    for i in 0..data.len() {
        let mut rec = vec![
            data.unit_ids[i].clone(),
            format_float(data.assignment[i]),
            format_float(data.y[i]),
            t[i].to_string(),
        ];
        if let Some(z) = &data.z {
            rec.push(format_float(z[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(xs: &[f64]) -> RddDataset {
        let ids = (0..xs.len()).map(|i| format!("u{i}")).collect();
        RddDataset::new(ids, xs.to_vec(), vec![0.0; xs.len()], 60.0).unwrap()
    }

    #[test]
    fn point_mass_effect() {
        let post = PosteriorSamples::point_mass(&["alpha", "beta1", "beta2", "beta3"], &[0.6, 0.0, -1.1954, 0.0]);
        assert_eq!(ate_rdd(&post).unwrap().point, -1.1954);
    }

    #[test]
    fn hand_mean_of_draws() {
        let post = PosteriorSamples::from_draws(
            vec!["beta2".into()],
            vec![vec![vec![-1.0], vec![-1.2], vec![-1.4]]],
        );
        assert!((ate_rdd(&post).unwrap().point + 1.2).abs() < 1e-12);
    }

    #[test]
    fn missing_jump_is_contract_error() {
        let post = PosteriorSamples::point_mass(&["alpha"], &[0.0]);
        assert!(matches!(ate_rdd(&post), Err(BoatError::Contract(_))));
    }

    #[test]
    fn hand_lines() {
        let mut post = PosteriorSamples::point_mass(&["alpha", "beta1", "beta2", "beta3"], &[1.0, 0.5, -1.0, 0.1]);
        post.meta.insert("cutoff".into(), 60.0);
        let l = predict_lines(&post, &[60.0, 62.0], 0.0).unwrap();
        assert!((l.y_control[1] - 2.0).abs() < 1e-12);
        assert!((l.y_treated[1] - 1.2).abs() < 1e-12);
        assert!((l.y_treated[0] - l.y_control[0] - l.gap_at_cutoff).abs() < 1e-12);
    }

    #[test]
    fn no_interaction_means_parallel_lines() {
        let post = PosteriorSamples::point_mass(&["alpha", "beta1", "beta2", "beta3"], &[1.0, 0.5, -1.0, 0.0]);
        let l = predict_lines(&post, &[0.0, 1.0], 0.0).unwrap();
        let sc = l.y_control[1] - l.y_control[0];
        let st = l.y_treated[1] - l.y_treated[0];
        assert!((sc - st).abs() < 1e-12);
    }

    #[test]
    fn balanced_counts_pass() {
        let xs: Vec<f64> = (0..50).map(|i| 55.0 + i as f64 * 0.1).chain((0..50).map(|i| 60.0 + i as f64 * 0.1)).collect();
        let r = density_continuity_check(&xs, 60.0, 10.0).unwrap();
        assert_eq!((r.left_count, r.right_count), (50, 50));
        assert_eq!(r.p_value, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn bunching_fails() {
        let xs: Vec<f64> = (0..40).map(|i| 60.0 + i as f64 * 0.01).chain([55.0, 57.0]).collect();
        let r = density_continuity_check(&xs, 60.0, 10.0).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn empty_window() {
        let r = density_continuity_check(&[0.0, 100.0], 60.0, 1.0);
        assert!(matches!(r, Err(BoatError::InsufficientData(_))));
        assert!(density_continuity_check(&[0.0], 60.0, 0.0).is_err());
    }

    #[test]
    fn one_sided_data_is_unidentified() {
        let cfg = SamplerConfig::new(50, 10, 1, 0);
        let r = fit_rdd(&dataset(&[1.0, 2.0, 3.0]), &PriorSpec::rdd_default(), &cfg);
        assert!(matches!(r, Err(BoatError::Identification(_))));
    }

    #[test]
    fn sharp_check() {
        let d = dataset(&[59.0, 60.0, 61.0]);
        assert!(d.check_sharp(&[0, 1, 1]).is_ok());
        assert!(matches!(d.check_sharp(&[0, 0, 1]), Err(BoatError::Contract(_))));
    }

    #[test]
    fn parse_filters() {
        let f: ZFilter = "z>90".parse().unwrap();
        assert_eq!(f, ZFilter { op: Comparison::Gt, threshold: 90.0 });
        let g: ZFilter = "z <= 40.5".parse().unwrap();
        assert_eq!(g.op, Comparison::Le);
        assert!(!f.keeps(90.0) && f.keeps(90.5));
        assert!("z ~ 3".parse::<ZFilter>().is_err());
    }

    #[test]
    fn filter_keeps_matching_rows() {
        let d = dataset(&[50.0, 70.0, 65.0]).with_z(vec![95.0, 80.0, 91.0]).unwrap();
        let f = d.filter_z(&"z>90".parse().unwrap()).unwrap();
        assert_eq!(f.unit_ids, vec!["u0", "u2"]);
    }
}
