//! Synthetic studies with known effects.
//!
//! Each scenario returns its data plus a truth record from which the effect
//! follows without fitting anything. All randomness comes from one seeded
//! ChaCha stream, so a spec always yields the same data.

use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, FixedOffset, TimeZone};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bdid::{write_panel_csv, PanelDataset, TrendPanel, PRE};
use crate::bpsm::Group;
use crate::brdd::{write_rdd_csv, RddDataset};
use crate::design::DesignMatrix;
use crate::error::{BoatError, Result};
use crate::pipeline::{write_trips_csv, DriveMode, TripRecord, UnitTable, DEFAULT_TIMEZONE, TARGET_COLUMN, TREATMENT_COLUMN};
use crate::prob::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ConfoundedPsm,
    SeasonalDid,
    CutoffRdd,
}

fn d_confound() -> f64 {
    0.0
}
fn d_cutoff() -> f64 {
    60.0
}
fn d_slope() -> f64 {
    0.5
}
fn d_noise() -> f64 {
    0.5
}
fn d_covariates() -> usize {
    3
}
fn d_group_offset() -> f64 {
    1.0
}
fn d_unit_sd() -> f64 {
    0.5
}
fn d_pre_periods() -> usize {
    3
}
fn d_intercept() -> f64 {
    2.0
}
fn d_range() -> (f64, f64) {
    (0.0, 120.0)
}

/// Generative knobs. Fields not used by a scenario are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n_control: usize,
    pub n_treated: usize,
    pub true_ate: f64,
    #[serde(default = "d_confound")]
    pub confound_strength: f64,
    #[serde(default)]
    pub seasonal_amplitude: f64,
    #[serde(default = "d_cutoff")]
    pub cutoff: f64,
    #[serde(default = "d_slope")]
    pub slope: f64,
    #[serde(default)]
    pub interaction_slope: f64,
    #[serde(default = "d_noise")]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
    /// Number of uniform covariates in the matching scenario.
    #[serde(default = "d_covariates")]
    pub n_covariates: usize,
    /// Baseline gap between treated and control units in the panel.
    #[serde(default = "d_group_offset")]
    pub group_offset: f64,
    /// Spread of persistent unit effects in the panel.
    #[serde(default = "d_unit_sd")]
    pub unit_sd: f64,
    /// Pre-intervention periods in the panel (the last one feeds the estimator).
    #[serde(default = "d_pre_periods")]
    pub pre_periods: usize,
    /// Common drift per period shared by both panel groups.
    #[serde(default)]
    pub common_trend: f64,
    /// Extra per-period drift of the treated group before the intervention.
    #[serde(default)]
    pub treated_pretrend: f64,
    /// Outcome level just left of the cutoff.
    #[serde(default = "d_intercept")]
    pub intercept: f64,
    /// Coefficient of the adjustment covariate `z ~ U[0, 100]`; zero omits `z`.
    #[serde(default)]
    pub z_effect: f64,
    #[serde(default = "d_range")]
    pub assignment_range: (f64, f64),
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n_control: usize, n_treated: usize, true_ate: f64, seed: u64) -> Self {
        ScenarioSpec {
            scenario,
            n_control,
            n_treated,
            true_ate,
            confound_strength: d_confound(),
            seasonal_amplitude: 0.0,
            cutoff: d_cutoff(),
            slope: d_slope(),
            interaction_slope: 0.0,
            noise_sd: d_noise(),
            seed,
            n_covariates: d_covariates(),
            group_offset: d_group_offset(),
            unit_sd: d_unit_sd(),
            pre_periods: d_pre_periods(),
            common_trend: 0.0,
            treated_pretrend: 0.0,
            intercept: d_intercept(),
            z_effect: 0.0,
            assignment_range: d_range(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_control < 2 || self.n_treated < 2 {
            return Err(BoatError::Validation("n_control and n_treated must be at least 2".into()));
        }
        if !(self.noise_sd > 0.0) {
            return Err(BoatError::Validation("noise_sd must be positive".into()));
        }
        if !(self.confound_strength >= 0.0) || !(self.seasonal_amplitude >= 0.0) || !(self.unit_sd >= 0.0) {
            return Err(BoatError::Validation(
                "confound_strength, seasonal_amplitude and unit_sd must be non-negative".into(),
            ));
        }
        match self.scenario {
            Scenario::ConfoundedPsm if self.n_covariates == 0 => {
                Err(BoatError::Validation("matching scenario needs at least one covariate".into()))
            }
            Scenario::SeasonalDid if self.pre_periods == 0 => {
                Err(BoatError::Validation("panel needs at least one pre period".into()))
            }
            Scenario::CutoffRdd => {
                let (lo, hi) = self.assignment_range;
                if !(lo < self.cutoff && self.cutoff < hi) {
                    return Err(BoatError::Validation(format!(
                        "cutoff {} must lie strictly inside the assignment range ({lo}, {hi})",
                        self.cutoff
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn expect(&self, scenario: Scenario) -> Result<()> {
        if self.scenario != scenario {
            return Err(BoatError::Validation(format!(
                "spec is for {:?}, not {scenario:?}",
                self.scenario
            )));
        }
        self.validate()
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(raw)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundedTruth {
    pub true_ate: f64,
    /// `e(x)` of each unit, in row order.
    pub true_propensity: Vec<f64>,
}

/// Covariates `x ~ U[0,1]^j`; `logit e(x) = logit(n_t/n) + 2s(x1 − ½)`;
/// `y = 1 + s·x1 + ½·x2 + ate·t + ε`.
///
/// Units are drawn until both group sizes are met; draws landing in a group
/// that is already full are discarded.
pub fn simulate_confounded(spec: &ScenarioSpec) -> Result<(DesignMatrix, ConfoundedTruth)> {
    spec.expect(Scenario::ConfoundedPsm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).expect("positive sd");
    let n = spec.n_control + spec.n_treated;
    let j = spec.n_covariates;
    let base = (spec.n_treated as f64 / spec.n_control as f64).ln();
    let s = spec.confound_strength;

    let mut rows: Vec<(Vec<f64>, u8, f64, f64)> = Vec::with_capacity(n);
    let (mut nc, mut nt) = (0, 0);
    let mut attempts = 0usize;
    while nc < spec.n_control || nt < spec.n_treated {
        attempts += 1;
        if attempts > 10_000 * n {
            return Err(BoatError::Validation("confounding too strong to fill both groups".into()));
        }
        let x: Vec<f64> = (0..j).map(|_| rng.random::<f64>()).collect();
        let e = sigmoid(base + 2.0 * s * (x[0] - 0.5));
        let t = u8::from(rng.random::<f64>() < e);
        let eps = noise.sample(&mut rng);
        if t == 1 && nt < spec.n_treated {
            nt += 1;
        } else if t == 0 && nc < spec.n_control {
            nc += 1;
        } else {
            continue;
        }
        let x2 = x.get(1).copied().unwrap_or(0.0);
        let y = 1.0 + s * x[0] + 0.5 * x2 + spec.true_ate * t as f64 + eps;
        rows.push((x, t, y, e));
    }

    let mut x = Array2::zeros((n, j));
    for (i, r) in rows.iter().enumerate() {
        for (k, v) in r.0.iter().enumerate() {
            x[[i, k]] = *v;
        }
    }
    let design = DesignMatrix::new(
        (0..n).map(|i| format!("u{i:04}")).collect(),
        (1..=j).map(|k| format!("x{k}")).collect(),
        x,
        rows.iter().map(|r| r.1).collect(),
        rows.iter().map(|r| r.2).collect(),
    )?;
    let truth = ConfoundedTruth {
        true_ate: spec.true_ate,
        true_propensity: rows.iter().map(|r| r.3).collect(),
    };
    Ok((design, truth))
}

/// Covariates, `target` and `treatment` as a unit table.
pub fn design_to_table(d: &DesignMatrix) -> UnitTable {
    let mut columns = d.covariate_names.clone();
    columns.push(TARGET_COLUMN.into());
    columns.push(TREATMENT_COLUMN.into());
    let k = d.n_covariates();
    let raw = d.unscaled_x();
    let mut values = Array2::zeros((d.len(), k + 2));
    values.slice_mut(ndarray::s![.., ..k]).assign(&raw);
    for i in 0..d.len() {
        values[[i, k]] = d.y[i];
        values[[i, k + 1]] = d.treatment[i] as f64;
    }
    UnitTable {
        unit_ids: d.unit_ids.clone(),
        columns,
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalTruth {
    pub true_ate: f64,
    /// Common shift between the last pre period and the post period.
    pub seasonal_shift: f64,
    pub group_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalStudy {
    pub panel: PanelDataset,
    /// Outcomes at earlier pre periods (`τ < −1`), one vector per period.
    pub history: Vec<(i64, Vec<f64>)>,
    /// Every pre period including `τ = −1`, split by group.
    pub pre_trend: TrendPanel,
    pub truth: SeasonalTruth,
}

/// `y_iτ = 10 + offset·t + u_i + trend·τ + pretrend·τ·t + [τ=1](A + ate·t) + ε`
/// over `τ ∈ {−P, …, −1, 1}`. Controls come first.
pub fn simulate_seasonal_panel(spec: &ScenarioSpec) -> Result<SeasonalStudy> {
    spec.expect(Scenario::SeasonalDid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).expect("positive sd");
    let unit = Normal::new(0.0, spec.unit_sd).expect("non-negative sd");
    let n = spec.n_control + spec.n_treated;
    let periods: Vec<i64> = (1..=spec.pre_periods as i64).rev().map(|p| -p).chain([1]).collect();

    let group: Vec<Group> = (0..n)
        .map(|i| if i < spec.n_control { Group::Control } else { Group::Treatment })
        .collect();
    let mut y = vec![vec![0.0; n]; periods.len()];
    for i in 0..n {
        let t = group[i].indicator() as f64;
        let u = unit.sample(&mut rng);
        for (k, &tau) in periods.iter().enumerate() {
            let post = if tau > 0 { 1.0 } else { 0.0 };
            let tau = tau as f64;
            y[k][i] = 10.0
                + spec.group_offset * t
                + u
                + spec.common_trend * tau
                + spec.treated_pretrend * tau * t
                + post * (spec.seasonal_amplitude + spec.true_ate * t)
                + noise.sample(&mut rng);
        }
    }

    let ids = (0..n).map(|i| format!("u{i:04}")).collect();
    let last = periods.len() - 1;
    let panel = PanelDataset::new(ids, group.clone(), y[last - 1].clone(), y[last].clone())?;
    let history = periods[..last - 1].iter().zip(&y).map(|(&tau, ys)| (tau, ys.clone())).collect();
    let split = |ys: &Vec<f64>, g: Group| ys.iter().zip(&group).filter(|(_, gg)| **gg == g).map(|(v, _)| *v).collect();
    let pre_trend = TrendPanel {
        times: periods[..last].iter().map(|&t| t as f64).collect(),
        control: y[..last].iter().map(|ys| split(ys, Group::Control)).collect(),
        treatment: y[..last].iter().map(|ys| split(ys, Group::Treatment)).collect(),
    };
    debug_assert_eq!(periods[last - 1], PRE);
    Ok(SeasonalStudy {
        panel,
        history,
        pre_trend,
        truth: SeasonalTruth {
            true_ate: spec.true_ate,
            seasonal_shift: spec.seasonal_amplitude + spec.common_trend * 2.0,
            group_offset: spec.group_offset,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityTruth {
    pub true_ate: f64,
    pub intercept: f64,
    pub slope: f64,
    pub interaction_slope: f64,
    pub z_effect: f64,
    pub cutoff: f64,
}

impl DiscontinuityTruth {
    /// Noise-free outcome at `x` (and `z`).
    pub fn mean_outcome(&self, x: f64, z: f64) -> f64 {
        let d = x - self.cutoff;
        let t = if x >= self.cutoff { 1.0 } else { 0.0 };
        self.intercept + self.slope * d + self.true_ate * t + self.interaction_slope * d * t + self.z_effect * z
    }

    pub fn gap_at_cutoff(&self) -> f64 {
        // the control line reaches `intercept` at the cutoff
        self.mean_outcome(self.cutoff, 0.0) - self.intercept
    }
}

/// `n_control` units with `x ~ U[lo, c)` and `n_treated` with `x ~ U[c, hi)`;
/// `y = a + slope(x−c) + ate·t + inter(x−c)t + β4·z + ε`, `z ~ U[0, 100]`.
pub fn simulate_discontinuity(spec: &ScenarioSpec) -> Result<(RddDataset, DiscontinuityTruth)> {
    spec.expect(Scenario::CutoffRdd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).expect("positive sd");
    let (lo, hi) = spec.assignment_range;
    let c = spec.cutoff;
    let truth = DiscontinuityTruth {
        true_ate: spec.true_ate,
        intercept: spec.intercept,
        slope: spec.slope,
        interaction_slope: spec.interaction_slope,
        z_effect: spec.z_effect,
        cutoff: c,
    };
    let n = spec.n_control + spec.n_treated;
    let (mut xs, mut ys, mut zs) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let x = if i < spec.n_control { rng.random_range(lo..c) } else { rng.random_range(c..hi) };
        let z = rng.random_range(0.0..100.0);
        xs.push(x);
        zs.push(z);
        ys.push(truth.mean_outcome(x, z) + noise.sample(&mut rng));
    }
    let mut data = RddDataset::new((0..n).map(|i| format!("u{i:04}")).collect(), xs, ys, c)?;
    if spec.z_effect != 0.0 {
        data = data.with_z(zs)?;
    }
    Ok((data, truth))
}

fn d_trips() -> usize {
    40
}

/// Trip-level fleet telemetry for the vehicle pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    pub n_control: usize,
    pub n_treated: usize,
    #[serde(default = "d_trips")]
    pub trips_per_vehicle: usize,
    /// Change in fuel grams per km caused by the treatment.
    pub true_effect_g_per_km: f64,
    #[serde(default)]
    pub seed: u64,
    /// Fraction of trips made to violate the cleaning rules.
    #[serde(default)]
    pub dirty_fraction: f64,
}

/// Generates trips between 19 Oct 2020 and 28 Feb 2021, local time.
///
/// Each vehicle gets its own habits (trip length, hybrid share, trailer use,
/// base consumption); treated vehicles burn `true_effect_g_per_km` more.
pub fn simulate_fleet_trips(spec: &FleetSpec) -> Result<Vec<TripRecord>> {
    if spec.n_control == 0 || spec.n_treated == 0 || spec.trips_per_vehicle == 0 {
        return Err(BoatError::Validation("fleet needs vehicles in both groups and trips".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit: Normal<f64> = Normal::new(0.0, 1.0).expect("unit normal");
    let start: DateTime<FixedOffset> = DEFAULT_TIMEZONE
        .with_ymd_and_hms(2020, 10, 19, 0, 0, 0)
        .single()
        .expect("unambiguous start")
        .fixed_offset();
    let window_min = 132 * 24 * 60;
    let n = spec.n_control + spec.n_treated;
    let mut trips = Vec::with_capacity(n * spec.trips_per_vehicle);
    for v in 0..n {
        let group = if v < spec.n_control { Group::Control } else { Group::Treatment };
        let typical_km: f64 = rng.random_range(5.0..40.0);
        let hybrid_p = rng.random_range(0.6..1.0);
        let trailer_p = rng.random_range(0.0..0.1);
        let base_rate = 25.0 + 5.0 * unit.sample(&mut rng) + 0.2 * typical_km;
        let base_temp: f64 = rng.random_range(-5.0..10.0);
        let mut odometer = rng.random_range(500.0..40_000.0);
        let mut offsets: Vec<i64> = (0..spec.trips_per_vehicle).map(|_| rng.random_range(0..window_min)).collect();
        offsets.sort_unstable();
        for off in offsets {
            let distance = (typical_km * (0.3 * unit.sample(&mut rng)).exp()).max(0.5);
            let speed = rng.random_range(25.0..95.0);
            let duration_s = (distance / speed * 3600.0).round().max(60.0);
            let t0 = start + Duration::minutes(off);
            let t1 = t0 + Duration::seconds(duration_s as i64);
            let soc_start: f64 = rng.random_range(10.0..100.0);
            let soc_end = (soc_start - distance * rng.random_range(0.5..2.0)).max(0.0);
            let rate = base_rate + spec.true_effect_g_per_km * group.indicator() as f64 + 2.0 * unit.sample(&mut rng);
            let mut trip = TripRecord {
                vehicle_id: format!("veh{v:03}"),
                start_time: t0,
                end_time: t1,
                distance_km: (distance * 1000.0).round() / 1000.0,
                duration_h: duration_s / 3600.0,
                fuel_g: Some((distance * rate.max(0.0) * 10.0).round() / 10.0),
                energy_wh: Some((distance * rng.random_range(120.0..220.0)).round()),
                soc_start_pct: (soc_start * 10.0_f64).round() / 10.0,
                soc_end_pct: (soc_end * 10.0_f64).round() / 10.0,
                ambient_temp_c: ((base_temp + 4.0 * unit.sample(&mut rng)) * 10.0).round() / 10.0,
                engine_starts: rng.random_range(0..4),
                trailer: rng.random::<f64>() < trailer_p,
                drive_mode: if rng.random::<f64>() < hybrid_p { DriveMode::Hybrid } else { DriveMode::Electric },
                odometer_km: (odometer * 10.0_f64).round() / 10.0,
                max_speed_kmh: (speed * rng.random_range(1.2..1.8)).round(),
                group,
            };
            odometer += distance;
            if rng.random::<f64>() < spec.dirty_fraction {
                if rng.random::<bool>() {
                    trip.odometer_km = rng.random_range(0.0..99.0_f64).round();
                } else {
                    // teleporting car: 1 km in 10 s
                    trip.distance_km = 250.0 * trip.duration_h + 1.0;
                }
            }
            trips.push(trip);
        }
    }
    Ok(trips)
}

/// Any simulated study, ready to be written to disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Study {
    Confounded(DesignMatrix, ConfoundedTruth),
    Seasonal(SeasonalStudy),
    Discontinuity(RddDataset, DiscontinuityTruth),
}

pub fn simulate(spec: &ScenarioSpec) -> Result<Study> {
    Ok(match spec.scenario {
        Scenario::ConfoundedPsm => {
            let (d, t) = simulate_confounded(spec)?;
            Study::Confounded(d, t)
        }
        Scenario::SeasonalDid => Study::Seasonal(simulate_seasonal_panel(spec)?),
        Scenario::CutoffRdd => {
            let (d, t) = simulate_discontinuity(spec)?;
            Study::Discontinuity(d, t)
        }
    })
}

impl Study {
    /// Writes `data.csv` in the schema the matching loaders read, plus
    /// `truth.json`. Returns the files written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let data = dir.join("data.csv");
        let truth = dir.join("truth.json");
        let file = File::create(&data)?;
        let truth_json = match self {
            Study::Confounded(d, t) => {
                design_to_table(d).write_csv(file)?;
                serde_json::to_string_pretty(t)?
            }
            Study::Seasonal(s) => {
                write_panel_csv(file, &s.panel, Some(&s.history))?;
                serde_json::to_string_pretty(&s.truth)?
            }
            Study::Discontinuity(d, t) => {
                write_rdd_csv(file, d)?;
                serde_json::to_string_pretty(t)?
            }
        };
        std::fs::write(&truth, truth_json + "\n")?;
        Ok(vec![data, truth])
    }
}

/// Writes a fleet's trips as `trips.csv`.
pub fn write_fleet(dir: &Path, trips: &[TripRecord]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("trips.csv");
    write_trips_csv(File::create(&path)?, trips)?;
    Ok(path)
}
