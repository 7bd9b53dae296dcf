//! The `boat` command line: argument parsing, the run loop and its files.
//!
//! Every model subcommand writes `summary.json`, `draws.csv`, `report.json`
//! and `plot_data.csv` (plus `matches.csv` for matching) into `--out` and
//! nowhere else. Failures print one JSON object on stderr and exit nonzero.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono_tz::Tz;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::advisor::{advise, Answers, Recommendation};
use crate::bdid::{self, read_panel_csv, PanelColumns, TrendReport, TrendTolerance};
use crate::bpsm::{self, Group, MatchResult};
use crate::brdd::{self, read_rdd_csv, RddColumns, ZFilter};
use crate::error::{BoatError, Result};
use crate::estimate::ATEEstimate;
use crate::nuts::{format_float, summarize, ChainStats, ParamSummary, PosteriorSamples, SamplerConfig};
use crate::pipeline::{
    aggregate_to_vehicle, build_design, filter_trips, ingest_trips_path, DiscardReason, Exclusion, Reject, Roles,
    TargetSpec, UnitTable, VEHICLE_COVARIATES,
};
use crate::prob::{NoisePrior, PriorSpec};
use crate::simulator::{simulate, simulate_fleet_trips, write_fleet, FleetSpec, ScenarioSpec};

/// Schema tag carried by every JSON file the CLI writes.
pub const SCHEMA: &str = "boat/1";
/// A run counts as converged when every R̂ is below this.
pub const RHAT_THRESHOLD: f64 = 1.1;
/// Histogram bins of the positivity check.
pub const POSITIVITY_BINS: usize = 10;

#[derive(Debug, Clone, Parser)]
#[command(name = "boat", version, about = "Bayesian causal inference for staged software rollouts")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Propensity-score matching on a unit table or raw trip telemetry.
    Bpsm(BpsmArgs),
    /// Difference-in-differences on a two-period panel.
    Bdid(BdidArgs),
    /// Sharp regression discontinuity.
    Brdd(BrddArgs),
    /// Write a synthetic study with known effect.
    Simulate(SimulateArgs),
    /// Recommend a design from yes/no answers.
    Advise(AdviseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Iterations per chain, warm-up included.
    #[arg(long, default_value_t = 3000)]
    pub draws: usize,
    #[arg(long, default_value_t = 200)]
    pub warmup: usize,
    #[arg(long, default_value_t = 2)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    #[arg(long, default_value_t = 10)]
    pub max_tree_depth: usize,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        SamplerConfig {
            target_accept: self.target_accept,
            max_tree_depth: self.max_tree_depth,
            ..SamplerConfig::new(self.draws, self.warmup, self.chains, self.seed)
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct PriorArgs {
    /// Standard deviation of the intercept's normal prior.
    #[arg(long)]
    pub prior_alpha: Option<f64>,
    /// Standard deviation of every coefficient's normal prior.
    #[arg(long)]
    pub prior_beta: Option<f64>,
    /// Half-Cauchy scale of the noise prior (linear models only).
    #[arg(long)]
    pub prior_sigma: Option<f64>,
}

impl PriorArgs {
    pub fn apply(&self, mut base: PriorSpec) -> Result<PriorSpec> {
        if let Some(a) = self.prior_alpha {
            base.alpha_scale = a;
        }
        if let Some(b) = self.prior_beta {
            base.beta_scales = vec![b];
        }
        if let Some(s) = self.prior_sigma {
            if base.noise_prior == NoisePrior::None {
                return Err(BoatError::Validation("--prior-sigma: this model has no noise term".into()));
            }
            base.noise_prior = NoisePrior::HalfCauchy { scale: s };
        }
        Ok(base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Matching {
    Caliper,
    Nearest,
}

#[derive(Debug, Clone, Args)]
pub struct BpsmArgs {
    /// Unit table (first column = id) or trips CSV; trips are detected by header.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated covariate columns (default for trips: all vehicle covariates).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long, default_value = "target")]
    pub target: String,
    #[arg(long = "treatment-col", default_value = "treatment")]
    pub treatment_col: String,
    #[arg(long, default_value_t = bpsm::DEFAULT_CALIPER)]
    pub caliper: f64,
    #[arg(long, value_enum, default_value_t = Matching::Caliper)]
    pub matching: Matching,
    /// Vehicle outcome built from trips: fuel_per_km or energy_per_km.
    #[arg(long, default_value = "fuel_per_km")]
    pub metric: String,
    /// Timezone for offset-less trip timestamps and weekday counting.
    #[arg(long, default_value = "Europe/Stockholm")]
    pub timezone: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub priors: PriorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BdidArgs {
    /// Long panel CSV: one row per unit and period.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "unit-col", default_value = "unit_id")]
    pub unit_col: String,
    /// Column holding control/treatment.
    #[arg(long = "treatment-col", default_value = "group")]
    pub treatment_col: String,
    /// Column holding pre/post or an integer period.
    #[arg(long = "period-col", default_value = "period")]
    pub period_col: String,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Allowed pre-period slope gap as a multiple of the pooled std.
    #[arg(long, default_value_t = 0.25)]
    pub trend_tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub priors: PriorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BrddArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "unit-col", default_value = "unit_id")]
    pub unit_col: String,
    #[arg(long = "assignment-col", default_value = "x")]
    pub assignment_col: String,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long = "z-col")]
    pub z_col: Option<String>,
    /// Observed treatment column, checked against the cutoff rule.
    #[arg(long = "treatment-col")]
    pub treatment_col: Option<String>,
    #[arg(long)]
    pub cutoff: f64,
    /// Keep rows matching e.g. "z>90".
    #[arg(long = "z-filter")]
    pub z_filter: Option<String>,
    /// Half-window of the density check (default: a tenth of the range).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub priors: PriorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario JSON (confounded_psm, seasonal_did or cutoff_rdd).
    #[arg(long, conflicts_with = "fleet", required_unless_present = "fleet")]
    pub spec: Option<PathBuf>,
    /// Fleet JSON for raw trip telemetry.
    #[arg(long)]
    pub fleet: Option<PathBuf>,
    /// Overrides the seed in the JSON.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn yes_no(raw: &str) -> std::result::Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "yes" | "y" | "true" => Ok(true),
        "no" | "n" | "false" => Ok(false),
        _ => Err(format!("expected yes or no, got `{raw}`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct AdviseArgs {
    #[arg(long, value_parser = yes_no)]
    pub randomizable: Option<bool>,
    #[arg(long = "covariates-known", value_parser = yes_no)]
    pub covariates_known: Option<bool>,
    #[arg(long = "multiple-covariates", value_parser = yes_no)]
    pub multiple_covariates: Option<bool>,
    #[arg(long = "continuous-dominant", value_parser = yes_no)]
    pub continuous_dominant: Option<bool>,
    #[arg(long = "latent", value_parser = yes_no)]
    pub latent: Option<bool>,
    /// Also write advice.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl AdviseArgs {
    pub fn answers(&self) -> Answers {
        Answers {
            randomizable: self.randomizable,
            covariates_known: self.covariates_known,
            multiple_covariates: self.multiple_covariates,
            continuous_dominant_covariate: self.continuous_dominant,
            latent_inference_needed: self.latent,
        }
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// Text for stdout, if any.
    pub stdout: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a, X: Serialize> {
    schema: &'static str,
    command: &'static str,
    n_observations: usize,
    sampler: &'a SamplerConfig,
    priors: &'a PriorSpec,
    converged: bool,
    rhat_threshold: f64,
    max_rhat: f64,
    divergences: usize,
    parameters: Vec<ParamSummary>,
    chains: &'a [ChainStats],
    effect: ATEEstimate,
    details: X,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct Report<X: Serialize> {
    schema: &'static str,
    command: &'static str,
    #[serde(flatten)]
    checks: X,
}

fn without_draws(mut e: ATEEstimate) -> ATEEstimate {
    e.draws = None;
    e
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.dir.join(name);
        write_json(&p, value)?;
        self.files.push(p);
        Ok(())
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(File) -> Result<()>) -> Result<()> {
        let p = self.dir.join(name);
        write(File::create(&p)?)?;
        self.files.push(p);
        Ok(())
    }

    fn finish(self) -> RunOutcome {
        RunOutcome { files: self.files, stdout: None }
    }
}

#[allow(clippy::too_many_arguments)]
fn write_fit<D: Serialize, R: Serialize>(
    out: &mut Artifacts,
    command: &'static str,
    cfg: &SamplerConfig,
    priors: &PriorSpec,
    post: &PosteriorSamples,
    effect: ATEEstimate,
    details: D,
    report: R,
) -> Result<()> {
    let summary = Summary {
        schema: SCHEMA,
        command,
        n_observations: post.n_observations,
        sampler: cfg,
        priors,
        converged: post.converged(RHAT_THRESHOLD),
        rhat_threshold: RHAT_THRESHOLD,
        max_rhat: post.max_rhat(),
        divergences: post.total_divergences(),
        parameters: summarize(post),
        chains: &post.chain_stats,
        effect: without_draws(effect),
        details,
        warnings: &post.warnings,
    };
    out.json("summary.json", &summary)?;
    out.csv("draws.csv", |f| post.write_csv(f))?;
    out.json("report.json", &Report { schema: SCHEMA, command, checks: report })
}

fn is_trips_file(path: &Path) -> Result<bool> {
    let mut rdr = csv::Reader::from_path(path)?;
    let h = rdr.headers()?;
    Ok(h.iter().any(|c| c == "start_time") && h.iter().any(|c| c == "vehicle_id"))
}

#[derive(Serialize)]
struct TripIntake {
    rejected_rows: Vec<Reject>,
    discarded_new_vehicle: usize,
    discarded_speed: usize,
    kept_trips: usize,
    excluded_vehicles: Vec<Exclusion>,
}

fn load_trips_table(args: &BpsmArgs) -> Result<(UnitTable, TripIntake)> {
    let tz: Tz = args
        .timezone
        .parse()
        .map_err(|_| BoatError::Validation(format!("unknown timezone `{}`", args.timezone)))?;
    let metric: TargetSpec = args.metric.parse()?;
    let ingested = ingest_trips_path(&args.data, tz)?;
    let filtered = filter_trips(ingested.trips);
    let count = |r: DiscardReason| filtered.discarded.iter().filter(|(_, d)| *d == r).count();
    let agg = aggregate_to_vehicle(&filtered.kept, metric, tz);
    let intake = TripIntake {
        rejected_rows: ingested.rejects,
        discarded_new_vehicle: count(DiscardReason::NewVehicle),
        discarded_speed: count(DiscardReason::Speed),
        kept_trips: filtered.kept.len(),
        excluded_vehicles: agg.excluded,
    };
    Ok((UnitTable::from_aggregates(&agg.vehicles), intake))
}

fn run_bpsm(a: &BpsmArgs) -> Result<RunOutcome> {
    let (table, intake, mut covariates) = if is_trips_file(&a.data)? {
        let (t, i) = load_trips_table(a)?;
        (t, Some(i), VEHICLE_COVARIATES.iter().map(|c| c.to_string()).collect())
    } else {
        (UnitTable::read_csv_path(&a.data)?, None, Vec::new())
    };
    if !a.covariates.is_empty() {
        covariates = a.covariates.clone();
    }
    if covariates.is_empty() {
        return Err(BoatError::Validation("--covariates is required for a unit table".into()));
    }
    let roles = Roles {
        target: if intake.is_some() { "target".into() } else { a.target.clone() },
        treatment: if intake.is_some() { "treatment".into() } else { a.treatment_col.clone() },
        ..Roles::default()
    };
    let design = build_design(&table, &covariates, &roles)?;
    let cfg = a.sampler.config();
    let priors = a.priors.apply(PriorSpec::logistic_default())?;

    let post = bpsm::fit_propensity(&design, &priors, &cfg)?;
    let scores = bpsm::propensity_scores(&post, &design, 0, cfg.seed)?;
    let matches = match a.matching {
        Matching::Caliper => bpsm::caliper_match(&scores, a.caliper)?,
        Matching::Nearest => bpsm::nn_match_1to1(&scores)?,
    };
    let effect = bpsm::ate_psm(&matches, &design.y)?;
    let naive = bpsm::naive_ate(&design, &design.y)?;

    #[derive(Serialize)]
    struct Details {
        naive_ate: ATEEstimate,
        n_pairs: usize,
        n_treated: usize,
        n_control: usize,
        covariates: Vec<String>,
    }
    #[derive(Serialize)]
    struct Checks {
        balance: Vec<bpsm::CovariateBalance>,
        positivity: bpsm::PositivityReport,
        unmatched_treated: Vec<String>,
        mean_distance: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        trips: Option<TripIntake>,
    }
    let details = Details {
        naive_ate: without_draws(naive),
        n_pairs: matches.pairs.len(),
        n_treated: design.n_treated(),
        n_control: design.len() - design.n_treated(),
        covariates,
    };
    let checks = Checks {
        balance: bpsm::balance_report(&matches, &design)?,
        positivity: bpsm::positivity_check(&scores, POSITIVITY_BINS)?,
        unmatched_treated: matches.unmatched_treated.iter().map(|&i| design.unit_ids[i].clone()).collect(),
        mean_distance: matches.mean_distance(),
        trips: intake,
    };

    let mut out = Artifacts::new(&a.out)?;
    write_fit(&mut out, "bpsm", &cfg, &priors, &post, effect, details, checks)?;
    out.csv("matches.csv", |f| matches.write_csv(f))?;
    out.csv("plot_data.csv", |f| write_score_plot(f, &scores, &matches))?;
    Ok(out.finish())
}

fn write_score_plot(f: File, scores: &bpsm::PropensityScores, matches: &MatchResult) -> Result<()> {
    let mut matched = vec![false; scores.unit_ids.len()];
    for p in &matches.pairs {
        matched[p.treated] = true;
        matched[p.control] = true;
    }
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["unit_id", "group", "score", "matched"])?;
    for i in 0..scores.unit_ids.len() {
        w.write_record([
            scores.unit_ids[i].as_str(),
            scores.group[i].as_str(),
            &format_float(scores.mean_score[i]),
            if matched[i] { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_bdid(a: &BdidArgs) -> Result<RunOutcome> {
    let cols = PanelColumns {
        unit: a.unit_col.clone(),
        group: a.treatment_col.clone(),
        period: a.period_col.clone(),
        target: a.target.clone(),
        covariates: a.covariates.clone(),
    };
    let file = read_panel_csv(&a.data, &cols)?;
    let cfg = a.sampler.config();
    let priors = a.priors.apply(PriorSpec::did_default())?;
    let post = bdid::fit_did(&file.panel, &priors, &cfg)?;
    let effect = bdid::ate_did(&post)?;
    let means = file.panel.cell_means();

    #[derive(Serialize)]
    struct Details {
        cell_means: bdid::CellMeans,
        closed_form_ate: f64,
        n_units: usize,
    }
    #[derive(Serialize)]
    struct Checks {
        parallel_trend: Option<TrendReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        parallel_trend_skipped: Option<String>,
    }
    let checks = match &file.pre_trend {
        Some(tp) => Checks {
            parallel_trend: Some(bdid::parallel_trend_check(tp, TrendTolerance::RelativeToPooledStd(a.trend_tolerance))?),
            parallel_trend_skipped: None,
        },
        None => Checks {
            parallel_trend: None,
            parallel_trend_skipped: Some("fewer than two pre-intervention periods".into()),
        },
    };
    let details = Details { cell_means: means, closed_form_ate: means.ate(), n_units: file.panel.len() };

    let mut out = Artifacts::new(&a.out)?;
    write_fit(&mut out, "bdid", &cfg, &priors, &post, effect, details, checks)?;
    out.csv("plot_data.csv", |f| write_trajectories(f, &file))?;
    Ok(out.finish())
}

fn write_trajectories(f: File, file: &bdid::PanelFile) -> Result<()> {
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["period", "group", "mean_y", "n"])?;
    let mut rows: Vec<(f64, &Vec<f64>, &Vec<f64>)> = Vec::new();
    let post_split = |g: Group| -> Vec<f64> {
        file.panel.y_post.iter().zip(&file.panel.group).filter(|(_, gg)| **gg == g).map(|(y, _)| *y).collect()
    };
    let pre_split = |g: Group| -> Vec<f64> {
        file.panel.y_pre.iter().zip(&file.panel.group).filter(|(_, gg)| **gg == g).map(|(y, _)| *y).collect()
    };
    let (pre_c, pre_t) = (pre_split(Group::Control), pre_split(Group::Treatment));
    let (post_c, post_t) = (post_split(Group::Control), post_split(Group::Treatment));
    match &file.pre_trend {
        Some(tp) => {
            for k in 0..tp.times.len() {
                rows.push((tp.times[k], &tp.control[k], &tp.treatment[k]));
            }
        }
        None => rows.push((bdid::PRE as f64, &pre_c, &pre_t)),
    }
    rows.push((bdid::POST as f64, &post_c, &post_t));
    for (tau, c, t) in rows {
        for (g, ys) in [(Group::Control, c), (Group::Treatment, t)] {
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            w.write_record([format_float(tau), g.as_str().into(), format_float(m), ys.len().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run_brdd(a: &BrddArgs) -> Result<RunOutcome> {
    let cols = RddColumns {
        unit: a.unit_col.clone(),
        assignment: a.assignment_col.clone(),
        target: a.target.clone(),
        z: a.z_col.clone(),
        treatment: a.treatment_col.clone(),
    };
    let mut data = read_rdd_csv(&a.data, &cols, a.cutoff)?;
    let n_read = data.len();
    if let Some(expr) = &a.z_filter {
        let filter: ZFilter = expr.parse()?;
        data = data.filter_z(&filter)?;
    }
    let cfg = a.sampler.config();
    let priors = a.priors.apply(PriorSpec::rdd_default())?;
    let post = brdd::fit_rdd(&data, &priors, &cfg)?;
    let effect = brdd::ate_rdd(&post)?;
    let bandwidth = a.bandwidth.unwrap_or_else(|| brdd::default_bandwidth(&data.assignment));

    let lo = data.assignment.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.assignment.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut grid: Vec<f64> = (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect();
    grid.push(a.cutoff);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let z_fixed = data.z.as_ref().map_or(0.0, |z| z.iter().sum::<f64>() / z.len() as f64);
    let lines = brdd::predict_lines(&post, &grid, z_fixed)?;

    #[derive(Serialize)]
    struct Details {
        cutoff: f64,
        rows_read: usize,
        rows_used: usize,
        z_filter: Option<String>,
        z_fixed_for_lines: f64,
    }
    #[derive(Serialize)]
    struct Checks {
        density: std::result::Result<brdd::DensityReport, String>,
    }
    let density = brdd::density_continuity_check(&data.assignment, a.cutoff, bandwidth).map_err(|e| e.to_string());
    let details = Details {
        cutoff: a.cutoff,
        rows_read: n_read,
        rows_used: data.len(),
        z_filter: a.z_filter.clone(),
        z_fixed_for_lines: z_fixed,
    };

    let mut out = Artifacts::new(&a.out)?;
    write_fit(&mut out, "brdd", &cfg, &priors, &post, effect, details, Checks { density })?;
    out.csv("plot_data.csv", |f| lines.write_csv(f))?;
    Ok(out.finish())
}

fn run_simulate(a: &SimulateArgs) -> Result<RunOutcome> {
    if let Some(path) = &a.fleet {
        let mut spec: FleetSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let Some(seed) = a.seed {
            spec.seed = seed;
        }
        let trips = simulate_fleet_trips(&spec)?;
        let data = write_fleet(&a.out, &trips)?;
        let truth = a.out.join("truth.json");
        write_json(&truth, &serde_json::json!({ "schema": SCHEMA, "fleet": spec }))?;
        return Ok(RunOutcome { files: vec![data, truth], stdout: None });
    }
    let path = a.spec.as_ref().ok_or_else(|| BoatError::Validation("--spec or --fleet is required".into()))?;
    let mut spec = ScenarioSpec::from_json(&std::fs::read_to_string(path)?)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let files = simulate(&spec)?.write_to(&a.out)?;
    Ok(RunOutcome { files, stdout: None })
}

#[derive(Serialize)]
struct Advice {
    schema: &'static str,
    recommendation: Recommendation,
    label: &'static str,
    rationale: &'static str,
    answers: Answers,
}

fn run_advise(a: &AdviseArgs) -> Result<RunOutcome> {
    let answers = a.answers();
    let rec = advise(&answers)?;
    let advice = Advice {
        schema: SCHEMA,
        recommendation: rec,
        label: rec.as_str(),
        rationale: rec.rationale(),
        answers,
    };
    let text = serde_json::to_string_pretty(&advice)?;
    let mut files = Vec::new();
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        let p = dir.join("advice.json");
        write_json(&p, &advice)?;
        files.push(p);
    }
    Ok(RunOutcome { files, stdout: Some(text) })
}

/// Executes one parsed command.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    match &cfg.command {
        Command::Bpsm(a) => run_bpsm(a),
        Command::Bdid(a) => run_bdid(a),
        Command::Brdd(a) => run_brdd(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Advise(a) => run_advise(a),
    }
}

/// Single-line machine-readable error.
pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "schema": SCHEMA, "error": { "kind": kind, "message": message } }).to_string()
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return 2;
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            if let Some(text) = outcome.stdout {
                println!("{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            1
        }
    }
}
