//! Trip telemetry to vehicle-level design matrices.
//!
//! `ingest_trips` → `filter_trips` → `aggregate_to_vehicle` → [`UnitTable`]
//! → `build_design`. Every stage reports what it dropped and why.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDateTime, TimeZone, Weekday};
use chrono_tz::Tz;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bpsm::Group;
use crate::design::{ColumnScaling, DesignMatrix};
use crate::error::{BoatError, Result};
use crate::nuts::format_float;

/// Timezone used to read offset-less timestamps and to decide weekday/weekend.
pub const DEFAULT_TIMEZONE: Tz = chrono_tz::Europe::Stockholm;

/// Trips from vehicles with a lower odometer reading are dropped.
pub const MIN_ODOMETER_KM: f64 = 100.0;
/// Trips with a higher average speed are dropped.
pub const MAX_AVG_SPEED_KMH: f64 = 200.0;
pub const HIGH_SOC_START_PCT: f64 = 80.0;
pub const LOW_SOC_END_PCT: f64 = 21.0;

pub const TRIP_COLUMNS: [&str; 16] = [
    "vehicle_id",
    "start_time",
    "end_time",
    "distance_km",
    "duration_h",
    "fuel_g",
    "energy_wh",
    "soc_start_pct",
    "soc_end_pct",
    "ambient_temp_c",
    "engine_starts",
    "trailer",
    "drive_mode",
    "odometer_km",
    "max_speed_kmh",
    "group",
];

/// Vehicle-level covariates, in canonical column order.
pub const VEHICLE_COVARIATES: [&str; 14] = [
    "share_high_soc_start",
    "share_low_soc_end",
    "trips_weekday",
    "trips_weekend",
    "avg_trip_distance",
    "max_trip_distance",
    "avg_trip_speed",
    "max_trip_speed",
    "share_hybrid_distance",
    "share_trailer_trips",
    "avg_engine_starts",
    "avg_ambient_temp",
    "min_ambient_temp",
    "max_ambient_temp",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    Hybrid,
    Electric,
    Combustion,
}

impl DriveMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DriveMode::Hybrid => "hybrid",
            DriveMode::Electric => "electric",
            DriveMode::Combustion => "combustion",
        }
    }
}

impl FromStr for DriveMode {
    type Err = BoatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hybrid" => Ok(DriveMode::Hybrid),
            "electric" | "ev" => Ok(DriveMode::Electric),
            "combustion" | "ice" => Ok(DriveMode::Combustion),
            _ => Err(BoatError::Schema(format!("unknown drive mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub vehicle_id: String,
    pub start_time: DateTime<FixedOffset>,
    pub end_time: DateTime<FixedOffset>,
    pub distance_km: f64,
    pub duration_h: f64,
    pub fuel_g: Option<f64>,
    pub energy_wh: Option<f64>,
    pub soc_start_pct: f64,
    pub soc_end_pct: f64,
    pub ambient_temp_c: f64,
    pub engine_starts: u32,
    pub trailer: bool,
    pub drive_mode: DriveMode,
    pub odometer_km: f64,
    pub max_speed_kmh: f64,
    pub group: Group,
}

impl TripRecord {
    pub fn avg_speed_kmh(&self) -> f64 {
        self.distance_km / self.duration_h
    }

    /// Checks the record invariants; the message is the reject reason.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.end_time <= self.start_time {
            return Err("end_time is not after start_time".into());
        }
        let span = (self.end_time - self.start_time).num_milliseconds() as f64 / 1000.0;
        if (self.duration_h * 3600.0 - span).abs() > 1.0 {
            return Err(format!(
                "duration_h {} disagrees with timestamps ({span} s)",
                self.duration_h
            ));
        }
        if !(self.distance_km >= 0.0) {
            return Err("distance_km is negative".into());
        }
        if !(self.duration_h > 0.0) {
            return Err("duration_h is not positive".into());
        }
        if self.fuel_g.is_none() && self.energy_wh.is_none() {
            return Err("neither fuel_g nor energy_wh is given".into());
        }
        if self.fuel_g.is_some_and(|v| !(v >= 0.0)) || self.energy_wh.is_some_and(|v| !(v >= 0.0)) {
            return Err("fuel_g or energy_wh is negative".into());
        }
        for (name, v) in [("soc_start_pct", self.soc_start_pct), ("soc_end_pct", self.soc_end_pct)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(format!("{name} {v} is outside [0, 100]"));
            }
        }
        if !self.ambient_temp_c.is_finite() {
            return Err("ambient_temp_c is not finite".into());
        }
        if !(self.odometer_km >= 0.0) || !(self.max_speed_kmh >= 0.0) {
            return Err("odometer_km or max_speed_kmh is negative".into());
        }
        Ok(())
    }
}

/// A row that could not be turned into a [`TripRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the file, header included.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    pub trips: Vec<TripRecord>,
    pub rejects: Vec<Reject>,
}

fn parse_time(raw: &str, tz: Tz) -> std::result::Result<DateTime<FixedOffset>, String> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(t);
    }
    let naive = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
        .map_err(|_| format!("`{raw}` is not an ISO-8601 timestamp"))?;
    tz.from_local_datetime(&naive)
        .single()
        .map(|t| t.fixed_offset())
        .ok_or_else(|| format!("`{raw}` is ambiguous or skipped in {tz}"))
}

fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("`{other}` is not a flag")),
    }
}

/// Reads trips from CSV. Offset-less timestamps are read in `tz`.
///
/// A missing column fails the whole read; a bad row is collected in
/// `rejects` with its reason.
pub fn ingest_trips<R: Read>(source: R, tz: Tz) -> Result<Ingested> {
    let mut rdr = csv::Reader::from_reader(source);
    let headers = rdr.headers()?.clone();
    let mut idx = BTreeMap::new();
    for col in TRIP_COLUMNS {
        let i = headers
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| BoatError::Schema(format!("trips file is missing column `{col}`")))?;
        idx.insert(col, i);
    }

    let mut out = Ingested::default();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            let field = |c: &str| rec.get(idx[c]).unwrap_or("").trim().to_string();
            let num = |c: &str| {
                field(c)
                    .parse::<f64>()
                    .map_err(|_| format!("{c} `{}` is not a number", field(c)))
            };
            let opt = |c: &str| {
                let f = field(c);
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| format!("{c} `{f}` is not a number"))
                }
            };
            let trip = TripRecord {
                vehicle_id: field("vehicle_id"),
                start_time: parse_time(&field("start_time"), tz)?,
                end_time: parse_time(&field("end_time"), tz)?,
                distance_km: num("distance_km")?,
                duration_h: num("duration_h")?,
                fuel_g: opt("fuel_g")?,
                energy_wh: opt("energy_wh")?,
                soc_start_pct: num("soc_start_pct")?,
                soc_end_pct: num("soc_end_pct")?,
                ambient_temp_c: num("ambient_temp_c")?,
                engine_starts: field("engine_starts")
                    .parse()
                    .map_err(|_| format!("engine_starts `{}` is not a count", field("engine_starts")))?,
                trailer: parse_bool(&field("trailer"))?,
                drive_mode: field("drive_mode").parse().map_err(|e: BoatError| e.to_string())?,
                odometer_km: num("odometer_km")?,
                max_speed_kmh: num("max_speed_kmh")?,
                group: field("group").parse().map_err(|e: BoatError| e.to_string())?,
            };
            if trip.vehicle_id.is_empty() {
                return Err("empty vehicle_id".to_string());
            }
            trip.validate()?;
            Ok(trip)
        });
        match parsed {
            Ok(t) => out.trips.push(t),
            Err(reason) => out.rejects.push(Reject { line, reason }),
        }
    }
    Ok(out)
}

pub fn ingest_trips_path<P: AsRef<Path>>(path: P, tz: Tz) -> Result<Ingested> {
    ingest_trips(std::fs::File::open(path)?, tz)
}

pub fn write_trips_csv<W: Write>(out: W, trips: &[TripRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIP_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    for t in trips {
        w.write_record([
            t.vehicle_id.clone(),
            t.start_time.to_rfc3339(),
            t.end_time.to_rfc3339(),
            format_float(t.distance_km),
            format_float(t.duration_h),
            opt(t.fuel_g),
            opt(t.energy_wh),
            format_float(t.soc_start_pct),
            format_float(t.soc_end_pct),
            format_float(t.ambient_temp_c),
            t.engine_starts.to_string(),
            t.trailer.to_string(),
            t.drive_mode.as_str().to_string(),
            format_float(t.odometer_km),
            format_float(t.max_speed_kmh),
            t.group.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    NewVehicle,
    Speed,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Filtered {
    pub kept: Vec<TripRecord>,
    pub discarded: Vec<(TripRecord, DiscardReason)>,
}

/// Drops trips from nearly new vehicles and trips with implausible average
/// speed. Boundary values are kept.
pub fn filter_trips(trips: Vec<TripRecord>) -> Filtered {
    let mut out = Filtered::default();
    for t in trips {
        if t.odometer_km < MIN_ODOMETER_KM {
            out.discarded.push((t, DiscardReason::NewVehicle));
        } else if t.avg_speed_kmh() > MAX_AVG_SPEED_KMH {
            out.discarded.push((t, DiscardReason::Speed));
        } else {
            out.kept.push(t);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// Grams of fuel per kilometre.
    FuelPerKm,
    /// Watt-hours per kilometre.
    EnergyPerKm,
}

impl FromStr for TargetSpec {
    type Err = BoatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fuel_per_km" => Ok(TargetSpec::FuelPerKm),
            "energy_per_km" => Ok(TargetSpec::EnergyPerKm),
            _ => Err(BoatError::Validation(format!("unknown target `{s}` (fuel_per_km | energy_per_km)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleAggregate {
    pub vehicle_id: String,
    pub group: Group,
    pub n_trips: usize,
    pub covariates: BTreeMap<String, f64>,
    pub target: f64,
}

impl VehicleAggregate {
    pub fn covariate(&self, name: &str) -> Option<f64> {
        self.covariates.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub vehicle_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Aggregated {
    /// Sorted by vehicle id.
    pub vehicles: Vec<VehicleAggregate>,
    pub excluded: Vec<Exclusion>,
}

fn aggregate_one(id: &str, trips: &[&TripRecord], target: TargetSpec, tz: Tz) -> std::result::Result<VehicleAggregate, String> {
    let group = trips[0].group;
    if trips.iter().any(|t| t.group != group) {
        return Err("trips disagree on the vehicle's group".into());
    }
    let n = trips.len() as f64;
    let total_distance: f64 = trips.iter().map(|t| t.distance_km).sum();
    if !(total_distance > 0.0) {
        return Err("zero total distance".into());
    }
    let total_duration: f64 = trips.iter().map(|t| t.duration_h).sum();
    let total_target = trips.iter().try_fold(0.0, |acc, t| {
        let v = match target {
            TargetSpec::FuelPerKm => t.fuel_g,
            TargetSpec::EnergyPerKm => t.energy_wh,
        };
        v.map(|v| acc + v)
    });
    let Some(total_target) = total_target else {
        return Err(format!("a trip lacks the {target:?} measurement"));
    };

    let count = |f: &dyn Fn(&TripRecord) -> bool| trips.iter().filter(|t| f(t)).count() as f64;
    let weekend = count(&|t| matches!(t.start_time.with_timezone(&tz).weekday(), Weekday::Sat | Weekday::Sun));
    let hybrid_km: f64 = trips.iter().filter(|t| t.drive_mode == DriveMode::Hybrid).map(|t| t.distance_km).sum();
    let fold = |init: f64, f: fn(f64, f64) -> f64, g: fn(&TripRecord) -> f64| trips.iter().map(|t| g(t)).fold(init, f);

    let values = [
        count(&|t| t.soc_start_pct > HIGH_SOC_START_PCT) / n,
        count(&|t| t.soc_end_pct < LOW_SOC_END_PCT) / n,
        n - weekend,
        weekend,
        total_distance / n,
        fold(f64::NEG_INFINITY, f64::max, |t| t.distance_km),
        total_distance / total_duration,
        fold(f64::NEG_INFINITY, f64::max, |t| t.max_speed_kmh),
        hybrid_km / total_distance,
        count(&|t| t.trailer) / n,
        trips.iter().map(|t| t.engine_starts as f64).sum::<f64>() / n,
        trips.iter().map(|t| t.ambient_temp_c).sum::<f64>() / n,
        fold(f64::INFINITY, f64::min, |t| t.ambient_temp_c),
        fold(f64::NEG_INFINITY, f64::max, |t| t.ambient_temp_c),
    ];
    Ok(VehicleAggregate {
        vehicle_id: id.to_string(),
        group,
        n_trips: trips.len(),
        covariates: VEHICLE_COVARIATES.iter().map(|c| c.to_string()).zip(values).collect(),
        target: total_target / total_distance,
    })
}

/// Collapses trips to one row per vehicle. Weekday/weekend is decided by the
/// trip start in `tz`.
pub fn aggregate_to_vehicle(trips: &[TripRecord], target: TargetSpec, tz: Tz) -> Aggregated {
    let mut by_vehicle: BTreeMap<&str, Vec<&TripRecord>> = BTreeMap::new();
    for t in trips {
        by_vehicle.entry(&t.vehicle_id).or_default().push(t);
    }
    let mut out = Aggregated::default();
    for (id, ts) in by_vehicle {
        match aggregate_one(id, &ts, target, tz) {
            Ok(v) => out.vehicles.push(v),
            Err(reason) => out.excluded.push(Exclusion { vehicle_id: id.to_string(), reason }),
        }
    }
    out
}

/// Scales one column to `[0, 1]`.
pub fn min_max_scale_column(name: &str, v: &[f64]) -> Result<(Vec<f64>, ColumnScaling)> {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(BoatError::Scaling(format!("column `{name}` is constant and cannot be min-max scaled")));
    }
    let s = ColumnScaling { min, max };
    Ok((v.iter().map(|x| s.scale(*x)).collect(), s))
}

/// Scales every column of `x` to `[0, 1]`; `names` label errors.
pub fn min_max_scale(x: &Array2<f64>, names: &[String]) -> Result<(Array2<f64>, Vec<ColumnScaling>)> {
    if names.len() != x.ncols() {
        return Err(BoatError::Contract("one name per column required".into()));
    }
    let mut out = x.clone();
    let mut meta = Vec::with_capacity(x.ncols());
    for (j, name) in names.iter().enumerate() {
        let col: Vec<f64> = x.column(j).to_vec();
        let (scaled, s) = min_max_scale_column(name, &col)?;
        out.column_mut(j).assign(&ndarray::Array1::from(scaled));
        meta.push(s);
    }
    Ok((out, meta))
}

/// A numeric table with one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTable {
    pub unit_ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Array2<f64>,
}

pub const TARGET_COLUMN: &str = "target";
pub const TREATMENT_COLUMN: &str = "treatment";

impl UnitTable {
    pub fn new(unit_ids: Vec<String>, columns: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != unit_ids.len() || values.ncols() != columns.len() {
            return Err(BoatError::Contract("unit table shape mismatch".into()));
        }
        Ok(UnitTable { unit_ids, columns, values })
    }

    /// The 14 vehicle covariates, then `target` and `treatment` (0/1).
    pub fn from_aggregates(vehicles: &[VehicleAggregate]) -> Self {
        let mut columns: Vec<String> = VEHICLE_COVARIATES.iter().map(|c| c.to_string()).collect();
        columns.push(TARGET_COLUMN.into());
        columns.push(TREATMENT_COLUMN.into());
        let mut values = Array2::zeros((vehicles.len(), columns.len()));
        for (i, v) in vehicles.iter().enumerate() {
            for (j, c) in VEHICLE_COVARIATES.iter().enumerate() {
                values[[i, j]] = v.covariates[*c];
            }
            values[[i, 14]] = v.target;
            values[[i, 15]] = v.group.indicator() as f64;
        }
        UnitTable {
            unit_ids: vehicles.iter().map(|v| v.vehicle_id.clone()).collect(),
            columns,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_ids.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| BoatError::Schema(format!("no column `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.values.column(self.column_index(name)?).to_vec())
    }

    /// Reads a CSV whose first column is the unit id and the rest numeric.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(source);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() {
            return Err(BoatError::Schema("empty header".into()));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let mut ids = Vec::new();
        let mut flat = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(BoatError::Schema(format!("row {} has {} fields, expected {}", k + 2, rec.len(), headers.len())));
            }
            ids.push(rec[0].to_string());
            for (j, raw) in rec.iter().skip(1).enumerate() {
                let v = raw.trim().parse::<f64>().map_err(|_| {
                    BoatError::Schema(format!("row {}: column `{}` value `{raw}` is not numeric", k + 2, columns[j]))
                })?;
                flat.push(v);
            }
        }
        let values = Array2::from_shape_vec((ids.len(), columns.len()), flat)
            .map_err(|e| BoatError::Schema(e.to_string()))?;
        UnitTable::new(ids, columns, values)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(std::iter::once("unit_id").chain(self.columns.iter().map(String::as_str)))?;
        for (i, id) in self.unit_ids.iter().enumerate() {
            w.write_record(std::iter::once(id.clone()).chain(self.values.row(i).iter().map(|v| format_float(*v))))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which table columns play which role in a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    pub target: String,
    pub treatment: String,
    pub period: Option<String>,
    pub assignment: Option<String>,
    pub z: Option<String>,
}

impl Default for Roles {
    fn default() -> Self {
        Roles {
            target: TARGET_COLUMN.into(),
            treatment: TREATMENT_COLUMN.into(),
            period: None,
            assignment: None,
            z: None,
        }
    }
}

/// Min-max scales the requested covariates (in the requested order) and
/// wires the role columns. Rows keep the table's order.
pub fn build_design(table: &UnitTable, covariates: &[String], roles: &Roles) -> Result<DesignMatrix> {
    let n = table.len();
    let mut raw = Array2::zeros((n, covariates.len()));
    for (j, c) in covariates.iter().enumerate() {
        raw.column_mut(j).assign(&table.values.column(table.column_index(c)?));
    }
    let (x, scaling) = if n > 0 { min_max_scale(&raw, covariates)? } else { (raw, vec![]) };
    let treatment = table
        .column(&roles.treatment)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| match v {
            v if v == 0.0 => Ok(0u8),
            v if v == 1.0 => Ok(1u8),
            v => Err(BoatError::Contract(format!(
                "treatment column `{}` holds {v} for unit {}; expected 0 or 1",
                roles.treatment, table.unit_ids[i]
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let y = table.column(&roles.target)?;
    let mut d = DesignMatrix::new(table.unit_ids.clone(), covariates.to_vec(), x, treatment, y)?;
    if n > 0 {
        d = d.with_scaling(scaling)?;
    }
    if let Some(c) = &roles.period {
        d = d.with_period(table.column(c)?)?;
    }
    if let Some(c) = &roles.assignment {
        d = d.with_assignment(table.column(c)?)?;
    }
    if let Some(c) = &roles.z {
        d = d.with_z(table.column(c)?)?;
    }
    Ok(d)
}
