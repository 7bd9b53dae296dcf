//! Raw trip telemetry to a per-vehicle table and a matched fuel estimate.
//!
//!     cargo run --release --example trip_pipeline

use boat::bpsm::{ate_psm, fit_propensity, nn_match_1to1, propensity_scores};
use boat::pipeline::{aggregate_to_vehicle, build_design, filter_trips, Roles, TargetSpec, UnitTable, DEFAULT_TIMEZONE, VEHICLE_COVARIATES};
use boat::simulator::{simulate_fleet_trips, FleetSpec};
use boat::{PriorSpec, SamplerConfig};

fn main() -> boat::Result<()> {
    let trips = simulate_fleet_trips(&FleetSpec {
        n_control: 60,
        n_treated: 20,
        trips_per_vehicle: 40,
        true_effect_g_per_km: -4.0,
        seed: 2,
        dirty_fraction: 0.03,
    })?;
    let n_raw = trips.len();
    let filtered = filter_trips(trips);
    println!("{n_raw} trips, {} kept, {} discarded", filtered.kept.len(), filtered.discarded.len());

    let agg = aggregate_to_vehicle(&filtered.kept, TargetSpec::FuelPerKm, DEFAULT_TIMEZONE);
    for e in &agg.excluded {
        println!("excluded {}: {}", e.vehicle_id, e.reason);
    }
    let first = &agg.vehicles[0];
    println!("vehicle {} ({} trips, {:?}):", first.vehicle_id, first.n_trips, first.group);
    for name in VEHICLE_COVARIATES {
        println!("  {name:<22} {:>9.3}", first.covariate(name).unwrap_or(f64::NAN));
    }

    let table = UnitTable::from_aggregates(&agg.vehicles);
    let covariates: Vec<String> = ["avg_trip_distance", "share_hybrid_distance", "avg_ambient_temp", "share_trailer_trips"]
        .map(String::from)
        .into();
    let design = build_design(&table, &covariates, &Roles::default())?;

    let post = fit_propensity(&design, &PriorSpec::logistic_default(), &SamplerConfig::new(2000, 200, 2, 2))?;
    let scores = propensity_scores(&post, &design, 0, 2)?;
    let matched = nn_match_1to1(&scores)?;
    let est = ate_psm(&matched, &design.y)?;
    println!("fuel effect {:+.2} g/km [{:+.2}, {:+.2}] (simulated -4.00)", est.point, est.interval.0, est.interval.1);
    Ok(())
}
