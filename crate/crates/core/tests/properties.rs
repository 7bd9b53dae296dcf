use std::collections::{BTreeMap, BTreeSet};

use boat::bdid::{ate_did_from_means, PanelDataset};
use boat::bpsm::{caliper_match, nn_match_1to1, Group, PropensityScores};
use boat::pipeline::{
    aggregate_to_vehicle, filter_trips, ingest_trips, min_max_scale_column, write_trips_csv, DriveMode, TargetSpec,
    TripRecord, DEFAULT_TIMEZONE, VEHICLE_COVARIATES,
};
use boat::prob::sigmoid;
use chrono::{DateTime, Duration, FixedOffset, TimeZone};
use proptest::prelude::*;

fn trip_strategy() -> impl Strategy<Value = TripRecord> {
    (
        (0u8..4, 0i64..2_000_000, 1u32..20_000, 0.0f64..400.0),
        (0.0f64..100.0, 0.0f64..100.0, -30.0f64..40.0, 0u32..6),
        (any::<bool>(), 0usize..3, 0.0f64..300.0, 0.0f64..250.0, any::<bool>(), any::<bool>()),
    )
        .prop_map(|((v, start_s, dur_s, dist), (soc0, soc1, temp, starts), (trailer, mode, odo, vmax, has_fuel, treated))| {
            let tz = FixedOffset::east_opt(3600).unwrap();
            let start: DateTime<FixedOffset> = tz.timestamp_opt(1_600_000_000 + start_s, 0).unwrap();
            TripRecord {
                vehicle_id: format!("v{v}"),
                start_time: start,
                end_time: start + Duration::seconds(dur_s as i64),
                distance_km: dist,
                duration_h: dur_s as f64 / 3600.0,
                fuel_g: has_fuel.then_some(dist * 50.0),
                energy_wh: Some(dist * 150.0),
                soc_start_pct: soc0,
                soc_end_pct: soc1,
                ambient_temp_c: temp,
                engine_starts: starts,
                trailer,
                drive_mode: [DriveMode::Hybrid, DriveMode::Electric, DriveMode::Combustion][mode],
                odometer_km: odo,
                max_speed_kmh: vmax,
                // group is fixed per vehicle so most vehicles are consistent
                group: if v % 2 == 0 || treated && v == 3 { Group::Treatment } else { Group::Control },
            }
        })
}

fn panel(y: &[(f64, f64, bool)]) -> PanelDataset {
    PanelDataset::new(
        (0..y.len()).map(|i| format!("u{i}")).collect(),
        y.iter().map(|r| if r.2 { Group::Treatment } else { Group::Control }).collect(),
        y.iter().map(|r| r.0).collect(),
        y.iter().map(|r| r.1).collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn min_max_scaling_round_trips(v in prop::collection::vec(-1e6f64..1e6, 2..50)) {
        prop_assume!(v.iter().any(|x| *x != v[0]));
        let (scaled, s) = min_max_scale_column("c", &v).unwrap();
        for (a, b) in scaled.iter().zip(&v) {
            prop_assert!((0.0..=1.0).contains(a));
            prop_assert!((s.unscale(*a) - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn sigmoid_is_symmetric(z in -700.0f64..700.0) {
        prop_assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&sigmoid(z)));
    }

    #[test]
    fn swapping_groups_negates_did(
        rows in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0, any::<bool>()), 2..40)
    ) {
        prop_assume!(rows.iter().any(|r| r.2) && rows.iter().any(|r| !r.2));
        let swapped: Vec<_> = rows.iter().map(|&(a, b, t)| (a, b, !t)).collect();
        let m = panel(&rows).cell_means();
        let s = panel(&swapped).cell_means();
        prop_assert!((m.ate() + s.ate()).abs() < 1e-9);
        let direct = ate_did_from_means(m.pre_control, m.post_control, m.pre_treatment, m.post_treatment);
        prop_assert!((direct - m.ate()).abs() < 1e-12);
    }

    #[test]
    fn aggregation_partitions_trips(trips in prop::collection::vec(trip_strategy(), 0..60)) {
        let agg = aggregate_to_vehicle(&trips, TargetSpec::FuelPerKm, DEFAULT_TIMEZONE);
        let mut per_vehicle: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &trips {
            *per_vehicle.entry(t.vehicle_id.as_str()).or_default() += 1;
        }
        let seen: BTreeSet<&str> = agg
            .vehicles
            .iter()
            .map(|v| v.vehicle_id.as_str())
            .chain(agg.excluded.iter().map(|e| e.vehicle_id.as_str()))
            .collect();
        prop_assert_eq!(seen.len(), agg.vehicles.len() + agg.excluded.len());
        prop_assert_eq!(seen, per_vehicle.keys().copied().collect::<BTreeSet<_>>());
        for v in &agg.vehicles {
            prop_assert_eq!(v.n_trips, per_vehicle[v.vehicle_id.as_str()]);
            prop_assert_eq!(v.covariates.len(), VEHICLE_COVARIATES.len());
            for name in VEHICLE_COVARIATES.iter().filter(|n| n.starts_with("share_")) {
                prop_assert!((0.0..=1.0).contains(&v.covariate(name).unwrap()));
            }
            let counts = v.covariate("trips_weekday").unwrap() + v.covariate("trips_weekend").unwrap();
            prop_assert_eq!(counts as usize, v.n_trips);
            prop_assert!(v.target.is_finite() && v.target >= 0.0);
        }
    }

    #[test]
    fn ingest_and_filter_conserve_trips(trips in prop::collection::vec(trip_strategy(), 0..40)) {
        let mut buf = Vec::new();
        write_trips_csv(&mut buf, &trips).unwrap();
        let back = ingest_trips(buf.as_slice(), DEFAULT_TIMEZONE).unwrap();
        prop_assert_eq!(back.trips.len() + back.rejects.len(), trips.len());
        let n = back.trips.len();
        let f = filter_trips(back.trips);
        prop_assert_eq!(f.kept.len() + f.discarded.len(), n);
        for t in &f.kept {
            prop_assert!(t.odometer_km >= 100.0 && t.avg_speed_kmh() <= 200.0);
        }
    }

    #[test]
    fn caliper_matching_invariants(
        raw in prop::collection::vec((1u32..99, any::<bool>()), 2..40),
        caliper in 0.005f64..0.3,
    ) {
        prop_assume!(raw.iter().any(|r| r.1) && raw.iter().any(|r| !r.1));
        let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64 / 100.0).collect();
        let group: Vec<Group> = raw.iter().map(|r| if r.1 { Group::Treatment } else { Group::Control }).collect();
        let ps = PropensityScores::new((0..raw.len()).map(|i| format!("u{i}")).collect(), scores.clone(), group.clone()).unwrap();
        let m = caliper_match(&ps, caliper).unwrap();
        let mut controls = BTreeSet::new();
        for p in &m.pairs {
            prop_assert_eq!(group[p.treated], Group::Treatment);
            prop_assert_eq!(group[p.control], Group::Control);
            prop_assert!(controls.insert(p.control));
            prop_assert!(p.distance <= caliper);
            prop_assert!((p.distance - (scores[p.treated] - scores[p.control]).abs()).abs() < 1e-15);
        }
        let n_t = group.iter().filter(|g| **g == Group::Treatment).count();
        prop_assert_eq!(m.pairs.len() + m.unmatched_treated.len(), n_t);
        if let Ok(nn) = nn_match_1to1(&ps) {
            prop_assert_eq!(nn.pairs.len(), n_t);
            prop_assert!(nn.pairs.len() >= m.pairs.len());
        }
    }
}
