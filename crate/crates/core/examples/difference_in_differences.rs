//! Difference-in-differences under a seasonal shock that hits both groups.
//!
//!     cargo run --release --example difference_in_differences

use boat::bdid::{ate_did, fit_did, parallel_trend_check, TrendTolerance};
use boat::simulator::{simulate_seasonal_panel, Scenario, ScenarioSpec};
use boat::{PriorSpec, SamplerConfig};

fn main() -> boat::Result<()> {
    let mut spec = ScenarioSpec::new(Scenario::SeasonalDid, 200, 200, -0.3, 8);
    spec.seasonal_amplitude = 3.0;
    let study = simulate_seasonal_panel(&spec)?;

    let trend = parallel_trend_check(&study.pre_trend, TrendTolerance::default())?;
    println!(
        "pre-period slopes: control {:+.3}, treatment {:+.3} (gap {:.3} vs tolerance {:.3}) -> {}",
        trend.slope_c,
        trend.slope_t,
        trend.abs_slope_gap,
        trend.tolerance,
        if trend.pass { "parallel" } else { "NOT parallel" }
    );

    let cells = study.panel.cell_means();
    println!("cell means give {:+.3}", cells.ate());

    let post = fit_did(&study.panel, &PriorSpec::did_default(), &SamplerConfig::new(3000, 200, 2, 8))?;
    let est = ate_did(&post)?;
    println!("posterior {:+.3} +- {:.3}, 94% interval [{:+.3}, {:+.3}]", est.point, est.std, est.interval.0, est.interval.1);
    println!("true effect {:+.3}, seasonal shift {:+.1}", spec.true_ate, spec.seasonal_amplitude);
    Ok(())
}
