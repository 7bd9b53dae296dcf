//! Sharp regression discontinuity at a cutoff of 60, with a second
//! continuous covariate `z` and a sub-population filter on it.
//!
//!     cargo run --release --example regression_discontinuity

use boat::brdd::{ate_rdd, default_bandwidth, density_continuity_check, fit_rdd, predict_lines, ZFilter};
use boat::simulator::{simulate_discontinuity, Scenario, ScenarioSpec};
use boat::{PriorSpec, SamplerConfig};

fn main() -> boat::Result<()> {
    let mut spec = ScenarioSpec::new(Scenario::CutoffRdd, 400, 400, -1.2, 6);
    spec.z_effect = 0.01;
    let (data, truth) = simulate_discontinuity(&spec)?;

    let h = default_bandwidth(&data.assignment);
    let density = density_continuity_check(&data.assignment, data.cutoff, h)?;
    println!(
        "density near cutoff: {} left, {} right, p = {:.3} -> {}",
        density.left_count,
        density.right_count,
        density.p_value,
        if density.pass { "no sorting" } else { "possible sorting" }
    );

    let cfg = SamplerConfig::new(3000, 200, 2, 6);
    let post = fit_rdd(&data, &PriorSpec::rdd_default(), &cfg)?;
    let est = ate_rdd(&post)?;
    println!("jump {:+.3} [{:+.3}, {:+.3}], truth {:+.3}", est.point, est.interval.0, est.interval.1, truth.gap_at_cutoff());

    let lines = predict_lines(&post, &[40.0, 60.0, 80.0], 50.0)?;
    for i in 0..lines.x.len() {
        println!("x = {:>4}: control {:+.3}, treated {:+.3}", lines.x[i], lines.y_control[i], lines.y_treated[i]);
    }

    let high_z: ZFilter = "z>50".parse()?;
    let sub = data.filter_z(&high_z)?;
    let est = ate_rdd(&fit_rdd(&sub, &PriorSpec::rdd_default(), &cfg)?)?;
    println!("z > 50 only ({} units): jump {:+.3} +- {:.3}", sub.len(), est.point, est.std);
    Ok(())
}
