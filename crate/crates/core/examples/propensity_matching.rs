//! Bayesian propensity score matching on a confounded simulation.
//!
//! Treated units have larger `x1`, and `x1` also raises the outcome, so the
//! raw group difference overstates the effect. Matching on the posterior
//! propensity score removes most of that bias.
//!
//!     cargo run --release --example propensity_matching

use boat::bpsm::{ate_psm, balance_report, caliper_match, fit_propensity, naive_ate, positivity_check, propensity_scores};
use boat::simulator::{simulate_confounded, Scenario, ScenarioSpec};
use boat::{PriorSpec, SamplerConfig};

fn main() -> boat::Result<()> {
    let mut spec = ScenarioSpec::new(Scenario::ConfoundedPsm, 400, 40, -0.3, 5);
    spec.confound_strength = 3.0;
    let (design, truth) = simulate_confounded(&spec)?;

    let post = fit_propensity(&design, &PriorSpec::logistic_default(), &SamplerConfig::new(3000, 200, 2, 5))?;
    for name in &post.param_names {
        let (lo, hi) = post.interval(name)?;
        println!("{name:>8} {:+.3}  [{lo:+.3}, {hi:+.3}]", post.mean(name)?);
    }

    let scores = propensity_scores(&post, &design, 100, 5)?;
    let pos = positivity_check(&scores, 10)?;
    println!("score overlap across bins: {:.0}%", 100.0 * pos.overlap_fraction);

    let matched = caliper_match(&scores, 0.05)?;
    println!("{} pairs, {} treated left unmatched", matched.pairs.len(), matched.unmatched_treated.len());
    for b in balance_report(&matched, &design)? {
        println!("{:>4} SMD {:+.3} -> {:+.3}", b.name, b.smd_unmatched, b.smd_matched);
    }

    let naive = naive_ate(&design, &design.y)?;
    let psm = ate_psm(&matched, &design.y)?;
    println!("true effect {:+.3}", truth.true_ate);
    println!("naive       {:+.3} [{:+.3}, {:+.3}]", naive.point, naive.interval.0, naive.interval.1);
    println!("matched     {:+.3} [{:+.3}, {:+.3}]", psm.point, psm.interval.0, psm.interval.1);
    Ok(())
}
