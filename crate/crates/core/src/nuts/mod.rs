//! No-U-Turn Hamiltonian Monte Carlo with dual-averaging warm-up and
//! multi-chain execution.
//!
//! Each chain owns a ChaCha stream selected by its index, so output depends
//! only on `(seed, chains, config, target)` and never on how chains are
//! scheduled across threads.

mod adapt;
mod diagnostics;
mod integrator;
mod samples;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{BoatError, Result};
use crate::prob::{LogDensity, ModelSpec, RegressionPosterior};

pub use adapt::{adapt_step_size, DualAveraging};
pub use diagnostics::{central_interval, quantile, r_hat, summarize, ParamSummary, CREDIBLE_MASS};
pub use integrator::{leapfrog, nuts_step, NonFiniteGradient, Transition, DIVERGENCE_THRESHOLD};
pub use samples::{ChainStats, ParamDiagnostics, PosteriorSamples, UnitMap};

pub(crate) use samples::format_float;

use integrator::{find_reasonable_step, transition_from, State};

/// Environment variable capping the number of sampler threads.
pub const THREADS_ENV: &str = "BOAT_THREADS";

/// Fraction of divergent post-warm-up transitions that triggers a warning.
pub const DIVERGENCE_WARN_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Iterations per chain, warm-up included.
    pub draws: usize,
    /// Leading iterations used for step-size adaptation and then discarded.
    pub warmup: usize,
    pub chains: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    /// Upper bound on worker threads; `None` reads `BOAT_THREADS`, then the
    /// machine's available parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            draws: 3000,
            warmup: 200,
            chains: 2,
            seed: 0,
            target_accept: 0.8,
            max_tree_depth: 10,
            threads: None,
        }
    }
}

impl SamplerConfig {
    pub fn new(draws: usize, warmup: usize, chains: usize, seed: u64) -> Self {
        SamplerConfig {
            draws,
            warmup,
            chains,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 || self.chains == 0 {
            return Err(BoatError::Validation("draws and chains must be >= 1".into()));
        }
        if self.warmup >= self.draws {
            return Err(BoatError::Validation(format!(
                "warmup ({}) must be smaller than draws ({})",
                self.warmup, self.draws
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(BoatError::Validation("target_accept must lie in (0,1)".into()));
        }
        if self.max_tree_depth == 0 {
            return Err(BoatError::Validation("max_tree_depth must be >= 1".into()));
        }
        Ok(())
    }

    fn worker_count(&self) -> usize {
        let cap = self
            .threads
            .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        cap.clamp(1, self.chains)
    }
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    stats: ChainStats,
}

/// The RNG stream for one chain.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn initial_state<T: LogDensity + ?Sized>(target: &T, rng: &mut ChaCha8Rng) -> Result<State> {
    for _ in 0..100 {
        let q: Vec<f64> = (0..target.dim()).map(|_| rng.random_range(-2.0..=2.0)).collect();
        if let Some(s) = State::at(target, q) {
            return Ok(s);
        }
    }
    Err(BoatError::Initialization(
        "log-posterior not finite at 100 random starting points in [-2, 2]".into(),
    ))
}

fn run_chain<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = chain_rng(cfg.seed, chain);
    let mut state = initial_state(target, &mut rng)?;
    let mut step = find_reasonable_step(target, &state, &mut rng);
    let mut adapter = DualAveraging::new(step, cfg.target_accept);

    let kept = cfg.draws - cfg.warmup;
    let mut draws = Vec::with_capacity(kept);
    let mut stats = ChainStats::default();
    let mut accept_sum = 0.0;
    let mut leapfrog_sum = 0usize;

    for i in 0..cfg.draws {
        let t = transition_from(target, &state, step, cfg.max_tree_depth, &mut rng);
        state = t.state;
        if i < cfg.warmup {
            step = adapter.update(t.accept_stat).clamp(1e-10, 1e3);
            if i + 1 == cfg.warmup {
                step = adapter.final_step().clamp(1e-10, 1e3);
            }
            continue;
        }
        accept_sum += t.accept_stat;
        leapfrog_sum += t.n_leapfrog;
        stats.divergences += usize::from(t.diverged);
        stats.max_depth_hits += usize::from(t.depth >= cfg.max_tree_depth);
        draws.push(target.constrain(&state.q));
    }
    stats.step_size = step;
    stats.mean_accept = accept_sum / kept as f64;
    stats.mean_leapfrog = leapfrog_sum as f64 / kept as f64;
    Ok(ChainOutput { draws, stats })
}

/// Runs `cfg.chains` independent NUTS chains on an arbitrary target.
pub fn sample_target<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let workers = cfg.worker_count();
    let mut outputs: Vec<Option<Result<ChainOutput>>> = (0..cfg.chains).map(|_| None).collect();

    if workers == 1 {
        for (c, slot) in outputs.iter_mut().enumerate() {
            *slot = Some(run_chain(target, cfg, c));
        }
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        (w..cfg.chains)
                            .step_by(workers)
                            .map(|c| (c, run_chain(target, cfg, c)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (c, out) in h.join().expect("sampler thread panicked") {
                    outputs[c] = Some(out);
                }
            }
        });
    }

    let mut draws = Vec::with_capacity(cfg.chains);
    let mut chain_stats = Vec::with_capacity(cfg.chains);
    for out in outputs {
        let out = out.expect("every chain produces output")?;
        draws.push(out.draws);
        chain_stats.push(out.stats);
    }

    let mut samples = PosteriorSamples::from_draws(target.param_names(), draws);
    let kept = (cfg.draws - cfg.warmup) as f64;
    for (c, st) in chain_stats.iter().enumerate() {
        if st.divergences as f64 > DIVERGENCE_WARN_FRACTION * kept {
            samples.warnings.push(format!(
                "chain {c}: {} of {} post-warm-up transitions diverged",
                st.divergences, kept
            ));
        }
    }
    samples.chain_stats = chain_stats;
    Ok(samples)
}

/// Samples the posterior of `model` on `data`.
pub fn sample(model: &ModelSpec, data: &DesignMatrix, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    let target = RegressionPosterior::new(model, data)?;
    let mut samples = sample_target(&target, cfg)?;
    samples.n_observations = data.len();
    Ok(samples)
}
