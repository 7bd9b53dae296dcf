//! Runs the NUTS sampler on a hand-written correlated Gaussian.
//!
//!     cargo run --release --example sampler_gaussian

use boat::nuts::sample_target;
use boat::prob::LogDensity;
use boat::SamplerConfig;

/// Zero-mean bivariate normal with unit variances and correlation `rho`.
struct Correlated {
    rho: f64,
}

impl LogDensity for Correlated {
    fn dim(&self) -> usize {
        2
    }

    fn logp_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let k = 1.0 / (1.0 - self.rho * self.rho);
        grad[0] = -k * (q[0] - self.rho * q[1]);
        grad[1] = -k * (q[1] - self.rho * q[0]);
        -0.5 * k * (q[0] * q[0] - 2.0 * self.rho * q[0] * q[1] + q[1] * q[1])
    }

    fn param_names(&self) -> Vec<String> {
        vec!["a".into(), "b".into()]
    }
}

fn main() -> boat::Result<()> {
    let target = Correlated { rho: 0.8 };
    let post = sample_target(&target, &SamplerConfig::new(2000, 200, 4, 1))?;

    let a = post.column("a")?;
    let b = post.column("b")?;
    let n = a.len() as f64;
    let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n;
    println!("draws per chain {}, chains {}", post.n_iterations(), post.n_chains());
    println!("mean a {:+.3}  mean b {:+.3}  E[ab] {:.3} (target 0.8)", post.mean("a")?, post.mean("b")?, corr);
    println!("max R-hat {:.4}, divergences {}", post.max_rhat(), post.total_divergences());
    Ok(())
}
