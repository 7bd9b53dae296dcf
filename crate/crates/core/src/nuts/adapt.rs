//! Nesterov dual-averaging step-size adaptation.

/// Dual-averaging state.
///
/// The shrinkage point is the initial step size, so a run whose acceptance
/// statistic already equals the target stays at that step size.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target_accept: f64,
    mu: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    count: f64,
    error_avg: f64,
    log_step: f64,
    log_step_avg: f64,
}

impl DualAveraging {
    pub fn new(initial_step: f64, target_accept: f64) -> Self {
        DualAveraging {
            target_accept,
            mu: initial_step.ln(),
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            count: 0.0,
            error_avg: 0.0,
            log_step: initial_step.ln(),
            log_step_avg: 0.0,
        }
    }

    /// Feeds one acceptance statistic; returns the step size to use next.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        let accept = if accept_stat.is_finite() { accept_stat.clamp(0.0, 1.0) } else { 0.0 };
        self.count += 1.0;
        let m = self.count;
        let w = 1.0 / (m + self.t0);
        self.error_avg = (1.0 - w) * self.error_avg + w * (self.target_accept - accept);
        self.log_step = self.mu - m.sqrt() / self.gamma * self.error_avg;
        let eta = m.powf(-self.kappa);
        self.log_step_avg = eta * self.log_step + (1.0 - eta) * self.log_step_avg;
        self.log_step.exp()
    }

    pub fn current_step(&self) -> f64 {
        self.log_step.exp()
    }

    /// Averaged iterate, frozen as the post-warm-up step size.
    pub fn final_step(&self) -> f64 {
        if self.count == 0.0 {
            self.mu.exp()
        } else {
            self.log_step_avg.exp()
        }
    }
}

/// Runs dual averaging over a recorded history of acceptance statistics and
/// returns the averaged step size.
pub fn adapt_step_size(accept_history: &[f64], target_accept: f64, initial_step: f64) -> f64 {
    let mut da = DualAveraging::new(initial_step, target_accept);
    for &a in accept_history {
        da.update(a);
    }
    da.final_step()
}
