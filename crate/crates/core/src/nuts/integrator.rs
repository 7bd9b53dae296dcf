//! Leapfrog integration and the multinomial No-U-Turn transition.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::prob::LogDensity;

/// Energy error above which a trajectory is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// The gradient (or log-density) became non-finite during integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteGradient;

/// One leapfrog step for a unit mass matrix.
///
/// `grad_fn(q, g)` writes the gradient of the log-density at `q` into `g`
/// and returns the log-density.
pub fn leapfrog<F>(
    position: &[f64],
    momentum: &[f64],
    step: f64,
    mut grad_fn: F,
) -> Result<(Vec<f64>, Vec<f64>), NonFiniteGradient>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut grad = vec![0.0; position.len()];
    grad_fn(position, &mut grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(NonFiniteGradient);
    }
    let mut p: Vec<f64> = momentum.iter().zip(&grad).map(|(p, g)| p + 0.5 * step * g).collect();
    let q: Vec<f64> = position.iter().zip(&p).map(|(q, p)| q + step * p).collect();
    let lp = grad_fn(&q, &mut grad);
    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(NonFiniteGradient);
    }
    for (pi, g) in p.iter_mut().zip(&grad) {
        *pi += 0.5 * step * g;
    }
    Ok((q, p))
}

/// A phase-space point with cached log-density and gradient.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl State {
    pub fn at<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>) -> Option<State> {
        let mut grad = vec![0.0; q.len()];
        let logp = target.logp_grad(&q, &mut grad);
        if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some(State {
            p: vec![0.0; q.len()],
            q,
            grad,
            logp,
        })
    }

    pub fn energy(&self) -> f64 {
        -self.logp + 0.5 * dot(&self.p, &self.p)
    }

    /// Leapfrog step reusing the cached gradient; `None` on a non-finite result.
    pub fn step<T: LogDensity + ?Sized>(&self, target: &T, eps: f64) -> Option<State> {
        let mut p: Vec<f64> = self.p.iter().zip(&self.grad).map(|(p, g)| p + 0.5 * eps * g).collect();
        let q: Vec<f64> = self.q.iter().zip(&p).map(|(q, p)| q + eps * p).collect();
        let mut grad = vec![0.0; q.len()];
        let logp = target.logp_grad(&q, &mut grad);
        if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * eps * g;
        }
        Some(State { q, p, grad, logp })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// U-turn between the two trajectory ends (`left` earlier in time).
fn is_turning(left: &State, right: &State) -> bool {
    let span: Vec<f64> = right.q.iter().zip(&left.q).map(|(r, l)| r - l).collect();
    dot(&span, &left.p) < 0.0 || dot(&span, &right.p) < 0.0
}

struct Subtree {
    left: State,
    right: State,
    proposal: State,
    log_weight: f64,
    sum_accept: f64,
    n_steps: usize,
    diverged: bool,
    turning: bool,
}

struct TreeBuilder<'a, T: ?Sized, R> {
    target: &'a T,
    eps: f64,
    initial_energy: f64,
    rng: &'a mut R,
}

impl<T: LogDensity + ?Sized, R: Rng> TreeBuilder<'_, T, R> {
    fn leaf(&mut self, from: &State, direction: f64) -> Subtree {
        let stepped = from.step(self.target, direction * self.eps);
        let (state, energy_error) = match stepped {
            Some(s) => {
                let e = s.energy() - self.initial_energy;
                (s, if e.is_finite() { e } else { f64::INFINITY })
            }
            None => (from.clone(), f64::INFINITY),
        };
        let diverged = energy_error > DIVERGENCE_THRESHOLD;
        Subtree {
            left: state.clone(),
            right: state.clone(),
            proposal: state,
            log_weight: if diverged { f64::NEG_INFINITY } else { -energy_error },
            sum_accept: (-energy_error).exp().min(1.0),
            n_steps: 1,
            diverged,
            turning: false,
        }
    }

    fn build(&mut self, from: &State, direction: f64, depth: usize) -> Subtree {
        if depth == 0 {
            return self.leaf(from, direction);
        }
        let mut tree = self.build(from, direction, depth - 1);
        if tree.diverged || tree.turning {
            return tree;
        }
        let edge = if direction > 0.0 { &tree.right } else { &tree.left };
        let outer = self.build(&edge.clone(), direction, depth - 1);
        tree.n_steps += outer.n_steps;
        tree.sum_accept += outer.sum_accept;
        if outer.diverged || outer.turning {
            tree.diverged |= outer.diverged;
            tree.turning |= outer.turning;
            return tree;
        }
        let combined = log_add_exp(tree.log_weight, outer.log_weight);
        if self.rng.random::<f64>() < (outer.log_weight - combined).exp() {
            tree.proposal = outer.proposal;
        }
        tree.log_weight = combined;
        if direction > 0.0 {
            tree.right = outer.right;
        } else {
            tree.left = outer.left;
        }
        tree.turning = is_turning(&tree.left, &tree.right);
        tree
    }
}

/// Outcome of one NUTS transition.
#[derive(Debug, Clone)]
pub struct Transition {
    pub position: Vec<f64>,
    pub accept_stat: f64,
    /// Number of trajectory doublings attempted.
    pub depth: usize,
    pub diverged: bool,
    pub n_leapfrog: usize,
}

pub(crate) struct CachedTransition {
    pub state: State,
    pub accept_stat: f64,
    pub depth: usize,
    pub diverged: bool,
    pub n_leapfrog: usize,
}

pub(crate) fn transition_from<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    current: &State,
    eps: f64,
    max_depth: usize,
    rng: &mut R,
) -> CachedTransition {
    let mut start = current.clone();
    for p in start.p.iter_mut() {
        *p = rng.sample(StandardNormal);
    }
    let initial_energy = start.energy();
    let mut left = start.clone();
    let mut right = start.clone();
    let mut proposal = start;
    let mut log_weight = 0.0;
    let mut sum_accept = 0.0;
    let mut n_steps = 0;
    let mut depth = 0;
    let mut diverged = false;

    while depth < max_depth {
        let direction = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let from = if direction > 0.0 { right.clone() } else { left.clone() };
        let sub = {
            let mut builder = TreeBuilder {
                target,
                eps,
                initial_energy,
                rng: &mut *rng,
            };
            builder.build(&from, direction, depth)
        };
        depth += 1;
        n_steps += sub.n_steps;
        sum_accept += sub.sum_accept;
        if sub.diverged {
            diverged = true;
            break;
        }
        if sub.turning {
            break;
        }
        if rng.random::<f64>() < (sub.log_weight - log_weight).exp() {
            proposal = sub.proposal;
        }
        log_weight = log_add_exp(log_weight, sub.log_weight);
        if direction > 0.0 {
            right = sub.right;
        } else {
            left = sub.left;
        }
        if is_turning(&left, &right) {
            break;
        }
    }

    CachedTransition {
        state: proposal,
        accept_stat: if n_steps > 0 { sum_accept / n_steps as f64 } else { 0.0 },
        depth,
        diverged,
        n_leapfrog: n_steps,
    }
}

/// One NUTS transition from `current` with a fixed step size.
///
/// Returns `None` when the log-density or its gradient is not finite at
/// `current`.
pub fn nuts_step<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    current: &[f64],
    step_size: f64,
    max_depth: usize,
    rng: &mut R,
) -> Option<Transition> {
    let state = State::at(target, current.to_vec())?;
    let t = transition_from(target, &state, step_size, max_depth, rng);
    Some(Transition {
        position: t.state.q,
        accept_stat: t.accept_stat,
        depth: t.depth,
        diverged: t.diverged,
        n_leapfrog: t.n_leapfrog,
    })
}

/// Step-size heuristic: double or halve until the one-step acceptance
/// probability crosses 1/2.
pub(crate) fn find_reasonable_step<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    current: &State,
    rng: &mut R,
) -> f64 {
    let mut eps = 1.0;
    let mut start = current.clone();
    for p in start.p.iter_mut() {
        *p = rng.sample(StandardNormal);
    }
    let h0 = start.energy();
    let log_ratio = |eps: f64| -> f64 {
        match start.step(target, eps) {
            Some(s) => {
                let r = h0 - s.energy();
                if r.is_finite() {
                    r
                } else {
                    f64::NEG_INFINITY
                }
            }
            None => f64::NEG_INFINITY,
        }
    };
    let mut ratio = log_ratio(eps);
    let a: f64 = if ratio > 0.5f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        if !(a * ratio > -a * 2f64.ln()) {
            break;
        }
        let next = eps * 2f64.powf(a);
        if !(1e-10..=1e5).contains(&next) {
            break;
        }
        eps = next;
        ratio = log_ratio(eps);
    }
    eps
}
