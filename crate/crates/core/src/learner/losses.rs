//! Loss functions with their gradients w.r.t. network outputs.

use ndarray::{Array2, Array3};

use crate::nn::{row_entropy, softmax_rows};

pub fn huber(x: f64, kappa: f64) -> f64 {
    if x.abs() <= kappa {
        0.5 * x * x
    } else {
        kappa * (x.abs() - 0.5 * kappa)
    }
}

pub fn huber_grad(x: f64, kappa: f64) -> f64 {
    if x.abs() <= kappa {
        x
    } else {
        kappa * x.signum()
    }
}

/// `|tau - 1(delta < 0)| * Huber_kappa(delta)`.
pub fn quantile_huber(delta: f64, tau: f64, kappa: f64) -> f64 {
    (tau - if delta < 0.0 { 1.0 } else { 0.0 }).abs() * huber(delta, kappa)
}

/// `sum_a p(a) (Q(a) - alpha log p(a))` per row.
pub fn soft_value(probs: &Array2<f64>, logp: &Array2<f64>, q: &Array2<f64>, alpha: f64) -> Vec<f64> {
    (0..probs.nrows())
        .map(|b| (0..probs.ncols()).map(|a| probs[[b, a]] * (q[[b, a]] - alpha * logp[[b, a]])).sum())
        .collect()
}

/// `sum_a p(a) Q(a)` per row.
pub fn expected_value(probs: &Array2<f64>, q: &Array2<f64>) -> Vec<f64> {
    (0..probs.nrows()).map(|b| (0..probs.ncols()).map(|a| probs[[b, a]] * q[[b, a]]).sum()).collect()
}

/// `x + gamma * v'` with the bootstrap dropped on terminal rows.
pub fn bellman_targets(immediate: &[f64], next_values: &[f64], done: &[bool], gamma: f64) -> Vec<f64> {
    immediate
        .iter()
        .zip(next_values)
        .zip(done)
        .map(|((x, v), d)| if *d { *x } else { x + gamma * v })
        .collect()
}

/// Batch mean of `0.5 (Q(o, a) - y)^2` and its gradient w.r.t. `q`.
pub fn td_loss(q: &Array2<f64>, actions: &[usize], targets: &[f64]) -> (f64, Array2<f64>) {
    let b = q.nrows() as f64;
    let mut grad = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let e = q[[i, a]] - y;
        loss += 0.5 * e * e;
        grad[[i, a]] = e / b;
    }
    (loss / b, grad)
}

/// `delta[b, i, j] = target[b, j] - q[b, i]`.
pub fn quantile_td_errors(q_taken: &Array2<f64>, targets: &Array2<f64>) -> Array3<f64> {
    let (b, n) = q_taken.dim();
    let m = targets.ncols();
    Array3::from_shape_fn((b, n, m), |(s, i, j)| targets[[s, j]] - q_taken[[s, i]])
}

/// `(1/B) sum_b (1/N') sum_i sum_j rho_{tau_i}(delta_bij)` and its gradient
/// w.r.t. `q_taken`.
pub fn quantile_huber_loss(
    q_taken: &Array2<f64>,
    taus: &Array2<f64>,
    targets: &Array2<f64>,
    kappa: f64,
) -> (f64, Array2<f64>) {
    let delta = quantile_td_errors(q_taken, targets);
    let (b, n, m) = delta.dim();
    let scale = 1.0 / (b as f64 * m as f64);
    let mut loss = 0.0;
    let mut grad = Array2::zeros((b, n));
    for s in 0..b {
        for i in 0..n {
            let tau = taus[[s, i]];
            for j in 0..m {
                let d = delta[[s, i, j]];
                let w = (tau - if d < 0.0 { 1.0 } else { 0.0 }).abs();
                loss += w * huber(d, kappa);
                grad[[s, i]] -= w * huber_grad(d, kappa) * scale;
            }
        }
    }
    (loss * scale, grad)
}

#[derive(Debug, Clone)]
pub struct ActorLoss {
    pub loss: f64,
    /// Gradient w.r.t. the raw logits.
    pub dlogits: Array2<f64>,
    pub probs: Array2<f64>,
    pub logp: Array2<f64>,
    pub entropy: Vec<f64>,
}

/// Batch mean of `pi^T (alpha log pi - Q^r + penalty)`.
///
/// With `g = alpha log pi - Q^r + penalty` the logit gradient is
/// `pi_j (g_j - pi^T g)`.
pub fn actor_loss(
    logits: &Array2<f64>,
    mask: &Array2<f64>,
    q_reward: &Array2<f64>,
    penalty: &Array2<f64>,
    alpha: f64,
) -> ActorLoss {
    let (probs, logp) = softmax_rows(logits, Some(mask));
    let (b, a) = probs.dim();
    let mut dlogits = Array2::zeros((b, a));
    let mut loss = 0.0;
    for s in 0..b {
        let g: Vec<f64> = (0..a).map(|j| alpha * logp[[s, j]] - q_reward[[s, j]] + penalty[[s, j]]).collect();
        let mean: f64 = (0..a).map(|j| probs[[s, j]] * g[j]).sum();
        loss += mean;
        for j in 0..a {
            dlogits[[s, j]] = probs[[s, j]] * (g[j] - mean) / b as f64;
        }
    }
    let entropy = row_entropy(&probs, &logp);
    ActorLoss { loss: loss / b as f64, dlogits, probs, logp, entropy }
}
