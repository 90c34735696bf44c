//! Primal-dual soft actor-critic with expected or CVaR cost constraints, and
//! the shaped-reward DQN baseline.
//!
//! One [`PrimalLearner::train_step`] runs, in order: reward critic, cost
//! critics (expected-value or quantile), actor, multipliers, temperature,
//! target soft updates.

pub mod losses;
mod madqn;
mod replay;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::env::{ActionMask, Observation};
use crate::nn::{clip_grad_norm, soft_update, softmax_entropy, softmax_rows, Adam, MASKED_LOGIT, Architecture, Checkpoint, Iqn, Mlp, Module, RngState};

pub use losses::ActorLoss;
pub use madqn::Madqn;
pub use replay::{Batch, ReplayBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskMode {
    Avg,
    Cvar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub gamma_r: f64,
    pub gamma_c: f64,
    pub batch_size: usize,
    /// Online quantile fractions per transition (N).
    pub n_quantiles: usize,
    /// Target quantile fractions per transition (N').
    pub n_target_quantiles: usize,
    /// Tail samples for the CVaR estimate (N^k).
    pub n_cvar_samples: usize,
    /// Soft target update rate.
    pub eta: f64,
    pub risk_mode: RiskMode,
    pub huber_kappa: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_lambda: f64,
    pub lr_alpha: f64,
    pub alpha_init: f64,
    pub lambda_init: f64,
    /// Cost thresholds D_k; their count sets K.
    pub thresholds: Vec<f64>,
    /// Risk levels epsilon_k.
    pub risk_levels: Vec<f64>,
    pub entropy_target: f64,
    pub buffer_capacity: usize,
    pub grad_clip: Option<f64>,
    pub architecture: Architecture,
    /// Exploration rate of the DQN baseline.
    pub madqn_epsilon: f64,
    /// Sign of the cost term in the baseline's shaped reward.
    pub madqn_cost_sign: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma_r: 0.99,
            gamma_c: 0.97,
            batch_size: 1024,
            n_quantiles: 64,
            n_target_quantiles: 64,
            n_cvar_samples: 64,
            eta: 0.005,
            risk_mode: RiskMode::Avg,
            huber_kappa: 1.0,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_lambda: 1e-3,
            lr_alpha: 1e-3,
            alpha_init: 0.2,
            lambda_init: 0.0,
            thresholds: vec![0.1],
            risk_levels: vec![0.25],
            entropy_target: 0.067,
            buffer_capacity: 300_000,
            grad_clip: None,
            architecture: Architecture::default(),
            madqn_epsilon: 0.05,
            madqn_cost_sign: 1.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |g: f64| g > 0.0 && g <= 1.0;
        if !in_unit(self.gamma_r) || !in_unit(self.gamma_c) || !in_unit(self.eta) {
            return Err(config_err("gamma_r, gamma_c and eta must lie in (0, 1]"));
        }
        if self.batch_size == 0 || self.n_quantiles == 0 || self.n_target_quantiles == 0 || self.n_cvar_samples == 0 {
            return Err(config_err("batch size and quantile counts must be at least 1"));
        }
        if self.thresholds.is_empty() || self.thresholds.len() != self.risk_levels.len() {
            return Err(config_err("need one risk level per cost threshold"));
        }
        if self.risk_levels.iter().any(|e| !in_unit(*e)) {
            return Err(config_err("risk levels must lie in (0, 1]"));
        }
        if !(self.huber_kappa > 0.0) || self.alpha_init < 0.0 || self.lambda_init < 0.0 || self.buffer_capacity == 0 {
            return Err(config_err("invalid learner constants"));
        }
        if !(0.0..=1.0).contains(&self.madqn_epsilon) || self.madqn_cost_sign.abs() != 1.0 {
            return Err(config_err("invalid baseline settings"));
        }
        self.architecture.validate()
    }

    pub fn num_costs(&self) -> usize {
        self.thresholds.len()
    }
}

/// Multipliers, temperature and the constraint targets they enforce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda: Vec<f64>,
    pub alpha: f64,
    pub thresholds: Vec<f64>,
    pub risk_levels: Vec<f64>,
    pub entropy_target: f64,
}

impl LagrangeState {
    pub fn from_config(cfg: &LearnerConfig) -> Self {
        Self {
            lambda: vec![cfg.lambda_init; cfg.num_costs()],
            alpha: cfg.alpha_init,
            thresholds: cfg.thresholds.clone(),
            risk_levels: cfg.risk_levels.clone(),
            entropy_target: cfg.entropy_target,
        }
    }

    /// Projected ascent: the multiplier grows while the estimate exceeds the threshold.
    pub fn update_lambda(&mut self, k: usize, estimate: f64, lr: f64) {
        self.lambda[k] = (self.lambda[k] + lr * (estimate - self.thresholds[k])).max(0.0);
    }

    /// Projected descent on `alpha (H - H_target)`.
    pub fn update_alpha(&mut self, entropy: f64, lr: f64) {
        self.alpha = (self.alpha - lr * (entropy - self.entropy_target)).max(0.0);
    }
}

/// Counts of the branch-specific computations, for isolation checks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub steps: u64,
    pub reward_targets: u64,
    pub avg_cost_targets: u64,
    pub avg_cost_updates: u64,
    pub quantile_forwards: u64,
    pub quantile_losses: u64,
    pub cvar_estimates: u64,
    pub actor_updates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: u64,
    pub reward_loss: f64,
    pub cost_loss: Vec<f64>,
    pub actor_loss: f64,
    pub lambda: Vec<f64>,
    pub alpha: f64,
    pub entropy: f64,
    /// Batch estimate of the constrained quantity per cost.
    pub cost_estimate: Vec<f64>,
    pub buffer_len: usize,
}

/// Per-sample `U(lo, hi)` fractions, `rows x n`.
pub fn sample_fractions(rows: usize, n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, n), |_| lo + (hi - lo) * rng.random::<f64>())
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

/// `y^r = r + gamma pi(o')^T (Q'(o') - alpha log pi(o'))`, zero bootstrap on terminal rows.
pub fn reward_targets(actor: &Mlp, target: &Mlp, batch: &Batch, alpha: f64, gamma: f64) -> Result<Vec<f64>> {
    let (p, lp) = softmax_rows(&actor.forward(&batch.next_obs)?, Some(&batch.bootstrap_mask()));
    let q = target.forward(&batch.next_obs)?;
    Ok(losses::bellman_targets(&batch.rewards, &losses::soft_value(&p, &lp, &q, alpha), &batch.done, gamma))
}

/// `y^c = c_k + gamma pi(o')^T Q^c'(o')`.
pub fn avg_cost_targets(actor: &Mlp, target: &Mlp, batch: &Batch, k: usize, gamma: f64) -> Result<Vec<f64>> {
    let (p, _) = softmax_rows(&actor.forward(&batch.next_obs)?, Some(&batch.bootstrap_mask()));
    let q = target.forward(&batch.next_obs)?;
    let c: Vec<f64> = batch.costs.column(k).to_vec();
    Ok(losses::bellman_targets(&c, &losses::expected_value(&p, &q), &batch.done, gamma))
}

/// `T[b, j] = c_k + gamma pi(o')^T Q^c'(o', zeta'_j)`, `B x N'`.
pub fn quantile_targets(
    actor: &Mlp,
    target: &Iqn,
    batch: &Batch,
    k: usize,
    taus: &Array2<f64>,
    gamma: f64,
) -> Result<Array2<f64>> {
    let (p, _) = softmax_rows(&actor.forward(&batch.next_obs)?, Some(&batch.bootstrap_mask()));
    let m = taus.ncols();
    let q = target.forward(&batch.next_obs, &flat(taus), m)?;
    let b = batch.len();
    let mut out = Array2::zeros((b, m));
    for s in 0..b {
        for j in 0..m {
            let boot = if batch.done[s] {
                0.0
            } else {
                (0..q.ncols()).map(|a| p[[s, a]] * q[[s * m + j, a]]).sum::<f64>()
            };
            out[[s, j]] = batch.costs[[s, k]] + gamma * boot;
        }
    }
    Ok(out)
}

/// Squared TD loss of a per-action critic and its parameter gradients.
pub fn critic_loss_grad(critic: &Mlp, batch: &Batch, targets: &[f64]) -> Result<(f64, Vec<Array2<f64>>)> {
    let (q, cache) = critic.forward_cached(&batch.obs)?;
    let (loss, dq) = losses::td_loss(&q, &batch.actions, targets);
    Ok((loss, critic.backward(&cache, dq).0))
}

/// Quantile Huber loss of `Q(o, a, zeta_i)` against fixed targets.
pub fn quantile_loss_grad(
    critic: &Iqn,
    batch: &Batch,
    taus: &Array2<f64>,
    targets: &Array2<f64>,
    kappa: f64,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let n = taus.ncols();
    let (q, cache) = critic.forward_cached(&batch.obs, &flat(taus), n)?;
    let b = batch.len();
    let taken = Array2::from_shape_fn((b, n), |(s, i)| q[[s * n + i, batch.actions[s]]]);
    let (loss, dtaken) = losses::quantile_huber_loss(&taken, taus, targets, kappa);
    let mut dq = Array2::zeros(q.raw_dim());
    for s in 0..b {
        for i in 0..n {
            dq[[s * n + i, batch.actions[s]]] = dtaken[[s, i]];
        }
    }
    Ok((loss, critic.backward(&cache, dq)))
}

/// Actor loss for fixed critic outputs and its parameter gradients.
pub fn actor_loss_grad(
    actor: &Mlp,
    batch: &Batch,
    q_reward: &Array2<f64>,
    penalty: &Array2<f64>,
    alpha: f64,
) -> Result<(ActorLoss, Vec<Array2<f64>>)> {
    let (z, cache) = actor.forward_cached(&batch.obs)?;
    let out = losses::actor_loss(&z, &batch.mask, q_reward, penalty, alpha);
    let grads = actor.backward(&cache, out.dlogits.clone()).0;
    Ok((out, grads))
}

/// `Gamma_eps(o, a)`: mean of `Q(o, a, zeta)` over `n` draws of `zeta ~ U(1 - eps, 1)`.
pub fn cvar_estimate(critic: &Iqn, obs: &Array2<f64>, eps: f64, n: usize, rng: &mut impl Rng) -> Result<Array2<f64>> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(config_err(format!("risk level {eps} outside (0, 1]")));
    }
    let taus = sample_fractions(obs.nrows(), n, 1.0 - eps, 1.0, rng);
    critic.mean_over_fractions(obs, &flat(&taus), n)
}

#[derive(Debug, Clone)]
enum CostCritics {
    Avg { online: Vec<Mlp>, target: Vec<Mlp>, opt: Vec<Adam> },
    Quantile { online: Vec<Iqn>, target: Vec<Iqn>, opt: Vec<Adam> },
}

/// Learner for both risk modes.
#[derive(Debug, Clone)]
pub struct PrimalLearner {
    cfg: LearnerConfig,
    actor: Mlp,
    actor_opt: Adam,
    reward: Mlp,
    reward_target: Mlp,
    reward_opt: Adam,
    cost: CostCritics,
    state: LagrangeState,
    rng: ChaCha8Rng,
    counters: OpCounters,
}

impl PrimalLearner {
    pub fn new(cfg: LearnerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = &cfg.architecture;
        let actor = arch.mlp(&mut rng);
        let reward = arch.mlp(&mut rng);
        let k = cfg.num_costs();
        let cost = match cfg.risk_mode {
            RiskMode::Avg => {
                let online: Vec<Mlp> = (0..k).map(|_| arch.mlp(&mut rng)).collect();
                CostCritics::Avg { target: online.clone(), online, opt: vec![Adam::new(cfg.lr_critic); k] }
            }
            RiskMode::Cvar => {
                let online: Vec<Iqn> = (0..k).map(|_| arch.iqn(&mut rng)).collect();
                CostCritics::Quantile { target: online.clone(), online, opt: vec![Adam::new(cfg.lr_critic); k] }
            }
        };
        Ok(Self {
            actor_opt: Adam::new(cfg.lr_actor),
            reward_target: reward.clone(),
            reward_opt: Adam::new(cfg.lr_critic),
            state: LagrangeState::from_config(&cfg),
            cfg,
            actor,
            reward,
            cost,
            rng,
            counters: OpCounters::default(),
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    /// Masked policy probabilities for one observation.
    pub fn action_probabilities(&self, obs: &Observation, mask: &ActionMask) -> Result<Vec<f64>> {
        let z = self.actor.forward_row(obs)?;
        let logits: Vec<f64> = z.iter().zip(mask).map(|(z, m)| if *m > 0.0 { *z } else { z + MASKED_LOGIT }).collect();
        Ok(softmax_entropy(&logits).0)
    }

    pub fn reward_critic(&self) -> &Mlp {
        &self.reward
    }

    pub fn state(&self) -> &LagrangeState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut LagrangeState {
        &mut self.state
    }

    pub fn counters(&self) -> &OpCounters {
        &self.counters
    }

    /// True when every target network equals its online network exactly.
    pub fn targets_match_online(&self) -> bool {
        let same = |a: Vec<&Array2<f64>>, b: Vec<&Array2<f64>>| a.iter().zip(&b).all(|(x, y)| x == y);
        let cost_same = match &self.cost {
            CostCritics::Avg { online, target, .. } => {
                online.iter().zip(target).all(|(o, t)| same(o.tensors(), t.tensors()))
            }
            CostCritics::Quantile { online, target, .. } => {
                online.iter().zip(target).all(|(o, t)| same(o.tensors(), t.tensors()))
            }
        };
        cost_same && same(self.reward.tensors(), self.reward_target.tensors())
    }

    /// Expected-value cost critics (Avg mode only).
    pub fn avg_cost_critics(&self) -> Option<&[Mlp]> {
        match &self.cost {
            CostCritics::Avg { online, .. } => Some(online),
            CostCritics::Quantile { .. } => None,
        }
    }

    /// Quantile cost critics (CVaR mode only).
    pub fn quantile_cost_critics(&self) -> Option<&[Iqn]> {
        match &self.cost {
            CostCritics::Quantile { online, .. } => Some(online),
            CostCritics::Avg { .. } => None,
        }
    }

    fn clip(&self, grads: &mut [Array2<f64>]) {
        if let Some(c) = self.cfg.grad_clip {
            clip_grad_norm(grads, c);
        }
    }

    /// Per-action penalty inputs `P_k(o, .)`: expected cost or CVaR estimate.
    fn cost_outputs(&mut self, obs: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        match &self.cost {
            CostCritics::Avg { online, .. } => online.iter().map(|c| c.forward(obs)).collect(),
            CostCritics::Quantile { online, .. } => {
                let mut out = Vec::with_capacity(online.len());
                for (k, c) in online.iter().enumerate() {
                    self.counters.cvar_estimates += 1;
                    out.push(cvar_estimate(c, obs, self.cfg.risk_levels[k], self.cfg.n_cvar_samples, &mut self.rng)?);
                }
                Ok(out)
            }
        }
    }

    /// One full update on a uniformly sampled mini-batch. Returns `None`
    /// without touching anything while the buffer holds fewer transitions
    /// than the batch size.
    pub fn train_step(&mut self, buffer: &ReplayBuffer) -> Result<Option<StepDiagnostics>> {
        if buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let idx = buffer.sample_indices(self.cfg.batch_size, &mut self.rng);
        let batch = buffer.batch(&idx);
        self.train_on_batch(&batch, buffer.len()).map(Some)
    }

    pub fn train_on_batch(&mut self, batch: &Batch, buffer_len: usize) -> Result<StepDiagnostics> {
        let cfg = self.cfg.clone();
        let b = batch.len();
        if b == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if batch.costs.ncols() != cfg.num_costs() {
            return Err(Error::Shape(format!("{} cost columns, {} thresholds", batch.costs.ncols(), cfg.num_costs())));
        }

        // Reward critic.
        let y = reward_targets(&self.actor, &self.reward_target, batch, self.state.alpha, cfg.gamma_r)?;
        self.counters.reward_targets += 1;
        let (reward_loss, mut g) = critic_loss_grad(&self.reward, batch, &y)?;
        self.clip(&mut g);
        self.reward_opt.step(self.reward.tensors_mut(), &g);

        // Cost critics.
        let mut cost_loss = Vec::with_capacity(cfg.num_costs());
        match &mut self.cost {
            CostCritics::Avg { online, target, opt } => {
                for k in 0..online.len() {
                    let y = avg_cost_targets(&self.actor, &target[k], batch, k, cfg.gamma_c)?;
                    self.counters.avg_cost_targets += 1;
                    let (l, mut g) = critic_loss_grad(&online[k], batch, &y)?;
                    if let Some(c) = cfg.grad_clip {
                        clip_grad_norm(&mut g, c);
                    }
                    opt[k].step(online[k].tensors_mut(), &g);
                    self.counters.avg_cost_updates += 1;
                    cost_loss.push(l);
                }
            }
            CostCritics::Quantile { online, target, opt } => {
                for k in 0..online.len() {
                    let taus = sample_fractions(b, cfg.n_quantiles, 0.0, 1.0, &mut self.rng);
                    let taus_t = sample_fractions(b, cfg.n_target_quantiles, 0.0, 1.0, &mut self.rng);
                    let t = quantile_targets(&self.actor, &target[k], batch, k, &taus_t, cfg.gamma_c)?;
                    self.counters.quantile_forwards += 2;
                    let (l, mut g) = quantile_loss_grad(&online[k], batch, &taus, &t, cfg.huber_kappa)?;
                    self.counters.quantile_losses += 1;
                    if let Some(c) = cfg.grad_clip {
                        clip_grad_norm(&mut g, c);
                    }
                    opt[k].step(online[k].tensors_mut(), &g);
                    cost_loss.push(l);
                }
            }
        }

        // Actor, against the freshly updated critics.
        let q_reward = self.reward.forward(&batch.obs)?;
        let costs = self.cost_outputs(&batch.obs)?;
        let mut penalty = Array2::zeros((b, cfg.architecture.actions));
        for (k, c) in costs.iter().enumerate() {
            penalty.scaled_add(self.state.lambda[k], c);
        }
        let (actor_out, mut g) = actor_loss_grad(&self.actor, batch, &q_reward, &penalty, self.state.alpha)?;
        self.clip(&mut g);
        self.actor_opt.step(self.actor.tensors_mut(), &g);
        self.counters.actor_updates += 1;

        // Multipliers.
        let cost_estimate: Vec<f64> =
            costs.iter().map(|c| losses::expected_value(&actor_out.probs, c).iter().sum::<f64>() / b as f64).collect();
        for (k, est) in cost_estimate.iter().enumerate() {
            self.state.update_lambda(k, *est, cfg.lr_lambda);
        }

        // Temperature.
        let entropy = actor_out.entropy.iter().sum::<f64>() / b as f64;
        self.state.update_alpha(entropy, cfg.lr_alpha);

        // Targets.
        soft_update(&mut self.reward_target, &self.reward, cfg.eta);
        match &mut self.cost {
            CostCritics::Avg { online, target, .. } => {
                for (t, o) in target.iter_mut().zip(online.iter()) {
                    soft_update(t, o, cfg.eta);
                }
            }
            CostCritics::Quantile { online, target, .. } => {
                for (t, o) in target.iter_mut().zip(online.iter()) {
                    soft_update(t, o, cfg.eta);
                }
            }
        }

        self.counters.steps += 1;
        Ok(StepDiagnostics {
            step: self.counters.steps,
            reward_loss,
            cost_loss,
            actor_loss: actor_out.loss,
            lambda: self.state.lambda.clone(),
            alpha: self.state.alpha,
            entropy,
            cost_estimate,
            buffer_len,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.cfg.architecture.clone());
        ck.insert("actor", &self.actor);
        ck.insert("reward", &self.reward);
        ck.insert("reward_target", &self.reward_target);
        match &self.cost {
            CostCritics::Avg { online, target, .. } => {
                for (k, (o, t)) in online.iter().zip(target).enumerate() {
                    ck.insert(&format!("cost{k}"), o);
                    ck.insert(&format!("cost{k}_target"), t);
                }
            }
            CostCritics::Quantile { online, target, .. } => {
                for (k, (o, t)) in online.iter().zip(target).enumerate() {
                    ck.insert(&format!("cost{k}"), o);
                    ck.insert(&format!("cost{k}_target"), t);
                }
            }
        }
        ck.rng = Some(RngState::capture(&self.rng));
        ck.meta = serde_json::json!({
            "risk_mode": self.cfg.risk_mode,
            "lagrange": self.state,
            "steps": self.counters.steps,
        });
        ck
    }
}
