//! Shaped-reward DQN baseline: `r_bar = r + sign * sum_k c_k`, max-Q targets,
//! epsilon-greedy behaviour, no constraints.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{losses, Batch, LearnerConfig, ReplayBuffer};
use crate::error::Result;
use crate::nn::{clip_grad_norm, soft_update, Adam, Checkpoint, Mlp, Module, RngState};

#[derive(Debug, Clone)]
pub struct Madqn {
    cfg: LearnerConfig,
    q: Mlp,
    target: Mlp,
    opt: Adam,
    rng: ChaCha8Rng,
    steps: u64,
}

impl Madqn {
    pub fn new(cfg: LearnerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = cfg.architecture.mlp(&mut rng);
        Ok(Self { target: q.clone(), opt: Adam::new(cfg.lr_critic), q, cfg, rng, steps: 0 })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn q_network(&self) -> &Mlp {
        &self.q
    }

    pub fn target_network(&self) -> &Mlp {
        &self.target
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `r + sign * sum_k c_k` per row.
    pub fn shaped_rewards(&self, batch: &Batch) -> Vec<f64> {
        batch
            .rewards
            .iter()
            .zip(batch.costs.rows())
            .map(|(r, c)| r + self.cfg.madqn_cost_sign * c.sum())
            .collect()
    }

    /// `r_bar + gamma * max_a' Q'(o', a')` over available actions.
    pub fn targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let qn = self.target.forward(&batch.next_obs)?;
        let mask = batch.bootstrap_mask();
        let best: Vec<f64> = (0..batch.len())
            .map(|s| {
                (0..qn.ncols()).filter(|a| mask[[s, *a]] > 0.0).map(|a| qn[[s, a]]).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok(losses::bellman_targets(&self.shaped_rewards(batch), &best, &batch.done, self.cfg.gamma_r))
    }

    /// Loss and gradients w.r.t. the online Q-network for given targets.
    pub fn loss_grad(q: &Mlp, batch: &Batch, targets: &[f64]) -> Result<(f64, Vec<Array2<f64>>)> {
        super::critic_loss_grad(q, batch, targets)
    }

    pub fn update(&mut self, batch: &Batch) -> Result<f64> {
        let y = self.targets(batch)?;
        let (loss, mut g) = Self::loss_grad(&self.q, batch, &y)?;
        if let Some(c) = self.cfg.grad_clip {
            clip_grad_norm(&mut g, c);
        }
        self.opt.step(self.q.tensors_mut(), &g);
        soft_update(&mut self.target, &self.q, self.cfg.eta);
        self.steps += 1;
        Ok(loss)
    }

    pub fn train_step(&mut self, buffer: &ReplayBuffer) -> Result<Option<f64>> {
        if buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let idx = buffer.sample_indices(self.cfg.batch_size, &mut self.rng);
        self.update(&buffer.batch(&idx)).map(Some)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.cfg.architecture.clone());
        ck.insert("q", &self.q);
        ck.insert("q_target", &self.target);
        ck.rng = Some(RngState::capture(&self.rng));
        ck.meta = serde_json::json!({ "steps": self.steps, "epsilon": self.cfg.madqn_epsilon });
        ck
    }
}
