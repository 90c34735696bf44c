//! Observations, per-hop rewards and costs, and the learning router that
//! turns simulator callbacks into replay transitions.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::{central_angle, Direction, EARTH_RADIUS};
use crate::error::{config_err, Result};
use crate::netsim::{ns_to_secs, HopRecord, NetView, Outcome, Packet, PacketRecord, Router};
use crate::nn::{softmax_entropy, Mlp, MASKED_LOGIT};
use crate::routing::{argmax, decide, DecideMode};

pub const OBS_DIM: usize = 17;
pub const NUM_ACTIONS: usize = 4;

pub type Observation = [f64; OBS_DIM];
pub type ActionMask = [f64; NUM_ACTIONS];

/// All-zero observation stored as `o'` of terminal transitions.
pub const TERMINAL_OBS: Observation = [0.0; OBS_DIM];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Delay normaliser, seconds.
    pub d_norm: f64,
    /// Multiplies `tau / d_norm`; -1 penalises delay.
    pub delay_sign: f64,
    /// Per metre of great-circle progress.
    pub progress_scale: f64,
    pub delivered_bonus_base: f64,
    pub ttl_penalty_scale: f64,
    /// Bits per unit of packet size in the delivery bonus.
    pub size_unit: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            d_norm: 0.1,
            delay_sign: -1.0,
            progress_scale: 1.0 / (PI * EARTH_RADIUS),
            delivered_bonus_base: 1.0,
            ttl_penalty_scale: 5.0,
            size_unit: 1e6,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_norm > 0.0) || !(self.size_unit > 0.0) {
            return Err(config_err("d_norm and size_unit must be positive"));
        }
        if self.delay_sign != 1.0 && self.delay_sign != -1.0 {
            return Err(config_err("delay_sign must be +1 or -1"));
        }
        Ok(())
    }

    /// `c_h = D^Q_h / D_norm`.
    pub fn hop_cost(&self, hop: &HopRecord) -> f64 {
        ns_to_secs(hop.queuing) / self.d_norm
    }

    /// `delay_sign * tau / D_norm - c + progress * scale + bonus`.
    pub fn hop_reward(&self, tau: f64, cost: f64, progress_m: f64, bonus: f64) -> f64 {
        self.delay_sign * tau / self.d_norm - cost + progress_m * self.progress_scale + bonus
    }

    pub fn delivered_bonus(&self, size_bits: u64) -> f64 {
        self.delivered_bonus_base + size_bits as f64 / self.size_unit
    }

    /// `-k * age / D_norm - (progress rewarded so far)`.
    pub fn dropped_bonus(&self, age: f64, progress_given: f64) -> f64 {
        -self.ttl_penalty_scale * age / self.d_norm - progress_given
    }
}

/// Local featurisation of a packet held by `sat`.
///
/// Layout: along/cross-track unit direction to the destination (2), distance
/// to the destination over `pi R_E` (1), per-neighbour change in that
/// distance normalised by the grid spacing (4), ISL buffer occupancy (4),
/// `ttl / H` (1), size over the largest size (1), link availability (4).
pub fn observe(view: &NetView<'_>, packet: &Packet, sat: usize) -> (Observation, ActionMask) {
    let mut o = [0.0; OBS_DIM];
    let mut mask = [0.0; NUM_ACTIONS];
    let t = view.orbit_time();
    let c = view.constellation();
    let r = view.sat_position(sat).unit();
    let g = view.station_position(packet.dest).unit();
    let along = c.velocity_direction(sat, t);
    let cross = r.cross(&along);
    let tangent = g.sub(&r.scale(g.dot(&r)));
    if tangent.norm() > 1e-12 {
        let u = tangent.unit();
        o[0] = u.dot(&along);
        o[1] = u.dot(&cross);
    }
    let here = central_angle(&r, &g);
    o[2] = here / PI;
    let cfg = c.config();
    let spacing = (2.0 * PI / cfg.sats_per_plane as f64).max(2.0 * PI / cfg.num_planes as f64);
    let nbs = view.neighbors(sat);
    for d in Direction::ALL {
        let i = d.index();
        if view.link_available(sat, d) {
            mask[i] = 1.0;
            let there = central_angle(&view.sat_position(nbs[i]), &g);
            o[3 + i] = ((there - here) / spacing).clamp(-1.0, 1.0);
            o[7 + i] = view.queue_occupancy(sat, d);
        }
        o[13 + i] = mask[i];
    }
    o[11] = packet.ttl as f64 / view.max_ttl() as f64;
    o[12] = packet.size_bits as f64 / view.max_packet_bits() as f64;
    (o, mask)
}

/// One decision's outcome, as stored in the replay buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub mask: ActionMask,
    pub action: usize,
    pub reward: f64,
    pub costs: Vec<f64>,
    pub next_obs: Observation,
    pub next_mask: ActionMask,
    pub done: bool,
    /// Seconds between the decision and the next decision (or the end).
    pub sojourn: f64,
}

/// Decision source of a [`LearningRouter`].
#[derive(Debug, Clone)]
pub enum PolicyNet {
    /// Categorical policy over actor logits.
    Actor(Mlp),
    /// Epsilon-greedy over Q-values.
    QValues { net: Mlp, epsilon: f64 },
}

impl PolicyNet {
    /// Action probabilities under `mode` for one observation.
    pub fn probabilities(&self, obs: &Observation, mask: &ActionMask, mode: DecideMode) -> [f64; NUM_ACTIONS] {
        let valid = mask.iter().filter(|m| **m > 0.0).count().max(1) as f64;
        let out = match self {
            PolicyNet::Actor(net) | PolicyNet::QValues { net, .. } => net.forward_row(obs).expect("observation width"),
        };
        let mut p = [0.0; NUM_ACTIONS];
        match self {
            PolicyNet::Actor(_) => {
                let z: Vec<f64> = out.iter().zip(mask).map(|(z, m)| if *m > 0.0 { *z } else { z + MASKED_LOGIT }).collect();
                let (probs, _) = softmax_entropy(&z);
                p.copy_from_slice(&probs);
            }
            PolicyNet::QValues { epsilon, .. } => {
                let q: Vec<f64> = out.iter().zip(mask).map(|(q, m)| if *m > 0.0 { *q } else { f64::NEG_INFINITY }).collect();
                let best = argmax(&q);
                let eps = if mode == DecideMode::Sample { *epsilon } else { 0.0 };
                for (i, pi) in p.iter_mut().enumerate() {
                    if mask[i] > 0.0 {
                        *pi = eps / valid;
                    }
                }
                p[best] += 1.0 - eps;
            }
        }
        p
    }
}

#[derive(Debug, Clone)]
struct Pending {
    obs: Observation,
    mask: ActionMask,
    action: usize,
    sat: usize,
    hop_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterStats {
    pub decisions: u64,
    pub transitions: u64,
    /// Decisions still waiting for their outcome when the epoch ended.
    pub unfinished: u64,
    pub non_finite_observations: u64,
}

/// Routes with a neural policy and, when collecting, emits one transition
/// per decision.
pub struct LearningRouter {
    policy: PolicyNet,
    mode: DecideMode,
    collect: bool,
    rewards: RewardConfig,
    rng: ChaCha8Rng,
    pending: HashMap<u64, Pending>,
    progress: HashMap<u64, f64>,
    outbox: Vec<Transition>,
    stats: RouterStats,
}

impl LearningRouter {
    pub fn new(policy: PolicyNet, mode: DecideMode, collect: bool, rewards: RewardConfig, seed: u64) -> Self {
        Self {
            policy,
            mode,
            collect,
            rewards,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: HashMap::new(),
            progress: HashMap::new(),
            outbox: Vec::new(),
            stats: RouterStats::default(),
        }
    }

    pub fn set_policy(&mut self, policy: PolicyNet) {
        self.policy = policy;
    }

    pub fn policy(&self) -> &PolicyNet {
        &self.policy
    }

    pub fn stats(&self) -> &RouterStats {
        &self.stats
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn drain_transitions(&mut self) -> Vec<Transition> {
        std::mem::take(&mut self.outbox)
    }

    /// Drops decisions still in flight; call at the end of an epoch.
    pub fn finish_epoch(&mut self) {
        self.stats.unfinished += self.pending.len() as u64;
        self.pending.clear();
        self.progress.clear();
    }

    fn gcd(view: &NetView<'_>, sat: usize, dest: usize) -> f64 {
        central_angle(&view.sat_position(sat), &view.station_position(dest)) * view.constellation().earth_radius()
    }

    /// Closes the pending decision of packet `id` using the hops recorded
    /// since the decision.
    #[allow(clippy::too_many_arguments)]
    fn complete(
        &mut self,
        view: &NetView<'_>,
        id: u64,
        dest: usize,
        hops: &[HopRecord],
        next: Option<(Observation, ActionMask)>,
        terminal: Option<(Outcome, f64, u64)>,
        p: Pending,
    ) {
        let span = &hops[p.hop_index.min(hops.len())..];
        let tau = ns_to_secs(span.iter().map(|h| h.total()).sum());
        let cost: f64 = span.iter().map(|h| self.rewards.hop_cost(h)).sum();
        let moved_to = span.first().and_then(|h| match h.to {
            crate::constellation::NodeId::Satellite(s) => Some(s),
            crate::constellation::NodeId::GroundStation(_) => None,
        });
        let progress_m = moved_to.map_or(0.0, |s| Self::gcd(view, p.sat, dest) - Self::gcd(view, s, dest));
        let given = self.progress.entry(id).or_insert(0.0);
        *given += progress_m * self.rewards.progress_scale;
        let given = *given;
        let bonus = match terminal {
            None => 0.0,
            Some((Outcome::Delivered, _, size)) => self.rewards.delivered_bonus(size),
            Some((Outcome::Dropped(_), age, _)) => self.rewards.dropped_bonus(age, given),
        };
        let reward = self.rewards.hop_reward(tau, cost, progress_m, bonus);
        let (next_obs, next_mask, done) = match next {
            Some((o, m)) => (o, m, false),
            None => (TERMINAL_OBS, [0.0; NUM_ACTIONS], true),
        };
        self.stats.transitions += 1;
        self.outbox.push(Transition {
            obs: p.obs,
            mask: p.mask,
            action: p.action,
            reward,
            costs: vec![cost],
            next_obs,
            next_mask,
            done,
            sojourn: tau,
        });
    }
}

impl Router for LearningRouter {
    fn route(&mut self, net: &NetView<'_>, packet: &Packet, sat: usize) -> Direction {
        let (obs, mask) = observe(net, packet, sat);
        if obs.iter().any(|v| !v.is_finite()) {
            self.stats.non_finite_observations += 1;
        }
        if let Some(p) = self.pending.remove(&packet.id) {
            self.complete(net, packet.id, packet.dest, &packet.hops, Some((obs, mask)), None, p);
        }
        let probs = self.policy.probabilities(&obs, &mask, self.mode);
        let action = decide(&probs, self.mode, &mut self.rng).action;
        self.stats.decisions += 1;
        if self.collect {
            self.pending.insert(
                packet.id,
                Pending { obs, mask, action: action.index(), sat, hop_index: packet.hops.len() },
            );
        }
        action
    }

    fn on_terminal(&mut self, net: &NetView<'_>, record: &PacketRecord) {
        if let Some(p) = self.pending.remove(&record.id) {
            let age = ns_to_secs(record.finished - record.created);
            let term = Some((record.outcome, age, record.size_bits));
            self.complete(net, record.id, record.dest, &record.hops, None, term, p);
        }
        self.progress.remove(&record.id);
    }
}

/// Uniform random exploration helper for tests and warm-up.
pub fn random_mask_action(mask: &ActionMask, rng: &mut impl Rng) -> usize {
    let valid: Vec<usize> = (0..NUM_ACTIONS).filter(|i| mask[*i] > 0.0).collect();
    valid[rng.random_range(0..valid.len())]
}
