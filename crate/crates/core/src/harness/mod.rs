//! Experiment orchestration: scenarios, training, evaluation, comparison.

mod compare;
mod metrics;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constellation::{build_walker, GroundStation, WalkerConfig};
use crate::env::{LearningRouter, PolicyNet, RewardConfig};
use crate::error::{config_err, Error, Result};
use crate::learner::{Madqn, PrimalLearner, ReplayBuffer, RiskMode, LearnerConfig};
use crate::linkmodel::LinkConfig;
use crate::netsim::{ns_to_secs, PacketRecord, Router, SimConfig, SimSetup, Simulator, Step, TrafficConfig};
use crate::nn::Checkpoint;
use crate::routing::{DecideMode, RandomRouter, SpfRouter};

pub use compare::{compare, Comparison};
pub use metrics::{empirical_cvar, mean_std, Histogram, IntervalMetrics, MetricsConfig, MetricsReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Simulated seconds between gradient steps.
    pub train_interval: f64,
    /// Simulated seconds between metrics rows.
    pub report_interval: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, train_interval: 0.001, report_interval: 2.0 }
    }
}

/// Full description of an experiment. Read from TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub name: String,
    /// Evaluation seeds.
    pub seeds: Vec<u64>,
    pub constellation: WalkerConfig,
    pub stations: Vec<GroundStation>,
    pub links: LinkConfig,
    pub traffic: TrafficConfig,
    pub sim: SimConfig,
    pub rewards: RewardConfig,
    pub learner: LearnerConfig,
    pub train: TrainConfig,
    pub metrics: MetricsConfig,
}

pub fn default_stations() -> Vec<GroundStation> {
    vec![
        GroundStation::new("Luxembourg", 49.6116, 6.1319, 15.0),
        GroundStation::new("Dubai", 25.2048, 55.2708, 15.0),
        GroundStation::new("Beijing", 39.9042, 116.4074, 15.0),
    ]
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seeds: vec![1, 2, 3, 4, 5],
            constellation: WalkerConfig::default(),
            stations: default_stations(),
            links: LinkConfig::default(),
            traffic: TrafficConfig::default(),
            sim: SimConfig::default(),
            rewards: RewardConfig::default(),
            learner: LearnerConfig::default(),
            train: TrainConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.constellation.validate()?;
        if self.stations.len() < 2 {
            return Err(config_err("at least two ground stations are needed"));
        }
        for s in &self.stations {
            s.validate()?;
        }
        self.links.validate()?;
        self.traffic.validate()?;
        self.sim.validate()?;
        self.rewards.validate()?;
        self.learner.validate()?;
        if self.train.epochs == 0 || !(self.train.train_interval > 0.0) || !(self.train.report_interval > 0.0) {
            return Err(config_err("train epochs and intervals must be positive"));
        }
        let m = &self.metrics;
        if !(m.cvar_level > 0.0 && m.cvar_level <= 1.0) || !(m.queuing_threshold >= 0.0) {
            return Err(config_err("metrics cvar level must lie in (0, 1] and the threshold be non-negative"));
        }
        if !(m.histogram_bin > 0.0) || m.histogram_bins == 0 {
            return Err(config_err("histogram bins must be positive"));
        }
        Ok(())
    }

    pub fn setup(&self, train: bool) -> Result<SimSetup> {
        Ok(SimSetup {
            constellation: build_walker(&self.constellation)?,
            stations: self.stations.clone(),
            links: self.links.clone(),
            traffic: self.traffic.clone(),
            sim: self.sim.clone(),
            train_interval: train.then_some(self.train.train_interval),
            metrics_interval: Some(self.train.report_interval),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    PrimalAvg,
    PrimalCvar,
    Madqn,
    Spf,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::PrimalAvg, Algorithm::PrimalCvar, Algorithm::Madqn, Algorithm::Spf, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::PrimalAvg => "primal-avg",
            Algorithm::PrimalCvar => "primal-cvar",
            Algorithm::Madqn => "madqn",
            Algorithm::Spf => "spf",
            Algorithm::Random => "random",
        }
    }

    pub fn learns(self) -> bool {
        matches!(self, Algorithm::PrimalAvg | Algorithm::PrimalCvar | Algorithm::Madqn)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| config_err(format!("unknown algorithm {s:?}")))
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TRAIN_STREAM: u64 = 1 << 32;
const EVAL_STREAM: u64 = 2 << 32;

enum Trainer {
    Primal(Box<PrimalLearner>),
    Dqn(Box<Madqn>),
}

impl Trainer {
    fn new(algo: Algorithm, cfg: &LearnerConfig, seed: u64) -> Result<Self> {
        let mut cfg = cfg.clone();
        match algo {
            Algorithm::PrimalAvg | Algorithm::PrimalCvar => {
                cfg.risk_mode = if algo == Algorithm::PrimalAvg { RiskMode::Avg } else { RiskMode::Cvar };
                Ok(Trainer::Primal(Box::new(PrimalLearner::new(cfg, seed)?)))
            }
            Algorithm::Madqn => Ok(Trainer::Dqn(Box::new(Madqn::new(cfg, seed)?))),
            other => Err(config_err(format!("{other} is not a learning algorithm"))),
        }
    }

    fn policy(&self) -> PolicyNet {
        match self {
            Trainer::Primal(l) => PolicyNet::Actor(l.actor().clone()),
            Trainer::Dqn(d) => PolicyNet::QValues { net: d.q_network().clone(), epsilon: d.config().madqn_epsilon },
        }
    }

    fn step(&mut self, buffer: &ReplayBuffer) -> Result<Option<serde_json::Value>> {
        let to_value = |v| serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()));
        match self {
            Trainer::Primal(l) => l.train_step(buffer)?.map(to_value).transpose(),
            Trainer::Dqn(d) => Ok(d.train_step(buffer)?.map(|loss| serde_json::json!({"step": d.steps(), "q_loss": loss}))),
        }
    }

    fn checkpoint(&self) -> Checkpoint {
        match self {
            Trainer::Primal(l) => l.checkpoint(),
            Trainer::Dqn(d) => d.checkpoint(),
        }
    }
}

/// One diagnostics row, written at every report interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub epoch: usize,
    pub time: f64,
    pub scenario_hash: String,
    pub seed: u64,
    pub transitions: usize,
    pub learner: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<IntervalMetrics>,
    pub diagnostics: Vec<DiagnosticsRow>,
    /// Metrics of the last training epoch.
    pub last_epoch: MetricsReport,
}

fn label_report(mut r: MetricsReport, hash: &str, algo: Algorithm, seed: u64) -> MetricsReport {
    r.label = format!("{}-{}", algo, seed);
    r.algorithm = algo.name().into();
    r.seed = seed;
    r.scenario_hash = hash.into();
    r
}

/// Trains `algo` on `scenario`. Each epoch is a fresh simulation whose traffic
/// stream is derived from `seed` and the epoch index; learner state carries over.
pub fn run_train(scenario: &Scenario, algo: Algorithm, seed: u64) -> Result<TrainOutcome> {
    run_train_with(scenario, algo, seed, |_| {})
}

/// [`run_train`] with a callback receiving each metrics row as it is produced.
pub fn run_train_with(
    scenario: &Scenario,
    algo: Algorithm,
    seed: u64,
    mut on_row: impl FnMut(&IntervalMetrics),
) -> Result<TrainOutcome> {
    scenario.validate()?;
    if !algo.learns() {
        return Err(config_err(format!("{algo} is not a learning algorithm")));
    }
    let hash = scenario.hash();
    let mut trainer = Trainer::new(algo, &scenario.learner, derive_seed(seed, 0))?;
    let mut buffer = ReplayBuffer::new(scenario.learner.buffer_capacity);
    let mut history = Vec::new();
    let mut diagnostics = Vec::new();
    let mut last_epoch = None;
    let epoch_len = scenario.sim.epoch_duration;
    for epoch in 0..scenario.train.epochs {
        let mut sim = Simulator::new(scenario.setup(true)?, derive_seed(seed, TRAIN_STREAM + epoch as u64))?;
        let mut router = LearningRouter::new(
            trainer.policy(),
            DecideMode::Sample,
            true,
            scenario.rewards.clone(),
            derive_seed(seed, TRAIN_STREAM + (1 << 20) + epoch as u64),
        );
        let mut last_diag = serde_json::Value::Null;
        let mut reported = 0;
        let mut last_tick = 0;
        while let Some(step) = sim.run_until_control(&mut router)? {
            match step {
                Step::Train => {
                    buffer.extend(router.drain_transitions());
                    if let Some(d) = trainer.step(&buffer)? {
                        last_diag = d;
                        router.set_policy(trainer.policy());
                    }
                }
                Step::Metrics => {
                    let now = sim.now();
                    let recs = &sim.records()[reported..];
                    let r = MetricsReport::from_records(recs, ns_to_secs(now - last_tick), &scenario.metrics);
                    let row = r.interval(epoch, epoch as f64 * epoch_len + ns_to_secs(now));
                    on_row(&row);
                    history.push(row);
                    diagnostics.push(DiagnosticsRow {
                        epoch,
                        time: epoch as f64 * epoch_len + ns_to_secs(now),
                        scenario_hash: hash.clone(),
                        seed,
                        transitions: buffer.len(),
                        learner: last_diag.clone(),
                    });
                    reported = sim.records().len();
                    last_tick = now;
                }
                Step::Event => {}
            }
        }
        buffer.extend(router.drain_transitions());
        router.finish_epoch();
        let r = MetricsReport::from_records(sim.records(), epoch_len, &scenario.metrics);
        last_epoch = Some(label_report(r, &hash, algo, seed));
    }
    let mut checkpoint = trainer.checkpoint();
    if let serde_json::Value::Object(m) = &mut checkpoint.meta {
        m.insert("algorithm".into(), serde_json::json!(algo.name()));
        m.insert("seed".into(), serde_json::json!(seed));
        m.insert("scenario_hash".into(), serde_json::json!(hash));
        m.insert("scenario".into(), serde_json::json!(scenario.to_toml()));
    }
    let mut last_epoch = last_epoch.expect("at least one epoch");
    last_epoch.history = history.clone();
    Ok(TrainOutcome { checkpoint, history, diagnostics, last_epoch })
}

/// Where an evaluated policy comes from.
#[derive(Debug, Clone)]
pub enum PolicySource {
    Checkpoint(Box<Checkpoint>),
    Baseline(Algorithm),
}

impl PolicySource {
    pub fn algorithm(&self) -> Result<Algorithm> {
        match self {
            PolicySource::Baseline(a) => Ok(*a),
            PolicySource::Checkpoint(c) => c
                .meta
                .get("algorithm")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Parse("checkpoint does not name its algorithm".into()))?
                .parse(),
        }
    }

    fn router(&self, scenario: &Scenario, seed: u64) -> Result<Box<dyn Router>> {
        let algo = self.algorithm()?;
        Ok(match (self, algo) {
            (_, Algorithm::Spf) => Box::new(SpfRouter::new()),
            (_, Algorithm::Random) => Box::new(RandomRouter::new(seed)),
            (PolicySource::Checkpoint(c), a) => {
                let mut net = c.architecture.mlp(&mut ChaCha8Rng::seed_from_u64(0));
                let policy = if a == Algorithm::Madqn {
                    c.load("q", &mut net)?;
                    PolicyNet::QValues { net, epsilon: 0.0 }
                } else {
                    c.load("actor", &mut net)?;
                    PolicyNet::Actor(net)
                };
                if net_input(&policy) != crate::env::OBS_DIM {
                    return Err(Error::Shape("checkpoint input width differs from the observation".into()));
                }
                Box::new(LearningRouter::new(policy, DecideMode::Greedy, false, scenario.rewards.clone(), seed))
            }
            (PolicySource::Baseline(a), _) => return Err(config_err(format!("{a} needs a checkpoint"))),
        })
    }
}

fn net_input(p: &PolicyNet) -> usize {
    match p {
        PolicyNet::Actor(n) | PolicyNet::QValues { net: n, .. } => n.input_dim(),
    }
}

/// Scenario stored inside a checkpoint written by [`run_train`].
pub fn checkpoint_scenario(c: &Checkpoint) -> Result<Scenario> {
    let text = c
        .meta
        .get("scenario")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Parse("checkpoint carries no scenario".into()))?;
    Scenario::from_toml(text)
}

/// One evaluation epoch with `router`; returns the packet records.
pub fn run_epoch(scenario: &Scenario, router: &mut dyn Router, seed: u64) -> Result<Vec<PacketRecord>> {
    let mut sim = Simulator::new(scenario.setup(false)?, seed)?;
    sim.run_epoch(router)?;
    Ok(sim.take_records())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub per_seed: Vec<MetricsReport>,
    /// Metrics over the packets of all seeds together.
    pub pooled: MetricsReport,
}

/// Greedy evaluation without learning, one epoch per seed.
pub fn run_eval(scenario: &Scenario, source: &PolicySource, seeds: &[u64]) -> Result<EvalOutcome> {
    scenario.validate()?;
    if seeds.is_empty() {
        return Err(config_err("evaluation needs at least one seed"));
    }
    let algo = source.algorithm()?;
    let hash = scenario.hash();
    let mut per_seed = Vec::new();
    let mut all = Vec::new();
    for &seed in seeds {
        let mut router = source.router(scenario, derive_seed(seed, EVAL_STREAM + 1))?;
        let recs = run_epoch(scenario, router.as_mut(), derive_seed(seed, EVAL_STREAM))?;
        let r = MetricsReport::from_records(&recs, scenario.sim.epoch_duration, &scenario.metrics);
        per_seed.push(label_report(r, &hash, algo, seed));
        all.extend(recs);
    }
    let total = scenario.sim.epoch_duration * seeds.len() as f64;
    let mut pooled = label_report(MetricsReport::from_records(&all, total, &scenario.metrics), &hash, algo, seeds[0]);
    pooled.label = algo.name().into();
    Ok(EvalOutcome { per_seed, pooled })
}
