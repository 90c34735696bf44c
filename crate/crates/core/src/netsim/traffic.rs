//! Poisson packet generation between ground stations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

use super::{secs_to_ns, SimTime};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeClass {
    pub bits: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Packets per second over the whole network.
    pub rate: f64,
    pub sizes: Vec<SizeClass>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            rate: 10_000.0,
            sizes: vec![
                SizeClass { bits: 64_800, probability: 0.8 },
                SizeClass { bits: 16_200, probability: 0.2 },
            ],
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(config_err("traffic rate must be non-negative"));
        }
        if self.sizes.is_empty() {
            return Err(config_err("traffic needs at least one packet size"));
        }
        let total: f64 = self.sizes.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-9 || self.sizes.iter().any(|s| s.probability < 0.0 || s.bits == 0) {
            return Err(config_err("packet size probabilities must be non-negative and sum to 1"));
        }
        Ok(())
    }

    pub fn max_size(&self) -> u64 {
        self.sizes.iter().map(|s| s.bits).max().unwrap_or(1)
    }

    pub fn mean_size(&self) -> f64 {
        self.sizes.iter().map(|s| s.bits as f64 * s.probability).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketSpec {
    pub time: SimTime,
    pub source: usize,
    pub dest: usize,
    pub size_bits: u64,
}

/// Stream of packet creations with exponential inter-arrival times; source
/// and destination are drawn uniformly over ordered pairs of distinct
/// stations.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    cfg: TrafficConfig,
    stations: usize,
    rng: ChaCha8Rng,
    clock: f64,
    end: f64,
}

impl TrafficGenerator {
    pub fn new(cfg: &TrafficConfig, stations: usize, rng: ChaCha8Rng, end_secs: f64) -> Self {
        Self { cfg: cfg.clone(), stations, rng, clock: 0.0, end: end_secs }
    }

    fn draw_size(&mut self) -> u64 {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for s in &self.cfg.sizes {
            acc += s.probability;
            if u < acc {
                return s.bits;
            }
        }
        self.cfg.sizes.last().map(|s| s.bits).unwrap_or(0)
    }
}

impl Iterator for TrafficGenerator {
    type Item = PacketSpec;

    fn next(&mut self) -> Option<PacketSpec> {
        if self.cfg.rate <= 0.0 || self.stations < 2 {
            return None;
        }
        let gap = Exp::new(self.cfg.rate).expect("positive rate").sample(&mut self.rng);
        self.clock += gap;
        if self.clock >= self.end {
            self.clock = self.end;
            return None;
        }
        let source = self.rng.random_range(0..self.stations);
        let mut dest = self.rng.random_range(0..self.stations - 1);
        if dest >= source {
            dest += 1;
        }
        let size_bits = self.draw_size();
        Some(PacketSpec { time: secs_to_ns(self.clock), source, dest, size_bits })
    }
}

/// All packets of one epoch, in creation order.
pub fn generate_traffic(cfg: &TrafficConfig, stations: usize, rng: ChaCha8Rng, epoch_secs: f64) -> Vec<PacketSpec> {
    TrafficGenerator::new(cfg, stations, rng, epoch_secs).collect()
}
