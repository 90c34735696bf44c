//! Per-run routing metrics.

use serde::{Deserialize, Serialize};

use crate::netsim::{ns_to_secs, DropCause, Outcome, PacketRecord};

/// Mean of the `ceil(eps * n)` largest samples; `None` for empty input or
/// `eps` outside `(0, 1]`.
pub fn empirical_cvar(samples: &[f64], eps: f64) -> Option<f64> {
    if samples.is_empty() || !(eps > 0.0 && eps <= 1.0) {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let n = s.len();
    // ceil(eps * n) without the rounding of the product, e.g. 0.3 * 10.
    let mut k = ((eps * n as f64).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / n as f64 >= eps {
        k -= 1;
    }
    Some(s[..k].iter().sum::<f64>() / k as f64)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Seconds per bin; the last bin collects everything beyond.
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bin_width: f64, bins: usize, xs: &[f64]) -> Self {
        let mut counts = vec![0; bins];
        for x in xs {
            let i = ((x / bin_width).floor().max(0.0) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self { bin_width, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Per-packet queuing budget D^Q_max, seconds.
    pub queuing_threshold: f64,
    pub cvar_level: f64,
    pub histogram_bin: f64,
    pub histogram_bins: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { queuing_threshold: 0.01, cvar_level: 0.25, histogram_bin: 0.002, histogram_bins: 150 }
    }
}

/// Routing quality of one run (or a pool of runs). Delays are seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub algorithm: String,
    pub seed: u64,
    pub scenario_hash: String,
    pub duration: f64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub dropped_ttl: u64,
    pub dropped_buffer: u64,
    pub dropped_link_refused: u64,
    /// Delivered bits per second.
    pub throughput: f64,
    pub drop_rate: f64,
    pub e2e_mean: f64,
    pub e2e_std: f64,
    pub queuing_mean: f64,
    pub queuing_std: f64,
    pub queuing_cvar: f64,
    pub cvar_level: f64,
    pub queuing_threshold: f64,
    /// Fraction of finished packets that were dropped or exceeded the queuing budget.
    pub violation_rate: f64,
    /// Excess over the budget, delivered violators only.
    pub violation_magnitude_mean: f64,
    pub violation_magnitude_std: f64,
    pub propagation_mean: f64,
    pub transmission_mean: f64,
    pub e2e_histogram: Histogram,
    pub queuing_histogram: Histogram,
    #[serde(default)]
    pub history: Vec<IntervalMetrics>,
}

/// Short per-report-interval summary used for training curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub epoch: usize,
    /// Seconds since the start of training.
    pub time: f64,
    pub delivered: u64,
    pub dropped: u64,
    pub drop_rate: f64,
    pub e2e_mean: f64,
    pub queuing_mean: f64,
    pub queuing_cvar: f64,
    pub throughput: f64,
}

impl MetricsReport {
    pub fn from_records(records: &[PacketRecord], duration: f64, cfg: &MetricsConfig) -> Self {
        let delivered: Vec<&PacketRecord> = records.iter().filter(|r| r.delivered()).collect();
        let mut drops = [0u64; 3];
        for r in records {
            if let Outcome::Dropped(c) = r.outcome {
                drops[match c {
                    DropCause::TtlExpired => 0,
                    DropCause::BufferFull => 1,
                    DropCause::LinkRefused => 2,
                }] += 1;
            }
        }
        let dropped: u64 = drops.iter().sum();
        let finished = delivered.len() as u64 + dropped;
        let e2e: Vec<f64> = delivered.iter().map(|r| ns_to_secs(r.e2e())).collect();
        let queuing: Vec<f64> = delivered.iter().map(|r| ns_to_secs(r.cum_queuing)).collect();
        let prop: Vec<f64> = delivered.iter().map(|r| ns_to_secs(r.propagation())).collect();
        let tx: Vec<f64> = delivered.iter().map(|r| ns_to_secs(r.transmission())).collect();
        let excess: Vec<f64> =
            queuing.iter().filter(|q| **q > cfg.queuing_threshold).map(|q| q - cfg.queuing_threshold).collect();
        let bits: u64 = delivered.iter().map(|r| r.size_bits).sum();
        let (e2e_mean, e2e_std) = mean_std(&e2e);
        let (queuing_mean, queuing_std) = mean_std(&queuing);
        let (vm, vs) = mean_std(&excess);
        let frac = |x: u64| if finished == 0 { 0.0 } else { x as f64 / finished as f64 };
        Self {
            label: String::new(),
            algorithm: String::new(),
            seed: 0,
            scenario_hash: String::new(),
            duration,
            generated: records.len() as u64,
            delivered: delivered.len() as u64,
            dropped,
            dropped_ttl: drops[0],
            dropped_buffer: drops[1],
            dropped_link_refused: drops[2],
            throughput: if duration > 0.0 { bits as f64 / duration } else { 0.0 },
            drop_rate: frac(dropped),
            e2e_mean,
            e2e_std,
            queuing_mean,
            queuing_std,
            queuing_cvar: empirical_cvar(&queuing, cfg.cvar_level).unwrap_or(0.0),
            cvar_level: cfg.cvar_level,
            queuing_threshold: cfg.queuing_threshold,
            violation_rate: frac(dropped + excess.len() as u64),
            violation_magnitude_mean: vm,
            violation_magnitude_std: vs,
            propagation_mean: mean_std(&prop).0,
            transmission_mean: mean_std(&tx).0,
            e2e_histogram: Histogram::new(cfg.histogram_bin, cfg.histogram_bins, &e2e),
            queuing_histogram: Histogram::new(cfg.histogram_bin, cfg.histogram_bins, &queuing),
            history: Vec::new(),
        }
    }

    pub fn interval(&self, epoch: usize, time: f64) -> IntervalMetrics {
        IntervalMetrics {
            epoch,
            time,
            delivered: self.delivered,
            dropped: self.dropped,
            drop_rate: self.drop_rate,
            e2e_mean: self.e2e_mean,
            queuing_mean: self.queuing_mean,
            queuing_cvar: self.queuing_cvar,
            throughput: self.throughput,
        }
    }
}
