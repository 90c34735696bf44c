//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Everything is `f64`. Parameters are `Array2` tensors (biases are `1 x n`)
//! so optimizers and target updates treat all of them alike.

mod adam;
mod checkpoint;
mod iqn;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{clip_grad_norm, Adam};
pub use checkpoint::{Checkpoint, NamedArray, ParameterBlock, RngState};
pub use iqn::{cosine_features, Iqn, IqnCache};

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Anything owning trainable tensors in a fixed order.
pub trait Module {
    fn tensors(&self) -> Vec<&Array2<f64>>;
    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>>;
    fn names(&self) -> Vec<String>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// `target <- eta * online + (1 - eta) * target` over every tensor.
pub fn soft_update<M: Module>(target: &mut M, online: &M, eta: f64) {
    for (t, o) in target.tensors_mut().into_iter().zip(online.tensors()) {
        if eta == 1.0 {
            t.assign(o);
        } else {
            t.zip_mut_with(o, |t, o| *t = eta * o + (1.0 - eta) * *t);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array2<f64>,
}

impl Linear {
    /// Uniform in `[-s/sqrt(fan_in), s/sqrt(fan_in)]`, zero bias.
    pub fn new(input: usize, output: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let bound = scale / (input as f64).sqrt();
        let w = Array2::from_shape_fn((input, output), |_| rng.random_range(-bound..=bound));
        Self { w, b: Array2::zeros((1, output)) }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self { w: Array2::zeros((input, output)), b: Array2::zeros((1, output)) }
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

/// Dense stack with SiLU between layers. The last layer is linear unless
/// `final_activation` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub final_activation: bool,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`. `head_scale` shrinks the last layer's
    /// init range.
    pub fn new(sizes: &[usize], final_activation: bool, head_scale: f64, rng: &mut impl Rng) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| Linear::new(sizes[i], sizes[i + 1], if i + 1 == n { head_scale } else { 1.0 }, rng))
            .collect();
        Self { layers, final_activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty mlp").output_dim()
    }

    fn activated(&self, i: usize) -> bool {
        i + 1 < self.layers.len() || self.final_activation
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("expected {} input columns, got {}", self.input_dim(), x.ncols())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(&h);
            if self.activated(i) {
                h.mapv_inplace(silu);
            }
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        self.check_input(x)?;
        let mut cache = MlpCache { inputs: Vec::new(), pre: Vec::new() };
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.forward(&h);
            cache.inputs.push(h);
            h = if self.activated(i) { z.mapv(silu) } else { z.clone() };
            cache.pre.push(z);
        }
        Ok((h, cache))
    }

    /// Single observation, no batching overhead beyond one row.
    pub fn forward_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let a = Array2::from_shape_vec((1, x.len()), x.to_vec()).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.forward(&a)?.row(0).to_vec())
    }

    /// Gradients of a scalar loss given `dy = dL/d(output)`. Returns the
    /// per-tensor gradients in [`Module::tensors`] order and `dL/dx`.
    pub fn backward(&self, cache: &MlpCache, dy: Array2<f64>) -> (Vec<Array2<f64>>, Array2<f64>) {
        let mut grads = vec![Array2::zeros((0, 0)); 2 * self.layers.len()];
        let mut d = dy;
        for i in (0..self.layers.len()).rev() {
            if self.activated(i) {
                d.zip_mut_with(&cache.pre[i], |g, z| *g *= silu_grad(*z));
            }
            grads[2 * i] = cache.inputs[i].t().dot(&d);
            grads[2 * i + 1] = d.sum_axis(Axis(0)).insert_axis(Axis(0));
            d = d.dot(&self.layers[i].w.t());
        }
        (grads, d)
    }
}

impl Module for Mlp {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    fn names(&self) -> Vec<String> {
        (0..self.layers.len()).flat_map(|i| [format!("l{i}.w"), format!("l{i}.b")]).collect()
    }
}

/// Logit offset for masked-out actions; their probability underflows to 0.
pub const MASKED_LOGIT: f64 = -1e9;

/// Numerically stable softmax and entropy (nats) of one logit vector.
pub fn softmax_entropy(logits: &[f64]) -> (Vec<f64>, f64) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    let p: Vec<f64> = e.iter().map(|x| x / s).collect();
    let h = -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>();
    (p, h)
}

/// Row-wise masked softmax. Returns `(probs, log_probs)`; masked entries get
/// probability exactly 0 and a large negative (finite) log-probability.
pub fn softmax_rows(z: &Array2<f64>, mask: Option<&Array2<f64>>) -> (Array2<f64>, Array2<f64>) {
    let mut logits = z.clone();
    if let Some(m) = mask {
        logits.zip_mut_with(m, |l, m| {
            if *m == 0.0 {
                *l += MASKED_LOGIT;
            }
        });
    }
    let mut logp = logits;
    for mut row in logp.rows_mut() {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    (logp.mapv(f64::exp), logp)
}

/// Entropy of each row of a probability matrix.
pub fn row_entropy(p: &Array2<f64>, logp: &Array2<f64>) -> Vec<f64> {
    p.rows()
        .into_iter()
        .zip(logp.rows())
        .map(|(p, lp)| -p.iter().zip(lp.iter()).map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 }).sum::<f64>())
        .collect()
}

/// Network shapes shared by every learned component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub input_dim: usize,
    pub width: usize,
    pub hidden_layers: usize,
    pub actions: usize,
    pub embed_dim: usize,
    /// Init range multiplier of every output layer.
    pub head_scale: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { input_dim: 17, width: 512, hidden_layers: 2, actions: 4, embed_dim: 64, head_scale: 0.01 }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.hidden_layers == 0 || self.actions == 0 || self.embed_dim == 0
        {
            return Err(crate::error::config_err("architecture dimensions must be positive"));
        }
        Ok(())
    }

    fn sizes(&self, output: usize) -> Vec<usize> {
        let mut s = vec![self.input_dim];
        s.extend(std::iter::repeat_n(self.width, self.hidden_layers));
        s.push(output);
        s
    }

    /// Backbone plus an `|A|`-wide linear head.
    pub fn mlp(&self, rng: &mut impl Rng) -> Mlp {
        Mlp::new(&self.sizes(self.actions), false, self.head_scale, rng)
    }

    pub fn iqn(&self, rng: &mut impl Rng) -> Iqn {
        let mut trunk_sizes = vec![self.input_dim];
        trunk_sizes.extend(std::iter::repeat_n(self.width, self.hidden_layers));
        let trunk = Mlp::new(&trunk_sizes, true, 1.0, rng);
        let embed = Linear::new(self.embed_dim, self.width, 1.0, rng);
        let head = Mlp::new(&[self.width, self.width, self.actions], false, self.head_scale, rng);
        Iqn { trunk, embed, head }
    }
}
