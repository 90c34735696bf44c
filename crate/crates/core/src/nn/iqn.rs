//! Implicit quantile critic: `Q(o, ., zeta) = head(trunk(o) * embed(zeta))`.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};

use super::{silu, silu_grad, Linear, Mlp, MlpCache, Module};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Iqn {
    pub trunk: Mlp,
    pub embed: Linear,
    pub head: Mlp,
}

#[derive(Debug, Clone)]
pub struct IqnCache {
    n: usize,
    trunk: MlpCache,
    features: Array2<f64>,
    cosines: Array2<f64>,
    embed_pre: Array2<f64>,
    embed_out: Array2<f64>,
    head: MlpCache,
}

/// `cos(pi * i * zeta)` for `i = 0..dim`, one row per fraction.
pub fn cosine_features(taus: &[f64], dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((taus.len(), dim), |(r, i)| (PI * i as f64 * taus[r]).cos())
}

fn repeat_rows(x: &Array2<f64>, n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows() * n, x.ncols()));
    for (b, row) in x.rows().into_iter().enumerate() {
        for i in 0..n {
            out.row_mut(b * n + i).assign(&row);
        }
    }
    out
}

impl Iqn {
    pub fn embed_dim(&self) -> usize {
        self.embed.input_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn actions(&self) -> usize {
        self.head.output_dim()
    }

    fn check(&self, x: &Array2<f64>, taus: &[f64], n: usize) -> Result<()> {
        if taus.len() != x.nrows() * n {
            return Err(Error::Shape(format!("{} fractions for {} rows x {n}", taus.len(), x.nrows())));
        }
        if taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Domain("quantile fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Output row `b * n + i` holds `Q(x_b, ., taus[b * n + i])`.
    pub fn forward(&self, x: &Array2<f64>, taus: &[f64], n: usize) -> Result<Array2<f64>> {
        self.check(x, taus, n)?;
        let f = repeat_rows(&self.trunk.forward(x)?, n);
        let e = self.embed.forward(&cosine_features(taus, self.embed_dim())).mapv(silu);
        self.head.forward(&(f * e))
    }

    pub fn forward_cached(&self, x: &Array2<f64>, taus: &[f64], n: usize) -> Result<(Array2<f64>, IqnCache)> {
        self.check(x, taus, n)?;
        let (f, trunk) = self.trunk.forward_cached(x)?;
        let features = repeat_rows(&f, n);
        let cosines = cosine_features(taus, self.embed_dim());
        let embed_pre = self.embed.forward(&cosines);
        let embed_out = embed_pre.mapv(silu);
        let merged = &features * &embed_out;
        let (out, head) = self.head.forward_cached(&merged)?;
        Ok((out, IqnCache { n, trunk, features, cosines, embed_pre, embed_out, head }))
    }

    /// Gradients in [`Module::tensors`] order: trunk, embedding, head.
    pub fn backward(&self, cache: &IqnCache, dy: Array2<f64>) -> Vec<Array2<f64>> {
        let (head_grads, dm) = self.head.backward(&cache.head, dy);
        let df_rep = &dm * &cache.embed_out;
        let mut de = &dm * &cache.features;
        de.zip_mut_with(&cache.embed_pre, |g, z| *g *= silu_grad(*z));
        let dw = cache.cosines.t().dot(&de);
        let db = de.sum_axis(Axis(0)).insert_axis(Axis(0));
        let b = df_rep.nrows() / cache.n;
        let df = df_rep.into_shape_with_order((b, cache.n, self.trunk.output_dim())).expect("contiguous").sum_axis(Axis(1));
        let (trunk_grads, _) = self.trunk.backward(&cache.trunk, df);
        let mut grads = trunk_grads;
        grads.push(dw);
        grads.push(db);
        grads.extend(head_grads);
        grads
    }

    /// Mean of `Q(x, ., zeta)` over the fractions of each row.
    pub fn mean_over_fractions(&self, x: &Array2<f64>, taus: &[f64], n: usize) -> Result<Array2<f64>> {
        let q = self.forward(x, taus, n)?;
        let a = q.ncols();
        Ok(q.into_shape_with_order((x.nrows(), n, a)).expect("contiguous").mean_axis(Axis(1)).expect("n >= 1"))
    }
}

impl Module for Iqn {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut t = self.trunk.tensors();
        t.push(&self.embed.w);
        t.push(&self.embed.b);
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut t = self.trunk.tensors_mut();
        t.push(&mut self.embed.w);
        t.push(&mut self.embed.b);
        t.extend(self.head.tensors_mut());
        t
    }

    fn names(&self) -> Vec<String> {
        let mut n: Vec<String> = self.trunk.names().into_iter().map(|s| format!("trunk.{s}")).collect();
        n.push("embed.w".into());
        n.push("embed.b".into());
        n.extend(self.head.names().into_iter().map(|s| format!("head.{s}")));
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tests::{assert_grads_close, numeric_grads, rand_matrix};
    use crate::nn::Architecture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> (Iqn, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let arch = Architecture { input_dim: 3, width: 5, embed_dim: 4, head_scale: 1.0, ..Default::default() };
        (arch.iqn(&mut rng), rng)
    }

    #[test]
    fn cosine_embedding_cases() {
        let c = cosine_features(&[0.0], 8);
        assert!(c.iter().all(|v| *v == 1.0));
        for z in [0.1, 0.3, 0.77] {
            let a = cosine_features(&[z], 8);
            let b = cosine_features(&[2.0 - z], 8);
            // cos is symmetric about 1 so these agree; injectivity holds on [0, 1].
            assert!((&a - &b).iter().all(|v| v.abs() < 1e-12));
            let other = cosine_features(&[z + 0.1], 8);
            assert!((&a - &other).iter().any(|v| v.abs() > 1e-3));
        }
    }

    #[test]
    fn output_layout() {
        let (iqn, mut rng) = small();
        let x = rand_matrix(2, 3, &mut rng);
        let taus = [0.1, 0.5, 0.9, 0.2, 0.4, 0.6];
        let q = iqn.forward(&x, &taus, 3).unwrap();
        assert_eq!(q.shape(), &[6, 4]);
        // Row 4 is sample 1, fraction 0.4.
        let single = iqn.forward(&x.slice(ndarray::s![1..2, ..]).to_owned(), &[0.4], 1).unwrap();
        assert!((&q.row(4) - &single.row(0)).iter().all(|v| v.abs() < 1e-14));
        assert!(iqn.forward(&x, &taus[..5], 3).is_err());
        assert!(iqn.forward(&x, &[1.5; 6], 3).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (iqn, mut rng) = small();
        let x = rand_matrix(3, 3, &mut rng);
        let taus: Vec<f64> = (0..6).map(|_| rng.random()).collect();
        let w = rand_matrix(6, 4, &mut rng);
        let loss = |m: &Iqn| (m.forward(&x, &taus, 2).unwrap() * &w).sum();
        let (_, cache) = iqn.forward_cached(&x, &taus, 2).unwrap();
        let g = iqn.backward(&cache, w.clone());
        assert_grads_close(&g, &numeric_grads(&iqn, loss), 1e-4);
    }
}
