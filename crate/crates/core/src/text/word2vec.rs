//! Skip-gram with negative sampling.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{load_emb, save_emb, EmbMatrix};
use crate::nn::Tensor;
use crate::text::Vocabulary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Word2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Self {
            dim: 256,
            window: 5,
            negatives: 5,
            epochs: 15,
            lr: 0.025,
            seed: 0,
        }
    }
}

/// `V × dim` input vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddingTable {
    pub matrix: Tensor,
    /// Mean loss per training pair, one entry per epoch.
    pub epoch_loss: Vec<f64>,
}

impl WordEmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        self.matrix.row_slice(id)
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.vector(a), self.vector(b));
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let m = EmbMatrix::new(self.dim(), self.matrix.rows(), self.matrix.data().to_vec())?;
        save_emb(path, &m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m = load_emb(path)?;
        Ok(Self {
            matrix: m.to_tensor(),
            epoch_loss: Vec::new(),
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln_sigmoid(x: f64) -> f64 {
    // ln σ(x) = −ln(1 + e^{−x}), computed without overflow
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradients for one (center, context) pair.
#[derive(Clone, Debug)]
pub struct PairGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// `−ln σ(u_o·v) − Σ ln σ(−u_n·v)` and its gradients with respect to
/// `v`, `u_o` and each `u_n`.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGrad {
    let s = dot(context, center);
    let mut loss = -ln_sigmoid(s);
    let g = sigmoid(s) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|u| g * u).collect();
    let d_context: Vec<f64> = center.iter().map(|v| g * v).collect();
    let mut d_neg = Vec::with_capacity(negatives.len());
    for n in negatives {
        let s = dot(n, center);
        loss -= ln_sigmoid(-s);
        let g = sigmoid(s);
        for (d, u) in d_center.iter_mut().zip(n.iter()) {
            *d += g * u;
        }
        d_neg.push(center.iter().map(|v| g * v).collect());
    }
    PairGrad {
        loss,
        center: d_center,
        context: d_context,
        negatives: d_neg,
    }
}

/// Trains on the interior words of each caption; reserved tokens keep
/// their initial vectors. `sentences` are vocabulary ids.
pub fn train_word2vec(sentences: &[Vec<usize>], vocab_size: usize, cfg: &Word2VecConfig) -> Result<WordEmbeddingTable> {
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(Error::Config("word2vec dim and window must be positive".into()));
    }
    if sentences.iter().all(|s| s.is_empty()) {
        return Err(Error::InvalidInput("word2vec corpus is empty".into()));
    }
    let words: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().copied().filter(|&i| !Vocabulary::is_special(i)).collect())
        .collect();
    let mut counts = vec![0u64; vocab_size];
    for &w in words.iter().flatten() {
        if w >= vocab_size {
            return Err(Error::IndexOutOfRange {
                index: w,
                size: vocab_size,
            });
        }
        counts[w] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let bound = 0.5 / d as f64;
    let mut input: Vec<f64> = (0..vocab_size * d).map(|_| rng.gen_range(-bound..bound)).collect();
    let mut output = vec![0.0; vocab_size * d];

    let noise = if counts.iter().any(|&c| c > 0) {
        Some(WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75))).expect("positive weights"))
    } else {
        None
    };

    let pairs_per_epoch: usize = words
        .iter()
        .map(|s| {
            (0..s.len())
                .map(|i| i.min(cfg.window) + (s.len() - 1 - i).min(cfg.window))
                .sum::<usize>()
        })
        .sum();
    let total = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let mut done = 0usize;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut negs: Vec<usize> = Vec::with_capacity(cfg.negatives);

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for s in &words {
            for (i, &c) in s.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(s.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let o = s[j];
                    let lr = (cfg.lr * (1.0 - done as f64 / total)).max(cfg.lr * 1e-4);
                    done += 1;
                    negs.clear();
                    if let Some(dist) = &noise {
                        for _ in 0..cfg.negatives {
                            let n = dist.sample(&mut rng);
                            if n != o {
                                negs.push(n);
                            }
                        }
                    }
                    let grad = {
                        let neg_rows: Vec<&[f64]> = negs.iter().map(|&n| &output[n * d..(n + 1) * d]).collect();
                        pair_loss(&input[c * d..(c + 1) * d], &output[o * d..(o + 1) * d], &neg_rows)
                    };
                    loss_sum += grad.loss;
                    for (u, g) in output[o * d..(o + 1) * d].iter_mut().zip(&grad.context) {
                        *u -= lr * g;
                    }
                    for (&n, gn) in negs.iter().zip(&grad.negatives) {
                        for (u, g) in output[n * d..(n + 1) * d].iter_mut().zip(gn) {
                            *u -= lr * g;
                        }
                    }
                    for (v, g) in input[c * d..(c + 1) * d].iter_mut().zip(&grad.center) {
                        *v -= lr * g;
                    }
                }
            }
        }
        epoch_loss.push(if pairs_per_epoch == 0 {
            0.0
        } else {
            loss_sum / pairs_per_epoch as f64
        });
    }
    let matrix = Tensor::matrix(vocab_size, d, input)?;
    if !matrix.is_finite() {
        return Err(Error::NonFinite("word2vec diverged".into()));
    }
    Ok(WordEmbeddingTable { matrix, epoch_loss })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_sigmoid_is_stable() {
        assert!((ln_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(ln_sigmoid(800.0).abs() < 1e-300);
        assert!((ln_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn pair_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut r = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let (v, u, n1, n2) = (r(5), r(5), r(5), r(5));
        let loss = |v: &[f64], u: &[f64], n1: &[f64], n2: &[f64]| pair_loss(v, u, &[n1, n2]).loss;
        let g = pair_loss(&v, &u, &[&n1, &n2]);
        let delta = 1e-6;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: &[f64], which: usize| {
            for i in 0..5 {
                let mut args = [v.clone(), u.clone(), n1.clone(), n2.clone()];
                args[which][i] += delta;
                let p = loss(&args[0], &args[1], &args[2], &args[3]);
                args[which][i] -= 2.0 * delta;
                let m = loss(&args[0], &args[1], &args[2], &args[3]);
                let num = (p - m) / (2.0 * delta);
                worst = worst.max(crate::nn::gradcheck::relative_error(analytic[i], num));
            }
        };
        check(&g.center, 0);
        check(&g.context, 1);
        check(&g.negatives[0], 2);
        check(&g.negatives[1], 3);
        assert!(worst < 1e-5, "{worst}");
    }
}
