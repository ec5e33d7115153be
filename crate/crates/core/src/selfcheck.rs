//! Finite-difference gradient suite over every differentiable layer, on
//! small seeded random shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::captioner::{BatchView, Captioner, CaptionerConfig, ModelDims};
use crate::error::Result;
use crate::nn::gradcheck::{check_gradients, DEFAULT_DELTA};
use crate::nn::layers::gru_step;
use crate::nn::{BatchNorm, BiGru, Dense, Embedding, Graph, Gru, Mode, ParamStore, Tensor, Var};
use crate::sve_predictor::SvePredictor;
use crate::text::{clean_caption, Vocabulary};

/// Largest acceptable relative error.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerCheck {
    pub layer: &'static str,
    pub max_relative_error: f64,
    pub checked: usize,
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape")
}

/// Scalar loss `Σ wᵢ·outᵢ` with fixed random weights.
fn project(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.value(out).len();
    g.dot(out, Tensor::vector((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()))
}

/// Moves every bias off zero so no unit sits exactly on a ReLU kink.
fn jitter_biases(store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let p = store.get(id);
        let is_bias = [".b", ".bz", ".br", ".bh", ".beta"].iter().any(|s| p.name.ends_with(s));
        if p.trainable && is_bias {
            let v = Tensor::vector((0..p.value.len()).map(|_| rng.gen_range(0.05..0.3)).collect());
            store.set_value(id, v)?;
        }
    }
    Ok(())
}

fn layer<F>(name: &'static str, store: &mut ParamStore, build: F) -> Result<LayerCheck>
where
    F: Fn(&ParamStore) -> Result<(Graph, Var)>,
{
    let r = check_gradients(store, build, DEFAULT_DELTA)?;
    Ok(LayerCheck {
        layer: name,
        max_relative_error: r.max_relative_error,
        checked: r.checked,
    })
}

/// Checks dense, GRU cell, BiGRU, embedding, batch norm, a two-layer MLP
/// and a micro captioner (vocabulary 10, hidden sizes 4/8/16). Shapes are
/// drawn from `seed` and never exceed 16 units.
pub fn gradient_suite(seed: u64) -> Result<Vec<LayerCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let dim = |rng: &mut ChaCha8Rng| rng.gen_range(2..=6usize);

    {
        let (b, i, o) = (dim(&mut rng), dim(&mut rng), dim(&mut rng));
        let mut s = ParamStore::new();
        let d = Dense::new(&mut s, "dense", i, o, &mut rng);
        let x = s.add("x", random(&mut rng, b, i));
        jitter_biases(&mut s, &mut rng)?;
        out.push(layer("dense", &mut s, |s| {
            let mut g = Graph::new(Mode::Train, 0);
            let xv = g.param(s, x);
            let y = d.forward(&mut g, s, xv)?;
            let l = project(&mut g, y, 1)?;
            Ok((g, l))
        })?);
    }
    {
        let (b, i, h) = (dim(&mut rng), dim(&mut rng), dim(&mut rng));
        let mut s = ParamStore::new();
        let cell = Gru::new(&mut s, "gru", i, h, true, &mut rng);
        let x = s.add("x", random(&mut rng, b, i));
        let h0 = s.add("h", random(&mut rng, b, h).map(|v| 0.5 * v));
        jitter_biases(&mut s, &mut rng)?;
        out.push(layer("gru_cell", &mut s, |s| {
            let mut g = Graph::new(Mode::Train, 0);
            let p = cell.vars(&mut g, s);
            let (xv, hv) = (g.param(s, x), g.param(s, h0));
            let y = gru_step(&mut g, xv, hv, &p)?;
            let l = project(&mut g, y, 2)?;
            Ok((g, l))
        })?);
    }
    {
        let (b, i, h) = (dim(&mut rng), dim(&mut rng), dim(&mut rng));
        let steps = rng.gen_range(2..=4);
        let mut s = ParamStore::new();
        let bi = BiGru::new(&mut s, "bigru", i, h, true, &mut rng);
        let xs: Vec<_> = (0..steps).map(|t| s.add(format!("x{t}"), random(&mut rng, b, i))).collect();
        jitter_biases(&mut s, &mut rng)?;
        out.push(layer("bigru", &mut s, |s| {
            let mut g = Graph::new(Mode::Train, 0);
            let x: Vec<Var> = xs.iter().map(|&id| g.param(s, id)).collect();
            let seq = bi.sequence(&mut g, s, &x, None)?;
            let all = g.concat_rows(&seq)?;
            let l = project(&mut g, all, 3)?;
            Ok((g, l))
        })?);
    }
    {
        let (v, d, n) = (rng.gen_range(3..=10), dim(&mut rng), dim(&mut rng));
        let mut s = ParamStore::new();
        let e = Embedding::new(&mut s, "emb", v, d, &mut rng);
        // repeated indices exercise gradient accumulation
        let idx: Vec<usize> = (0..n + 2).map(|_| rng.gen_range(0..v)).collect();
        out.push(layer("embedding", &mut s, |s| {
            let mut g = Graph::new(Mode::Train, 0);
            let y = e.forward(&mut g, s, &idx)?;
            let l = project(&mut g, y, 4)?;
            Ok((g, l))
        })?);
    }
    {
        let (b, w) = (dim(&mut rng) + 1, dim(&mut rng));
        let mut s = ParamStore::new();
        let bn = BatchNorm::new(&mut s, "bn", w);
        let x = s.add("x", random(&mut rng, b, w).map(|v| 2.0 * v + 0.5));
        jitter_biases(&mut s, &mut rng)?;
        out.push(layer("batch_norm", &mut s, |s| {
            let mut g = Graph::new(Mode::Train, 0);
            let xv = g.param(s, x);
            let y = bn.forward(&mut g, s, xv)?;
            let l = project(&mut g, y, 5)?;
            Ok((g, l))
        })?);
    }
    {
        let (n, i, k) = (dim(&mut rng) + 2, dim(&mut rng), dim(&mut rng));
        let hidden = [rng.gen_range(4..=16), rng.gen_range(4..=16)];
        let mut model = SvePredictor::new(i, k, &hidden, 0.5, seed)?;
        jitter_biases(model.store_mut(), &mut rng)?;
        let x = random(&mut rng, n, i);
        let y = Tensor::matrix(n, k, (0..n * k).map(|_| rng.gen_range(0..2) as f64).collect())?;
        let shape = model.clone();
        out.push(layer("mlp", model.store_mut(), |s| {
            let mut g = Graph::new(Mode::Train, 6);
            let l = shape.loss_with(&mut g, s, &x, &y)?;
            Ok((g, l))
        })?);
    }
    {
        let vocab = Vocabulary::build(&[clean_caption("aa bb cc dd ee ff")?]);
        let cfg = CaptionerConfig {
            audio_hidden: [4, 8],
            text_hidden: 16,
            embed_dim: 8,
            decoder_hidden: 16,
            dropout: 0.0,
            seed,
            ..CaptionerConfig::default()
        };
        let d = dim(&mut rng);
        let dims = ModelDims {
            input_dim: d,
            sve_dim: 0,
            vocab_size: vocab.len(),
        };
        let mut model = Captioner::new(cfg, dims, &vocab, None, None)?;
        jitter_biases(model.store_mut(), &mut rng)?;
        let t = rng.gen_range(2..=3);
        // three distinct clips: with two, a batch-norm column can have a
        // near-zero variance and the central difference loses accuracy
        let clips = [random(&mut rng, t, d), random(&mut rng, t, d), random(&mut rng, t, d)];
        let refs: Vec<&Tensor> = clips.iter().collect();
        let example_clip = [0, 1, 2, 0];
        let prefixes: [&[usize]; 4] = [&[1], &[1, 4, 5], &[1, 6], &[1, 4]];
        let targets = [4, 6, 2, 7];
        let shape = model.clone();
        out.push(layer("captioner", model.store_mut(), |s| {
            let mut g = Graph::new(Mode::Train, 7);
            let view = BatchView {
                clips: &refs,
                example_clip: &example_clip,
                prefixes: &prefixes,
            };
            let l = shape.loss_with(&mut g, s, view, &targets)?;
            Ok((g, l))
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::TOLERANCE;

    #[test]
    fn suite_passes() {
        for seed in 0..5 {
            let r = super::gradient_suite(seed).unwrap();
            assert_eq!(r.len(), 7);
            for c in &r {
                assert!(c.max_relative_error < TOLERANCE, "seed {seed}: {c:?}");
            }
        }
    }
}
