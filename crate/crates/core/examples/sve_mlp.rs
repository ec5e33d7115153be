//! Trains the multilabel SVE predictor on four noisy clusters and reports
//! per-label accuracy.
//!
//!     cargo run --example sve_mlp

use aucap::nn::Tensor;
use aucap::sve_predictor::{train_mlp, LabeledSet, MlpConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(n: usize, seed: u64) -> aucap::Result<LabeledSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for i in 0..n {
        // two labels on per sample: classes i%4 and (i+1)%4
        let on = [i % 4, (i + 1) % 4];
        x.extend((0..8).map(|j| if on.contains(&(j % 4)) { 1.0 } else { 0.0 } + rng.gen_range(-0.4..0.4)));
        y.extend((0..4).map(|k| on.contains(&k) as u8 as f64));
    }
    LabeledSet::new(Tensor::matrix(n, 8, x)?, Tensor::matrix(n, 4, y)?)
}

fn main() -> aucap::Result<()> {
    let (train, val) = (toy(256, 1)?, toy(64, 2)?);
    let cfg = MlpConfig {
        hidden: vec![64, 32],
        epochs: 60,
        ..MlpConfig::default()
    };
    let (model, report) = train_mlp(&train, Some(&val), &cfg)?;
    println!("kept epoch {} (val BCE {:.4})", report.best_epoch + 1, report.val_loss[report.best_epoch]);
    let p = model.predict(&val.features)?;
    for k in 0..4 {
        let right = (0..val.len())
            .filter(|&i| (p.row_slice(i)[k] > 0.5) == (val.targets.row_slice(i)[k] == 1.0))
            .count();
        println!("label {k}: {right}/{} correct", val.len());
    }
    Ok(())
}
