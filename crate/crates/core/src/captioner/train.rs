use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batching::{sequential_batches, shuffled_batches, step_seed};
use crate::captioner::{BatchView, Captioner};
use crate::error::{Error, Result};
use crate::format::Checkpoint;
use crate::nn::{Adam, Graph, Mode, Tensor};

/// Encoder inputs per clip plus `(clip index, token ids)` captions.
#[derive(Clone, Debug, Default)]
pub struct CaptionSet {
    pub clips: Vec<Tensor>,
    pub captions: Vec<(usize, Vec<usize>)>,
}

impl CaptionSet {
    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }
}

/// A teacher-forcing example: predict `target` after `prefix`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub clip: usize,
    pub prefix: Vec<usize>,
    pub target: usize,
}

/// Every caption of `N` tokens gives `N − 1` examples: `c[..t] → c[t]`.
pub fn expand_prefixes(captions: &[(usize, Vec<usize>)]) -> Vec<Example> {
    let mut out = Vec::new();
    for (clip, ids) in captions {
        for t in 1..ids.len() {
            out.push(Example {
                clip: *clip,
                prefix: ids[..t].to_vec(),
                target: ids[t],
            });
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub epochs_run: usize,
}

fn check_set(model: &Captioner, set: &CaptionSet) -> Result<()> {
    let v = model.dims().vocab_size;
    for (clip, ids) in &set.captions {
        if *clip >= set.clips.len() {
            return Err(Error::IndexOutOfRange {
                index: *clip,
                size: set.clips.len(),
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Dataset(format!(
                "token id {bad} is outside the model vocabulary of {v}; vocabulary mismatch"
            )));
        }
        if ids.len() < 2 {
            return Err(Error::Dataset("caption shorter than two tokens".into()));
        }
    }
    Ok(())
}

/// Distinct clips of a batch in first-use order, and each example's slot.
fn batch_layout<'a>(set: &'a CaptionSet, examples: &'a [Example], idx: &[usize]) -> (Vec<&'a Tensor>, Vec<usize>, Vec<&'a [usize]>, Vec<usize>) {
    let mut slot = std::collections::HashMap::new();
    let mut clips = Vec::new();
    let mut example_clip = Vec::with_capacity(idx.len());
    let mut prefixes = Vec::with_capacity(idx.len());
    let mut targets = Vec::with_capacity(idx.len());
    for &i in idx {
        let ex = &examples[i];
        let s = *slot.entry(ex.clip).or_insert_with(|| {
            clips.push(&set.clips[ex.clip]);
            clips.len() - 1
        });
        example_clip.push(s);
        prefixes.push(ex.prefix.as_slice());
        targets.push(ex.target);
    }
    (clips, example_clip, prefixes, targets)
}

/// Mean cross-entropy over all examples of `set` in inference mode.
pub fn evaluate_loss(model: &Captioner, set: &CaptionSet, batch: usize) -> Result<f64> {
    check_set(model, set)?;
    let examples = expand_prefixes(&set.captions);
    if examples.is_empty() {
        return Err(Error::Dataset("no examples to evaluate".into()));
    }
    let mut total = 0.0;
    for idx in sequential_batches(examples.len(), batch) {
        let (clips, ec, prefixes, targets) = batch_layout(set, &examples, &idx);
        let mut g = Graph::new(Mode::Infer, 0);
        let view = BatchView {
            clips: &clips,
            example_clip: &ec,
            prefixes: &prefixes,
        };
        let l = model.loss_with(&mut g, model.store(), view, &targets)?;
        total += g.value(l).data()[0] * idx.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

/// Teacher-forced training with Adam. Keeps the epoch with the lowest
/// validation loss, or the lowest training loss when `val` is `None`.
pub fn train_captioner(mut model: Captioner, train: &CaptionSet, val: Option<&CaptionSet>) -> Result<(Captioner, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Dataset("empty training set".into()));
    }
    check_set(&model, train)?;
    if let Some(v) = val {
        check_set(&model, v)?;
    }
    let cfg = model.config().clone();
    let examples = expand_prefixes(&train.captions);
    if examples.len() < 2 {
        return Err(Error::Dataset("need at least two training examples".into()));
    }
    let mut adam = Adam::new(cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut report = TrainReport::default();
    let mut best: Option<(f64, Checkpoint)> = None;
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        for (step, idx) in shuffled_batches(examples.len(), cfg.batch, &mut rng).into_iter().enumerate() {
            let (clips, ec, prefixes, targets) = batch_layout(train, &examples, &idx);
            let mut g = Graph::new(Mode::Train, step_seed(cfg.seed, epoch, step));
            let view = BatchView {
                clips: &clips,
                example_clip: &ec,
                prefixes: &prefixes,
            };
            let l = model.loss_with(&mut g, model.store(), view, &targets)?;
            sum += g.value(l).data()[0] * idx.len() as f64;
            let store = model.store_mut();
            store.zero_grad();
            g.backward(l, store)?;
            g.commit_stats(store)?;
            adam.step(store)?;
        }
        let train_loss = sum / examples.len() as f64;
        report.train_loss.push(train_loss);
        let select = match val {
            Some(v) if !v.is_empty() => {
                let l = evaluate_loss(&model, v, cfg.batch)?;
                report.val_loss.push(l);
                log::info!("epoch {:>3}: train loss {train_loss:.5}, validation loss {l:.5}", epoch + 1);
                l
            }
            _ => {
                log::info!("epoch {:>3}: train loss {train_loss:.5}", epoch + 1);
                train_loss
            }
        };
        if !select.is_finite() {
            return Err(Error::NonFinite(format!("loss at epoch {}", epoch + 1)));
        }
        if best.as_ref().is_none_or(|(b, _)| select < *b) {
            best = Some((select, model.to_checkpoint()));
            report.best_epoch = epoch;
        }
        report.epochs_run = epoch + 1;
        if cfg.target_loss.is_some_and(|t| train_loss < t) {
            break;
        }
    }
    if let Some((_, ck)) = best {
        model.store_mut().load_checkpoint(&ck)?;
    }
    Ok((model, report))
}
