//! Multilabel MLP that predicts SVE probabilities from clip-level audio
//! features.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batching::{sequential_batches, shuffled_batches, step_seed};
use crate::error::{Error, Result};
use crate::format::Checkpoint;
use crate::nn::functional::sigmoid;
use crate::nn::{Adam, AdamConfig, Dense, Graph, Mode, ParamStore, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![1024, 1024, 512, 512, 256, 256],
            dropout: 0.5,
            epochs: 100,
            batch: 64,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MlpMeta {
    kind: String,
    input_dim: usize,
    k: usize,
    hidden: Vec<usize>,
    dropout: f64,
}

/// ReLU hidden layers, dropout on the input of every layer after the
/// first, sigmoid outputs.
#[derive(Clone, Debug)]
pub struct SvePredictor {
    store: ParamStore,
    hidden: Vec<Dense>,
    out: Dense,
    input_dim: usize,
    k: usize,
    dropout: f64,
}

impl SvePredictor {
    pub fn new(input_dim: usize, k: usize, hidden: &[usize], dropout: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || k == 0 {
            return Err(Error::InvalidInput(format!(
                "MLP needs positive input and output widths (got {input_dim} → {k})"
            )));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout {dropout} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut layers = Vec::new();
        let mut width = input_dim;
        for (i, &h) in hidden.iter().enumerate() {
            if h == 0 {
                return Err(Error::Config("hidden width 0".into()));
            }
            layers.push(Dense::new(&mut store, &format!("mlp.hidden{i}"), width, h, &mut rng));
            width = h;
        }
        let out = Dense::new(&mut store, "mlp.out", width, k, &mut rng);
        Ok(Self {
            store,
            hidden: layers,
            out,
            input_dim,
            k,
            dropout,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|d| d.out_dim).collect()
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.cols(),
            });
        }
        Ok(())
    }

    /// Pre-sigmoid outputs, built on `g` against `store`.
    pub fn logits_with(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.hidden.iter().enumerate() {
            if i > 0 {
                h = g.dropout(h, self.dropout)?;
            }
            let a = layer.forward(g, store, h)?;
            h = g.relu(a);
        }
        if !self.hidden.is_empty() {
            h = g.dropout(h, self.dropout)?;
        }
        self.out.forward(g, store, h)
    }

    /// Mean per-label binary cross-entropy on a batch.
    pub fn loss_with(&self, g: &mut Graph, store: &ParamStore, x: &Tensor, y: &Tensor) -> Result<Var> {
        self.check_input(x)?;
        let xv = g.constant(as_matrix(x)?);
        let logits = self.logits_with(g, store, xv)?;
        g.bce_with_logits(logits, as_matrix(y)?)
    }

    /// Probabilities for each row of `x` (`n × input_dim` → `n × K`).
    pub fn forward(&self, x: &Tensor, mode: Mode, seed: u64) -> Result<Tensor> {
        self.check_input(x)?;
        let mut g = Graph::new(mode, seed);
        let xv = g.constant(as_matrix(x)?);
        let logits = self.logits_with(&mut g, &self.store, xv)?;
        Ok(sigmoid(g.value(logits)))
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x, Mode::Infer, 0)
    }

    /// Soft SVE for one clip feature vector.
    pub fn predict_sve(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(&Tensor::row(features.to_vec()))?.into_data())
    }

    fn meta(&self) -> MlpMeta {
        MlpMeta {
            kind: "sve_mlp".into(),
            input_dim: self.input_dim,
            k: self.k,
            hidden: self.hidden_widths(),
            dropout: self.dropout,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        self.store.to_checkpoint(serde_json::to_string(&self.meta()).expect("serializable"))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: MlpMeta = serde_json::from_str(&ck.meta)?;
        if meta.kind != "sve_mlp" {
            return Err(Error::Checkpoint(format!("expected an SVE MLP checkpoint, found `{}`", meta.kind)));
        }
        let mut m = Self::new(meta.input_dim, meta.k, &meta.hidden, meta.dropout, 0)?;
        m.store.load_checkpoint(ck)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

fn as_matrix(t: &Tensor) -> Result<Tensor> {
    Tensor::matrix(t.rows(), t.cols(), t.data().to_vec())
}

/// Features (`n × d`) with binary targets (`n × K`).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub features: Tensor,
    pub targets: Tensor,
}

impl LabeledSet {
    pub fn new(features: Tensor, targets: Tensor) -> Result<Self> {
        if features.rows() != targets.rows() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} target rows",
                features.rows(),
                targets.rows()
            )));
        }
        if targets.data().iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::InvalidInput("SVE targets must be 0 or 1".into()));
        }
        Ok(Self { features, targets })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn rows(&self, idx: &[usize]) -> Result<(Tensor, Tensor)> {
        let pick = |t: &Tensor| -> Result<Tensor> {
            let mut d = Vec::with_capacity(idx.len() * t.cols());
            for &i in idx {
                d.extend_from_slice(t.row_slice(i));
            }
            Tensor::matrix(idx.len(), t.cols(), d)
        };
        Ok((pick(&self.features)?, pick(&self.targets)?))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MlpReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Mean BCE over a set in inference mode.
pub fn evaluate_loss(model: &SvePredictor, set: &LabeledSet, batch: usize) -> Result<f64> {
    let mut total = 0.0;
    for idx in sequential_batches(set.len(), batch) {
        let (x, y) = set.rows(&idx)?;
        let mut g = Graph::new(Mode::Infer, 0);
        let l = model.loss_with(&mut g, &model.store, &x, &y)?;
        total += g.value(l).data()[0] * idx.len() as f64;
    }
    Ok(total / set.len() as f64)
}

/// Adam on per-label BCE. Keeps the parameters of the epoch with the lowest
/// validation loss (training loss, measured in inference mode, when no
/// validation set is given).
pub fn train_mlp(train: &LabeledSet, val: Option<&LabeledSet>, cfg: &MlpConfig) -> Result<(SvePredictor, MlpReport)> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty MLP training set".into()));
    }
    let mut model = SvePredictor::new(
        train.features.cols(),
        train.targets.cols(),
        &cfg.hidden,
        cfg.dropout,
        cfg.seed,
    )?;
    let mut adam = Adam::new(cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut report = MlpReport::default();
    let mut best: Option<(f64, Checkpoint)> = None;
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        for (step, idx) in shuffled_batches(train.len(), cfg.batch, &mut rng).into_iter().enumerate() {
            let (x, y) = train.rows(&idx)?;
            let mut g = Graph::new(Mode::Train, step_seed(cfg.seed, epoch, step));
            let l = model.loss_with(&mut g, &model.store, &x, &y)?;
            sum += g.value(l).data()[0] * idx.len() as f64;
            model.store.zero_grad();
            g.backward(l, &mut model.store)?;
            adam.step(&mut model.store)?;
        }
        report.train_loss.push(sum / train.len() as f64);
        let select = match val {
            Some(v) if !v.is_empty() => {
                let l = evaluate_loss(&model, v, cfg.batch)?;
                report.val_loss.push(l);
                l
            }
            _ => evaluate_loss(&model, train, cfg.batch)?,
        };
        log::debug!("mlp epoch {epoch}: train {:.5} select {select:.5}", report.train_loss[epoch]);
        if best.as_ref().is_none_or(|(b, _)| select < *b) {
            best = Some((select, model.to_checkpoint()));
            report.best_epoch = epoch;
        }
    }
    if let Some((_, ck)) = best {
        model.store.load_checkpoint(&ck)?;
    }
    Ok((model, report))
}
