use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::captioner::CaptionerConfig;
use crate::error::{Error, Result};
use crate::format::Checkpoint;
use crate::nn::{BatchNorm, BiGru, Dense, Embedding, Graph, Gru, Mode, ParamStore, Tensor, Var};
use crate::semantics::SubjectVerbCorpus;
use crate::text::{Vocabulary, WordEmbeddingTable};

/// Sizes fixed by the data rather than the config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Encoder input width: frame width plus K when SVE is used.
    pub input_dim: usize,
    pub sve_dim: usize,
    pub vocab_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CaptionerMeta {
    kind: String,
    config: CaptionerConfig,
    dims: ModelDims,
    vocab_sha256: String,
    corpus_sha256: Option<String>,
}

/// Audio and text encoders joined by concatenation, then a one-step GRU
/// decoder with a softmax over the vocabulary.
///
/// ```text
/// audio: dropout → BiGRU(a1) → BN → BiGRU(a2, last) → BN ─┐
/// text:  embed → dropout → GRU(t, last) → BN ──────────────┴→ concat
///        → GRU(d) → BN → LeakyReLU → dense(V) → softmax
/// ```
#[derive(Clone, Debug)]
pub struct Captioner {
    config: CaptionerConfig,
    dims: ModelDims,
    vocab_sha256: String,
    corpus_sha256: Option<String>,
    store: ParamStore,
    audio1: BiGru,
    audio_bn1: BatchNorm,
    audio2: BiGru,
    audio_bn2: BatchNorm,
    embed: Embedding,
    text: Gru,
    text_bn: BatchNorm,
    decoder: Gru,
    decoder_bn: BatchNorm,
    out: Dense,
}

/// One mini-batch: distinct clip inputs, and per example the clip it uses
/// and its caption prefix.
#[derive(Clone, Copy, Debug)]
pub struct BatchView<'a> {
    pub clips: &'a [&'a Tensor],
    pub example_clip: &'a [usize],
    pub prefixes: &'a [&'a [usize]],
}

impl Captioner {
    pub fn new(
        config: CaptionerConfig,
        dims: ModelDims,
        vocab: &Vocabulary,
        corpus: Option<&SubjectVerbCorpus>,
        embeddings: Option<&WordEmbeddingTable>,
    ) -> Result<Self> {
        config.validate()?;
        if dims.vocab_size != vocab.len() {
            return Err(Error::Config(format!(
                "model vocabulary size {} differs from vocabulary ({})",
                dims.vocab_size,
                vocab.len()
            )));
        }
        if dims.input_dim == 0 {
            return Err(Error::Config("encoder input width is zero".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut s = ParamStore::new();
        let [a1, a2] = config.audio_hidden;
        let b = config.gru_bias;
        let audio1 = BiGru::new(&mut s, "enc.audio1", dims.input_dim, a1, b, &mut rng);
        let audio_bn1 = BatchNorm::new(&mut s, "enc.audio_bn1", 2 * a1);
        let audio2 = BiGru::new(&mut s, "enc.audio2", 2 * a1, a2, b, &mut rng);
        let audio_bn2 = BatchNorm::new(&mut s, "enc.audio_bn2", 2 * a2);
        let embed = Embedding::new(&mut s, "enc.embed", dims.vocab_size, config.embed_dim, &mut rng);
        let text = Gru::new(&mut s, "enc.text", config.embed_dim, config.text_hidden, b, &mut rng);
        let text_bn = BatchNorm::new(&mut s, "enc.text_bn", config.text_hidden);
        let decoder = Gru::new(&mut s, "dec.gru", config.fused_width(), config.decoder_hidden, b, &mut rng);
        let decoder_bn = BatchNorm::new(&mut s, "dec.bn", config.decoder_hidden);
        let out = Dense::new(&mut s, "dec.out", config.decoder_hidden, dims.vocab_size, &mut rng);
        if let Some(e) = embeddings {
            if e.matrix.rows() != dims.vocab_size || e.dim() != config.embed_dim {
                return Err(Error::Shape(format!(
                    "word embeddings are {}×{}, model needs {}×{}",
                    e.matrix.rows(),
                    e.dim(),
                    dims.vocab_size,
                    config.embed_dim
                )));
            }
            s.set_value(embed.table, e.matrix.clone())?;
        }
        Ok(Self {
            vocab_sha256: vocab.fingerprint(),
            corpus_sha256: corpus.map(SubjectVerbCorpus::fingerprint),
            config,
            dims,
            store: s,
            audio1,
            audio_bn1,
            audio2,
            audio_bn2,
            embed,
            text,
            text_bn,
            decoder,
            decoder_bn,
            out,
        })
    }

    pub fn config(&self) -> &CaptionerConfig {
        &self.config
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Width of the cached audio encoding.
    pub fn audio_width(&self) -> usize {
        2 * self.config.audio_hidden[1]
    }

    fn check_clip(&self, clip: &Tensor, t: usize) -> Result<()> {
        if clip.cols() != self.dims.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.dims.input_dim,
                found: clip.cols(),
            });
        }
        if clip.rows() != t {
            return Err(Error::Shape(format!(
                "clips in one batch must share a length ({} vs {t} frames)",
                clip.rows()
            )));
        }
        Ok(())
    }

    /// Audio branch for the distinct `clips`, expanded to one row per
    /// example. Batch statistics are taken over example rows, so a clip
    /// that serves several examples is weighted accordingly.
    pub fn audio_encode_with(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        clips: &[&Tensor],
        example_clip: &[usize],
    ) -> Result<Var> {
        if clips.is_empty() || example_clip.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let t_len = clips[0].rows();
        if t_len == 0 {
            return Err(Error::InvalidInput("clip with no frames".into()));
        }
        for c in clips {
            self.check_clip(c, t_len)?;
        }
        if let Some(&bad) = example_clip.iter().find(|&&c| c >= clips.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                size: clips.len(),
            });
        }
        let n_u = clips.len();
        let n_b = example_clip.len();
        let d = self.dims.input_dim;
        let mut xs = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let mut rows = Vec::with_capacity(n_u * d);
            for c in clips {
                rows.extend_from_slice(c.row_slice(t));
            }
            let x = g.constant(Tensor::matrix(n_u, d, rows)?);
            xs.push(g.dropout(x, self.config.dropout)?);
        }
        let seq = self.audio1.sequence(g, store, &xs, None)?;
        let stacked = g.concat_rows(&seq)?;

        let mut counts = vec![0usize; n_u];
        for &c in example_clip {
            counts[c] += 1;
        }
        let uniform = counts.iter().all(|&c| c == counts[0]) && t_len * n_u >= 2;
        let normed = if g.mode() == Mode::Infer || uniform {
            self.audio_bn1.forward(g, store, stacked)?
        } else {
            // duplicate rows per example for the statistics, then keep one
            // copy per clip
            let dup_idx: Vec<usize> = (0..t_len)
                .flat_map(|t| example_clip.iter().map(move |&c| t * n_u + c))
                .collect();
            let dup = g.gather(stacked, &dup_idx)?;
            let bn = self.audio_bn1.forward(g, store, dup)?;
            let mut first = vec![usize::MAX; n_u];
            for (e, &c) in example_clip.iter().enumerate() {
                if first[c] == usize::MAX {
                    first[c] = e;
                }
            }
            let pick: Vec<usize> = (0..t_len)
                .flat_map(|t| first.iter().map(move |&e| t * n_b + e))
                .collect();
            g.gather(bn, &pick)?
        };
        let xs2: Vec<Var> = (0..t_len)
            .map(|t| g.slice_rows(normed, t * n_u, n_u))
            .collect::<Result<_>>()?;
        let last = self.audio2.last(g, store, &xs2, None)?;
        let per_example = if example_clip.iter().enumerate().all(|(e, &c)| e == c) && n_u == n_b {
            last
        } else {
            g.gather(last, example_clip)?
        };
        self.audio_bn2.forward(g, store, per_example)
    }

    /// Text branch over left-padded prefixes; padded steps leave the
    /// state untouched.
    pub fn text_encode_with(&self, g: &mut Graph, store: &ParamStore, prefixes: &[&[usize]]) -> Result<Var> {
        let n_b = prefixes.len();
        let l_max = prefixes.iter().map(|p| p.len()).max().unwrap_or(0);
        if n_b == 0 || prefixes.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidInput("every caption prefix needs at least <sos>".into()));
        }
        for p in prefixes {
            if let Some(&bad) = p.iter().find(|&&i| i >= self.dims.vocab_size) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    size: self.dims.vocab_size,
                });
            }
        }
        let h = self.config.text_hidden;
        let mut xs = Vec::with_capacity(l_max);
        let mut masks = Vec::with_capacity(l_max);
        for t in 0..l_max {
            let mut ids = Vec::with_capacity(n_b);
            let mut mask = Vec::with_capacity(n_b * h);
            for p in prefixes {
                let offset = l_max - p.len();
                let live = t >= offset;
                ids.push(if live { p[t - offset] } else { Vocabulary::PAD_ID });
                mask.extend(std::iter::repeat_n(live as u8 as f64, h));
            }
            let e = self.embed.forward(g, store, &ids)?;
            xs.push(g.dropout(e, self.config.dropout)?);
            masks.push(Tensor::matrix(n_b, h, mask)?);
        }
        let states = self.text.scan(g, store, &xs, Some(&masks))?;
        self.text_bn.forward(g, store, *states.last().unwrap())
    }

    /// `[audio, text]` for each example.
    pub fn fuse(&self, g: &mut Graph, audio: Var, text: Var) -> Result<Var> {
        g.concat_cols(&[audio, text])
    }

    /// Next-word probabilities from the fused encoding.
    pub fn decode_with(&self, g: &mut Graph, store: &ParamStore, fused: Var) -> Result<Var> {
        let h = self.decoder.scan(g, store, &[fused], None)?[0];
        let h = self.decoder_bn.forward(g, store, h)?;
        let h = g.leaky_relu(h, self.config.leaky_alpha);
        let logits = self.out.forward(g, store, h)?;
        Ok(g.softmax(logits))
    }

    /// Probabilities for every example of a batch.
    pub fn probs_with(&self, g: &mut Graph, store: &ParamStore, batch: BatchView<'_>) -> Result<Var> {
        if batch.example_clip.len() != batch.prefixes.len() {
            return Err(Error::Shape("one clip index per prefix".into()));
        }
        let audio = self.audio_encode_with(g, store, batch.clips, batch.example_clip)?;
        let text = self.text_encode_with(g, store, batch.prefixes)?;
        let fused = self.fuse(g, audio, text)?;
        self.decode_with(g, store, fused)
    }

    /// Mean cross-entropy of `targets` under the batch predictions.
    pub fn loss_with(&self, g: &mut Graph, store: &ParamStore, batch: BatchView<'_>, targets: &[usize]) -> Result<Var> {
        let p = self.probs_with(g, store, batch)?;
        g.cross_entropy(p, targets)
    }

    /// Audio encodings in inference mode, one row per clip.
    pub fn audio_encodings(&self, clips: &[&Tensor]) -> Result<Tensor> {
        let mut g = Graph::new(Mode::Infer, 0);
        let idx: Vec<usize> = (0..clips.len()).collect();
        let v = self.audio_encode_with(&mut g, &self.store, clips, &idx)?;
        Ok(g.value(v).clone())
    }

    /// Fused encoder output (inference mode) for one clip and prefix.
    pub fn encode(&self, clip: &Tensor, prefix: &[usize]) -> Result<Tensor> {
        let mut g = Graph::new(Mode::Infer, 0);
        let audio = self.audio_encode_with(&mut g, &self.store, &[clip], &[0])?;
        let text = self.text_encode_with(&mut g, &self.store, &[prefix])?;
        let f = self.fuse(&mut g, audio, text)?;
        Ok(Tensor::vector(g.value(f).data().to_vec()))
    }

    /// Next-word distributions given cached audio encodings (`B × audio_width`).
    pub fn decode_step(&self, audio: &Tensor, prefixes: &[&[usize]]) -> Result<Tensor> {
        if audio.rows() != prefixes.len() || audio.cols() != self.audio_width() {
            return Err(Error::Shape(format!(
                "audio encodings {}×{} for {} prefixes",
                audio.rows(),
                audio.cols(),
                prefixes.len()
            )));
        }
        let mut g = Graph::new(Mode::Infer, 0);
        let a = g.constant(Tensor::matrix(audio.rows(), audio.cols(), audio.data().to_vec())?);
        let t = self.text_encode_with(&mut g, &self.store, prefixes)?;
        let f = self.fuse(&mut g, a, t)?;
        let p = self.decode_with(&mut g, &self.store, f)?;
        Ok(g.value(p).clone())
    }

    fn meta(&self) -> CaptionerMeta {
        CaptionerMeta {
            kind: "captioner".into(),
            config: self.config.clone(),
            dims: self.dims,
            vocab_sha256: self.vocab_sha256.clone(),
            corpus_sha256: self.corpus_sha256.clone(),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        self.store.to_checkpoint(serde_json::to_string(&self.meta()).expect("serializable"))
    }

    /// Rebuilds a model from a checkpoint, refusing it unless it was trained
    /// against this vocabulary and SVE corpus.
    pub fn from_checkpoint(ck: &Checkpoint, vocab: &Vocabulary, corpus: Option<&SubjectVerbCorpus>) -> Result<Self> {
        let meta: CaptionerMeta = serde_json::from_str(&ck.meta)?;
        if meta.kind != "captioner" {
            return Err(Error::Checkpoint(format!("expected a captioner checkpoint, found `{}`", meta.kind)));
        }
        let vocab_sha = vocab.fingerprint();
        if meta.vocab_sha256 != vocab_sha {
            return Err(Error::HashMismatch {
                kind: "vocabulary",
                expected: meta.vocab_sha256,
                found: vocab_sha,
            });
        }
        let corpus_sha = corpus.map(SubjectVerbCorpus::fingerprint);
        if meta.corpus_sha256 != corpus_sha {
            return Err(Error::HashMismatch {
                kind: "SVE corpus",
                expected: meta.corpus_sha256.unwrap_or_else(|| "none".into()),
                found: corpus_sha.unwrap_or_else(|| "none".into()),
            });
        }
        let mut m = Self::new(meta.config, meta.dims, vocab, corpus, None)?;
        m.store.load_checkpoint(ck)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path, vocab: &Vocabulary, corpus: Option<&SubjectVerbCorpus>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, vocab, corpus)
    }

    /// Parameter values by name, for inspection and transplanting weights.
    pub fn named_values(&self) -> HashMap<String, Tensor> {
        self.store.iter().map(|p| (p.name.clone(), p.value.clone())).collect()
    }
}
