//! The training and inference stages behind the CLI. Every stage reads its
//! inputs from, and writes its outputs to, the run's output directory.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use crate::captioner::{
    build_encoder_input, fit_rows, greedy_decode, train_captioner as fit_captioner, CaptionSet, Captioner,
    CaptionerConfig, ModelDims, TrainReport, Variant,
};
use crate::config::RunConfig;
use crate::dataset::{
    cache_features, load_cached, load_caption_csv, CacheReport, ClipRecord, DatasetManifest, FeatureSpec,
    LoadOptions, Split,
};
use crate::error::{Error, Result};
use crate::format::write_atomic;
use crate::metrics::{score_files, ScoreReport};
use crate::nn::{AdamConfig, Tensor};
use crate::semantics::{build_corpus, encode_clip_sve, SubjectVerbCorpus, TagLexicon};
use crate::sve_predictor::{train_mlp as fit_mlp, LabeledSet, MlpConfig, MlpReport, SvePredictor};
use crate::text::{train_word2vec, Vocabulary, Word2VecConfig, WordEmbeddingTable};

pub const CACHE_ENV: &str = "AUCAP_CACHE";

/// File names inside the output directory.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub out: PathBuf,
}

impl Artifacts {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf() }
    }
    pub fn vocab(&self) -> PathBuf {
        self.out.join("vocab.txt")
    }
    pub fn word2vec(&self) -> PathBuf {
        self.out.join("word2vec.emb")
    }
    pub fn corpus(&self) -> PathBuf {
        self.out.join("sve_corpus.txt")
    }
    pub fn mlp(&self) -> PathBuf {
        self.out.join("mlp.ckpt")
    }
    pub fn captioner(&self) -> PathBuf {
        self.out.join("captioner.ckpt")
    }
    pub fn predictions(&self) -> PathBuf {
        self.out.join("predictions.tsv")
    }
    pub fn references(&self) -> PathBuf {
        self.out.join("references.tsv")
    }
    pub fn scores(&self) -> PathBuf {
        self.out.join("scores.txt")
    }
    pub fn lock(&self) -> PathBuf {
        self.out.join(".aucap.lock")
    }
}

fn require(path: &Path, what: &'static str, producer: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            what,
            path: path.to_path_buf(),
            producer,
        })
    }
}

/// Exclusive use of an output directory; released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        let path = Artifacts::new(out).lock();
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub fn cache_root(cfg: &RunConfig) -> PathBuf {
    cfg.cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| cfg.out.join("cache"))
}

pub fn feature_spec(cfg: &RunConfig) -> FeatureSpec {
    let mut spec = FeatureSpec::new(cfg.variant);
    spec.logmel.clip_seconds = cfg.clip_seconds;
    spec
}

fn load_table(path: &Path, format: crate::dataset::CsvFormat, split: Split, media: Option<&Path>, variant: Variant) -> Result<DatasetManifest> {
    let opts = LoadOptions {
        split,
        media_dir: media.map(Path::to_path_buf),
        extension: if variant == Variant::Logmel { "wav" } else { "emb" }.into(),
    };
    let mut m = load_caption_csv(path, format, &opts)?;
    if media.is_none() {
        // without a media dir, clip files sit next to the caption table
        let base = path.parent().unwrap_or(Path::new(""));
        for r in &mut m.records {
            if r.source.is_relative() {
                r.source = base.join(&r.source);
            }
        }
    }
    Ok(m)
}

/// Development clips (with the held-out validation share) plus evaluation
/// clips when an evaluation table is configured.
pub fn load_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let captions = cfg
        .captions
        .as_deref()
        .ok_or_else(|| Error::Config("no caption table configured (set `captions`)".into()))?;
    let mut m = load_table(captions, cfg.format, Split::Development, cfg.media_dir.as_deref(), cfg.variant)?;
    m.hold_out_validation(cfg.val_fraction, cfg.seed)?;
    if let Some(eval) = cfg.eval_captions.as_deref() {
        let media = cfg.eval_media_dir.as_deref().or(cfg.media_dir.as_deref());
        let e = load_table(eval, cfg.eval_format.unwrap_or(cfg.format), Split::Evaluation, media, cfg.variant)?;
        m = m.merge(e)?;
    }
    Ok(m)
}

pub fn load_lexicon(cfg: &RunConfig) -> Result<TagLexicon> {
    match &cfg.lexicon {
        Some(p) => TagLexicon::load(p),
        None => Ok(TagLexicon::builtin()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

/// Fills the feature cache for every clip in the manifest.
pub fn extract_features(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<CacheReport> {
    let root = cache_root(cfg);
    let report = cache_features(manifest, &feature_spec(cfg), &root)?;
    info!(
        "features in {}: {} computed, {} reused, {} failed",
        root.display(),
        report.computed.len(),
        report.reused.len(),
        report.failed.len()
    );
    if let Some((id, why)) = report.failed.first() {
        return Err(Error::Dataset(format!(
            "feature extraction failed for {} clip(s); first: `{id}`: {why}",
            report.failed.len()
        )));
    }
    Ok(report)
}

fn clip_features(cfg: &RunConfig, records: &[&ClipRecord]) -> Result<Vec<Tensor>> {
    let root = cache_root(cfg);
    records.iter().map(|r| load_cached(&root, cfg.variant, &r.clip_id)).collect()
}

/// Time-averaged frame vector: the MLP's clip-level input.
pub fn pooled(frames: &Tensor) -> Vec<f64> {
    let (n, d) = (frames.rows(), frames.cols());
    let mut out = vec![0.0; d];
    for r in 0..n {
        for (o, v) in out.iter_mut().zip(frames.row_slice(r)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= n.max(1) as f64);
    out
}

fn encoder_input(cfg: &RunConfig, frames: &Tensor, sve: Option<&[f64]>) -> Result<Tensor> {
    let frames = if cfg.variant == Variant::Vggish {
        fit_rows(frames, cfg.vggish_rows)?
    } else {
        frames.clone()
    };
    build_encoder_input(cfg.variant, &frames, sve)
}

fn training_records(m: &DatasetManifest) -> Vec<&ClipRecord> {
    m.split(Split::Development).collect()
}

/// Vocabulary and skip-gram vectors from development captions (validation
/// share included).
pub fn train_w2v(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<(Vocabulary, WordEmbeddingTable)> {
    let art = Artifacts::new(&cfg.out);
    let caps: Vec<_> = manifest
        .records
        .iter()
        .filter(|r| r.split != Split::Evaluation)
        .flat_map(|r| &r.captions)
        .collect();
    let vocab = Vocabulary::build(caps.iter().copied());
    let sentences: Vec<Vec<usize>> = caps.iter().map(|c| vocab.encode(c)).collect();
    let w2v = train_word2vec(
        &sentences,
        vocab.len(),
        &Word2VecConfig {
            dim: cfg.embed_dim,
            window: cfg.w2v_window,
            negatives: cfg.w2v_negatives,
            epochs: cfg.w2v_epochs,
            seed: cfg.seed,
            ..Word2VecConfig::default()
        },
    )?;
    vocab.save(&art.vocab())?;
    w2v.save(&art.word2vec())?;
    info!("vocabulary of {} words, {}-d vectors", vocab.len(), w2v.dim());
    Ok((vocab, w2v))
}

/// Subject/verb corpus from the training captions.
pub fn build_sve(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<SubjectVerbCorpus> {
    let lex = load_lexicon(cfg)?;
    let corpus = build_corpus(training_records(manifest).iter().flat_map(|r| &r.captions), &lex);
    if corpus.is_empty() {
        return Err(Error::Dataset("no subjects or verbs found in the training captions".into()));
    }
    corpus.save(&Artifacts::new(&cfg.out).corpus())?;
    info!("SVE corpus of {} roots", corpus.len());
    Ok(corpus)
}

fn load_corpus(cfg: &RunConfig) -> Result<SubjectVerbCorpus> {
    let p = Artifacts::new(&cfg.out).corpus();
    require(&p, "SVE corpus", "build-sve")?;
    SubjectVerbCorpus::load(&p)
}

fn sve_targets(records: &[&ClipRecord], corpus: &SubjectVerbCorpus, lex: &TagLexicon) -> Result<Vec<Vec<f64>>> {
    records
        .iter()
        .map(|r| Ok(encode_clip_sve(&r.captions, corpus, lex)?.to_f64()))
        .collect()
}

fn labeled(cfg: &RunConfig, records: &[&ClipRecord], corpus: &SubjectVerbCorpus, lex: &TagLexicon) -> Result<Option<LabeledSet>> {
    if records.is_empty() {
        return Ok(None);
    }
    let feats = clip_features(cfg, records)?;
    let x: Vec<f64> = feats.iter().flat_map(pooled).collect();
    let y: Vec<f64> = sve_targets(records, corpus, lex)?.concat();
    let n = records.len();
    Ok(Some(LabeledSet::new(
        Tensor::matrix(n, x.len() / n, x)?,
        Tensor::matrix(n, corpus.len(), y)?,
    )?))
}

/// SVE predictor on time-pooled features of the training clips.
pub fn train_mlp(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<(SvePredictor, MlpReport)> {
    let corpus = load_corpus(cfg)?;
    let lex = load_lexicon(cfg)?;
    extract_features(cfg, manifest)?;
    let train = labeled(cfg, &training_records(manifest), &corpus, &lex)?
        .ok_or_else(|| Error::Dataset("no training clips".into()))?;
    let val_recs: Vec<_> = manifest.split(Split::Validation).collect();
    let val = labeled(cfg, &val_recs, &corpus, &lex)?;
    let mcfg = MlpConfig {
        hidden: cfg.mlp_hidden.clone(),
        dropout: cfg.mlp_dropout,
        epochs: cfg.mlp_epochs,
        batch: cfg.batch,
        adam: AdamConfig { lr: cfg.lr, ..AdamConfig::default() },
        seed: cfg.seed,
    };
    let (model, report) = fit_mlp(&train, val.as_ref(), &mcfg)?;
    let art = Artifacts::new(&cfg.out);
    model.save(&art.mlp())?;
    write_json(&art.out.join("mlp_report.json"), &report)?;
    info!("MLP kept epoch {}", report.best_epoch + 1);
    Ok((model, report))
}

pub fn captioner_config(cfg: &RunConfig) -> CaptionerConfig {
    CaptionerConfig {
        variant: cfg.variant,
        use_sve: cfg.use_sve,
        audio_hidden: cfg.audio_hidden,
        text_hidden: cfg.text_hidden,
        embed_dim: cfg.embed_dim,
        decoder_hidden: cfg.decoder_hidden,
        dropout: cfg.dropout,
        epochs: cfg.epochs,
        batch: cfg.batch,
        adam: AdamConfig { lr: cfg.lr, ..AdamConfig::default() },
        seed: cfg.seed,
        max_len: cfg.max_len,
        ..CaptionerConfig::default()
    }
}

/// Encoder inputs (ground-truth clip SVE appended when `corpus` is given)
/// and encoded captions for one split.
fn caption_set(
    cfg: &RunConfig,
    records: &[&ClipRecord],
    vocab: &Vocabulary,
    sve: Option<(&SubjectVerbCorpus, &TagLexicon)>,
) -> Result<CaptionSet> {
    let feats = clip_features(cfg, records)?;
    let mut set = CaptionSet::default();
    for (i, (r, f)) in records.iter().zip(&feats).enumerate() {
        let bits = match sve {
            Some((corpus, lex)) => Some(encode_clip_sve(&r.captions, corpus, lex)?.to_f64()),
            None => None,
        };
        set.clips.push(encoder_input(cfg, f, bits.as_deref())?);
        set.captions.extend(r.captions.iter().map(|c| (i, vocab.encode(c))));
    }
    Ok(set)
}

pub fn train_captioner(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<(Captioner, TrainReport)> {
    let art = Artifacts::new(&cfg.out);
    require(&art.vocab(), "vocabulary", "train-w2v")?;
    require(&art.word2vec(), "word vectors", "train-w2v")?;
    let vocab = Vocabulary::load(&art.vocab())?;
    let w2v = WordEmbeddingTable::load(&art.word2vec())?;
    let lex = load_lexicon(cfg)?;
    let corpus = if cfg.use_sve { Some(load_corpus(cfg)?) } else { None };
    extract_features(cfg, manifest)?;
    let sve = corpus.as_ref().map(|c| (c, &lex));
    let train = caption_set(cfg, &training_records(manifest), &vocab, sve)?;
    let val_recs: Vec<_> = manifest.split(Split::Validation).collect();
    let val = caption_set(cfg, &val_recs, &vocab, sve)?;
    let k = corpus.as_ref().map_or(0, SubjectVerbCorpus::len);
    let dims = ModelDims {
        input_dim: cfg.variant.frame_dim() + k,
        sve_dim: k,
        vocab_size: vocab.len(),
    };
    let model = Captioner::new(captioner_config(cfg), dims, &vocab, corpus.as_ref(), Some(&w2v))?;
    let (model, report) = fit_captioner(model, &train, (!val.is_empty()).then_some(&val))?;
    model.save(&art.captioner())?;
    write_json(&art.out.join("captioner_report.json"), &report)?;
    info!("captioner kept epoch {} of {}", report.best_epoch + 1, report.epochs_run);
    Ok((model, report))
}

/// Split that `predict` captions: evaluation if configured, else the
/// held-out validation share, else development.
pub fn prediction_split(manifest: &DatasetManifest) -> Split {
    [Split::Evaluation, Split::Validation]
        .into_iter()
        .find(|&s| manifest.split(s).next().is_some())
        .unwrap_or(Split::Development)
}

/// Greedy captions for the prediction split, written as
/// `clip_id<TAB>caption` alongside the split's references. At inference the
/// SVE comes from the MLP's probabilities.
pub fn predict(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<Vec<(String, String)>> {
    let art = Artifacts::new(&cfg.out);
    require(&art.captioner(), "checkpoint", "train-captioner")?;
    require(&art.vocab(), "vocabulary", "train-w2v")?;
    let vocab = Vocabulary::load(&art.vocab())?;
    let ck = crate::format::Checkpoint::load(&art.captioner())?;
    let corpus = if ck_uses_sve(&ck)? { Some(load_corpus(cfg)?) } else { None };
    let model = Captioner::from_checkpoint(&ck, &vocab, corpus.as_ref())?;
    if model.config().variant != cfg.variant {
        return Err(Error::Config(format!(
            "checkpoint was trained on {} features but the run uses {}",
            model.config().variant,
            cfg.variant
        )));
    }
    let mlp = match corpus {
        Some(_) => {
            require(&art.mlp(), "SVE predictor", "train-mlp")?;
            Some(SvePredictor::load(&art.mlp())?)
        }
        None => None,
    };
    extract_features(cfg, manifest)?;
    let split = prediction_split(manifest);
    let records: Vec<_> = manifest.split(split).collect();
    let feats = clip_features(cfg, &records)?;
    let inputs = feats
        .iter()
        .map(|f| {
            let sve = mlp.as_ref().map(|m| m.predict_sve(&pooled(f))).transpose()?;
            encoder_input(cfg, f, sve.as_deref())
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Tensor> = inputs.iter().collect();
    let ids = greedy_decode(&model, &refs, cfg.max_len)?;
    let mut out = Vec::with_capacity(records.len());
    let (mut pred, mut gold) = (String::new(), String::new());
    for (r, seq) in records.iter().zip(&ids) {
        let caption = vocab.decode_words(seq)?.join(" ");
        pred.push_str(&format!("{}\t{caption}\n", r.clip_id));
        for c in &r.captions {
            gold.push_str(&format!("{}\t{}\n", r.clip_id, c.text()));
        }
        out.push((r.clip_id.clone(), caption));
    }
    write_atomic(&art.predictions(), pred.as_bytes())?;
    write_atomic(&art.references(), gold.as_bytes())?;
    info!("captioned {} {split} clips", out.len());
    Ok(out)
}

fn ck_uses_sve(ck: &crate::format::Checkpoint) -> Result<bool> {
    #[derive(serde::Deserialize)]
    struct Probe {
        config: CaptionerConfig,
    }
    let p: Probe = serde_json::from_str(&ck.meta)
        .map_err(|e| Error::Checkpoint(format!("not a captioner checkpoint: {e}")))?;
    Ok(p.config.use_sve)
}

/// Scores a candidate file against references and writes `scores.txt`.
pub fn evaluate(cfg: &RunConfig, candidates: Option<&Path>, references: Option<&Path>) -> Result<ScoreReport> {
    let art = Artifacts::new(&cfg.out);
    let cands = candidates.map_or_else(|| art.predictions(), Path::to_path_buf);
    let refs = references.map_or_else(|| art.references(), Path::to_path_buf);
    require(&cands, "candidate captions", "predict")?;
    require(&refs, "reference captions", "predict")?;
    let report = score_files(&cands, &refs)?;
    std::fs::create_dir_all(&art.out)?;
    write_atomic(&art.scores(), report.to_key_value().as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = OutputLock::acquire(dir.path()).unwrap();
        assert!(matches!(OutputLock::acquire(dir.path()), Err(Error::Locked(_))));
        drop(a);
        OutputLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn pooling_averages_rows() {
        let t = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(pooled(&t), vec![2.0, 4.0]);
    }

    #[test]
    fn missing_checkpoint_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            out: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let m = DatasetManifest {
            format: crate::dataset::CsvFormat::Generic,
            records: vec![],
        };
        let e = predict(&cfg, &m).unwrap_err();
        assert!(e.to_string().starts_with("checkpoint not found"), "{e}");
        assert_eq!(e.exit_code(), 3);
    }
}
