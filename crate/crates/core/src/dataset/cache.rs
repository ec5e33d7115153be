use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::audio::{extract_logmel, load_panns, load_vggish, load_wav, LogMelConfig};
use crate::captioner::Variant;
use crate::dataset::{ClipRecord, DatasetManifest};
use crate::error::{Error, Result};
use crate::format::{load_emb, save_emb, sha256_hex, write_atomic, EmbMatrix};
use crate::nn::Tensor;

/// What a cached feature file was computed from.
#[derive(Clone, Debug, Serialize)]
pub struct FeatureSpec {
    pub variant: Variant,
    pub logmel: LogMelConfig,
}

impl FeatureSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            logmel: LogMelConfig::default(),
        }
    }
}

/// `<root>/<variant>/<clip_id>.emb`
pub fn cache_path(root: &Path, variant: Variant, clip_id: &str) -> PathBuf {
    root.join(variant.name()).join(format!("{clip_id}.emb"))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".sha256");
    PathBuf::from(s)
}

fn source_key(record: &ClipRecord, spec: &FeatureSpec) -> Result<String> {
    let bytes = std::fs::read(&record.source).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(record.source.clone()),
        _ => Error::Io(e),
    })?;
    let mut keyed = serde_json::to_vec(spec)?;
    keyed.extend_from_slice(&bytes);
    Ok(sha256_hex(&keyed))
}

/// Features for one clip, rounded to `f32` (the cache precision):
/// log-Mel frames from audio, or the stored VGGish/PANNs embedding rows.
pub fn compute_features(record: &ClipRecord, spec: &FeatureSpec) -> Result<Tensor> {
    let t = match spec.variant {
        Variant::Logmel => extract_logmel(&load_wav(&record.source)?, &spec.logmel)?.values,
        Variant::Vggish => {
            let rows = load_vggish(&record.source)?;
            let n = rows.len();
            Tensor::matrix(n, 128, rows.into_iter().flat_map(|r| r.values).collect())?
        }
        Variant::Panns => Tensor::matrix(1, 2048, load_panns(&record.source)?.values)?,
    };
    Ok(t.map(|v| v as f32 as f64))
}

pub fn load_cached(root: &Path, variant: Variant, clip_id: &str) -> Result<Tensor> {
    let m = load_emb(&cache_path(root, variant, clip_id))?;
    if m.dim != variant.frame_dim() {
        return Err(Error::DimensionMismatch {
            expected: variant.frame_dim(),
            found: m.dim,
        });
    }
    Ok(m.to_tensor())
}

#[derive(Clone, Debug, Default)]
pub struct CacheReport {
    pub computed: Vec<String>,
    pub reused: Vec<String>,
    /// Clips that could not be processed, with the reason.
    pub failed: Vec<(String, String)>,
}

enum Outcome {
    Computed,
    Reused,
}

fn cache_one(root: &Path, record: &ClipRecord, spec: &FeatureSpec) -> Result<Outcome> {
    let path = cache_path(root, spec.variant, &record.clip_id);
    let key = source_key(record, spec)?;
    let side = sidecar(&path);
    if path.exists() && std::fs::read_to_string(&side).is_ok_and(|k| k.trim() == key) {
        return Ok(Outcome::Reused);
    }
    let t = compute_features(record, spec)?;
    let m = EmbMatrix::new(t.cols(), t.rows(), t.into_data())?;
    save_emb(&path, &m)?;
    write_atomic(&side, format!("{key}\n").as_bytes())?;
    Ok(Outcome::Computed)
}

/// Extracts features for every record into the cache, skipping clips whose
/// source content and settings are unchanged. Clips are processed in
/// parallel; each file is written atomically. Per-clip failures are
/// collected rather than aborting the run.
pub fn cache_features(manifest: &DatasetManifest, spec: &FeatureSpec, root: &Path) -> Result<CacheReport> {
    std::fs::create_dir_all(root.join(spec.variant.name()))?;
    let outcomes: Vec<(String, Result<Outcome>)> = manifest
        .records
        .par_iter()
        .map(|r| (r.clip_id.clone(), cache_one(root, r, spec)))
        .collect();
    let mut report = CacheReport::default();
    for (id, o) in outcomes {
        match o {
            Ok(Outcome::Computed) => report.computed.push(id),
            Ok(Outcome::Reused) => report.reused.push(id),
            Err(e) => report.failed.push((id, e.to_string())),
        }
    }
    Ok(report)
}
