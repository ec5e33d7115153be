use std::path::Path;

use crate::error::{Error, Result};
use crate::format::load_emb;

/// Which pretrained network produced an embedding file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingSource {
    /// One 128-vector per second of audio.
    Vggish,
    /// One 2048-vector per clip.
    Panns,
}

impl EmbeddingSource {
    pub fn dim(self) -> usize {
        match self {
            EmbeddingSource::Vggish => 128,
            EmbeddingSource::Panns => 2048,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipEmbedding {
    pub values: Vec<f64>,
}

impl ClipEmbedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Reads every row of an embedding container, checking its width.
pub fn load_embedding_file(path: &Path, expected_dim: usize) -> Result<Vec<ClipEmbedding>> {
    let m = load_emb(path)?;
    if m.dim != expected_dim {
        return Err(Error::DimensionMismatch {
            expected: expected_dim,
            found: m.dim,
        });
    }
    if m.rows == 0 {
        return Err(Error::CorruptHeader(format!("{}: no rows", path.display())));
    }
    Ok((0..m.rows)
        .map(|r| ClipEmbedding {
            values: m.row(r).to_vec(),
        })
        .collect())
}

/// A PANNs file: exactly one 2048-vector.
pub fn load_panns(path: &Path) -> Result<ClipEmbedding> {
    let mut rows = load_embedding_file(path, EmbeddingSource::Panns.dim())?;
    if rows.len() != 1 {
        return Err(Error::CorruptHeader(format!(
            "{}: PANNs files hold one row, found {}",
            path.display(),
            rows.len()
        )));
    }
    Ok(rows.pop().unwrap())
}

/// A VGGish file: one 128-vector per second.
pub fn load_vggish(path: &Path) -> Result<Vec<ClipEmbedding>> {
    load_embedding_file(path, EmbeddingSource::Vggish.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{save_emb, EmbMatrix};

    #[test]
    fn panns_and_vggish_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.emb");
        save_emb(&p, &EmbMatrix::new(2048, 1, vec![0.25; 2048]).unwrap()).unwrap();
        assert_eq!(load_panns(&p).unwrap().dim(), 2048);
        assert!(matches!(load_vggish(&p), Err(Error::DimensionMismatch { expected: 128, found: 2048 })));

        let v = dir.path().join("v.emb");
        save_emb(&v, &EmbMatrix::new(128, 30, vec![0.5; 128 * 30]).unwrap()).unwrap();
        assert_eq!(load_vggish(&v).unwrap().len(), 30);
        assert!(matches!(load_panns(&v), Err(Error::DimensionMismatch { .. })));

        let two = dir.path().join("two.emb");
        save_emb(&two, &EmbMatrix::new(2048, 2, vec![0.0; 4096]).unwrap()).unwrap();
        assert!(matches!(load_panns(&two), Err(Error::CorruptHeader(_))));
    }
}
