//! Caption tables, clip records and the feature cache.

mod cache;

pub use cache::{cache_features, cache_path, compute_features, load_cached, CacheReport, FeatureSpec};

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{clean_caption, TokenizedCaption};

/// Most captions a clip may carry.
pub const MAX_CAPTIONS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Development,
    Validation,
    Evaluation,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "development" | "dev" | "train" => Ok(Split::Development),
            "validation" | "val" => Ok(Split::Validation),
            "evaluation" | "eval" | "test" => Ok(Split::Evaluation),
            _ => Err(Error::InvalidInput(format!("unknown split `{s}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Development => "development",
            Split::Validation => "validation",
            Split::Evaluation => "evaluation",
        })
    }
}

/// Caption-table layouts.
///
/// * `clotho`: `file_name,caption_1,…,caption_5`, one row per clip.
/// * `audiocaps`: `audiocap_id,youtube_id,start_time,caption`; rows with the
///   same `youtube_id` are one clip with several captions.
/// * `generic`: `clip_id,caption`; repeated ids add captions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvFormat {
    Clotho,
    AudioCaps,
    Generic,
}

impl FromStr for CsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clotho" => Ok(CsvFormat::Clotho),
            "audiocaps" => Ok(CsvFormat::AudioCaps),
            "generic" => Ok(CsvFormat::Generic),
            _ => Err(Error::InvalidInput(format!("unknown caption table format `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipRecord {
    pub clip_id: String,
    /// Audio file (log-Mel) or embedding file (VGGish/PANNs).
    pub source: PathBuf,
    pub captions: Vec<TokenizedCaption>,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub format: CsvFormat,
    pub records: Vec<ClipRecord>,
}

/// Where clip files live and how caption rows map onto them.
#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub split: Split,
    /// Directory holding the clip files; when set, every referenced file
    /// must exist.
    pub media_dir: Option<PathBuf>,
    /// Extension appended to ids that do not name a file (`audiocaps`,
    /// `generic`).
    pub extension: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            split: Split::Development,
            media_dir: None,
            extension: "wav".into(),
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Dataset(format!("{}: missing column `{name}`", path.display())))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.contains(['/', '\\']) && id != "." && id != ".."
}

/// Reads a caption table. Captions are cleaned; an empty cell, a caption
/// that cleans to nothing, a duplicate `clotho` file name or a clip with
/// more than five captions is an error.
pub fn load_caption_csv(path: &Path, format: CsvFormat, opts: &LoadOptions) -> Result<DatasetManifest> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let (id_col, caption_cols, file_named) = match format {
        CsvFormat::Clotho => {
            let cols = (1..=MAX_CAPTIONS)
                .map(|i| column(&headers, &format!("caption_{i}"), path))
                .collect::<Result<Vec<_>>>()?;
            (column(&headers, "file_name", path)?, cols, true)
        }
        CsvFormat::AudioCaps => (column(&headers, "youtube_id", path)?, vec![column(&headers, "caption", path)?], false),
        CsvFormat::Generic => (column(&headers, "clip_id", path)?, vec![column(&headers, "caption", path)?], false),
    };

    let mut records: Vec<ClipRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let id = rec.get(id_col).unwrap_or("").trim().to_string();
        if !valid_id(&id) {
            return Err(Error::Dataset(format!("{}:{line}: bad clip id {id:?}", path.display())));
        }
        let mut caps = Vec::with_capacity(caption_cols.len());
        for &c in &caption_cols {
            let cell = rec.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                return Err(Error::Dataset(format!("{}:{line}: empty caption cell for `{id}`", path.display())));
            }
            caps.push(clean_caption(cell).map_err(|e| Error::Dataset(format!("{}:{line}: {e}", path.display())))?);
        }
        match index.get(&id) {
            Some(_) if format == CsvFormat::Clotho => {
                return Err(Error::Dataset(format!("{}:{line}: duplicate clip id `{id}`", path.display())));
            }
            Some(&i) => records[i].captions.extend(caps),
            None => {
                let file = if file_named { id.clone() } else { format!("{id}.{}", opts.extension) };
                let source = opts.media_dir.as_deref().map_or_else(|| PathBuf::from(&file), |d| d.join(&file));
                index.insert(id.clone(), records.len());
                records.push(ClipRecord {
                    clip_id: id,
                    source,
                    captions: caps,
                    split: opts.split,
                });
            }
        }
    }
    if let Some(r) = records.iter().find(|r| r.captions.len() > MAX_CAPTIONS) {
        return Err(Error::Dataset(format!(
            "clip `{}` has {} captions; at most {MAX_CAPTIONS} are allowed",
            r.clip_id,
            r.captions.len()
        )));
    }
    if opts.media_dir.is_some() {
        let missing: Vec<String> = records
            .iter()
            .filter(|r| !r.source.exists())
            .map(|r| r.source.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Dataset(format!("missing clip files: {}", missing.join(", "))));
        }
    }
    Ok(DatasetManifest { format, records })
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ClipRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn merge(mut self, other: DatasetManifest) -> Result<Self> {
        self.records.extend(other.records);
        self.validate()?;
        Ok(self)
    }

    /// Clip ids must be unique within a split.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert((r.split, r.clip_id.as_str())) {
                return Err(Error::Dataset(format!("duplicate clip id `{}` in {}", r.clip_id, r.split)));
            }
        }
        Ok(())
    }

    /// Moves a seeded `fraction` of the development clips to validation.
    /// At least one clip moves when `fraction > 0` and there are two or more
    /// development clips.
    pub fn hold_out_validation(&mut self, fraction: f64, seed: u64) -> Result<()> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Config(format!("validation fraction {fraction} outside [0, 1)")));
        }
        let mut dev: Vec<usize> = (0..self.records.len())
            .filter(|&i| self.records[i].split == Split::Development)
            .collect();
        let mut n = (dev.len() as f64 * fraction).round() as usize;
        if fraction > 0.0 && n == 0 && dev.len() >= 2 {
            n = 1;
        }
        dev.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for &i in &dev[..n] {
            self.records[i].split = Split::Validation;
        }
        Ok(())
    }
}

/// One `(clip, caption)` training instance per caption, in clip order then
/// caption order.
pub fn expand_pairs(manifest: &DatasetManifest, split: Split) -> Vec<(&ClipRecord, &TokenizedCaption)> {
    manifest
        .split(split)
        .flat_map(|r| r.captions.iter().map(move |c| (r, c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn clotho_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.csv",
            "file_name,caption_1,caption_2,caption_3,caption_4,caption_5\n\
             a.wav,A dog barks.,Dog barking,\"A dog, barking loudly\",The dog barks twice,Barking dog\n",
        );
        let m = load_caption_csv(&p, CsvFormat::Clotho, &LoadOptions::default()).unwrap();
        assert_eq!(m.records.len(), 1);
        assert_eq!(m.records[0].captions.len(), 5);
        assert_eq!(m.records[0].source, PathBuf::from("a.wav"));
        assert_eq!(m.records[0].captions[2].text(), "dog barking loudly");
    }

    #[test]
    fn audiocaps_groups_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "audiocap_id,youtube_id,start_time,caption\n1,yt1,30,A bell rings\n2,yt2,0,Water runs\n3,yt1,30,Ringing bell\n",
        );
        let m = load_caption_csv(&p, CsvFormat::AudioCaps, &LoadOptions::default()).unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.records[0].captions.len(), 2);
        assert_eq!(m.records[1].source, PathBuf::from("yt2.wav"));
    }

    #[test]
    fn table_errors() {
        let dir = tempfile::tempdir().unwrap();
        let opts = LoadOptions::default();
        let p = write(&dir, "m.csv", "clip,caption\nx,hello there\n");
        assert!(matches!(load_caption_csv(&p, CsvFormat::Generic, &opts), Err(Error::Dataset(m)) if m.contains("clip_id")));
        let p = write(&dir, "e.csv", "clip_id,caption\nx,\n");
        assert!(load_caption_csv(&p, CsvFormat::Generic, &opts).is_err());
        let row = "a.wav,one two,three four,five six,seven eight,nine ten\n";
        let p = write(&dir, "d.csv", &format!("file_name,caption_1,caption_2,caption_3,caption_4,caption_5\n{row}{row}"));
        assert!(matches!(load_caption_csv(&p, CsvFormat::Clotho, &opts), Err(Error::Dataset(m)) if m.contains("duplicate")));
        let six: String = (0..6).map(|i| format!("x,caption number {}\n", ["one", "two", "three", "four", "five", "six"][i])).collect();
        let p = write(&dir, "six.csv", &format!("clip_id,caption\n{six}"));
        assert!(load_caption_csv(&p, CsvFormat::Generic, &opts).is_err());
        let p = write(&dir, "f.csv", "clip_id,caption\nghost,a ghost sound\n");
        let with_dir = LoadOptions {
            media_dir: Some(dir.path().to_path_buf()),
            ..LoadOptions::default()
        };
        assert!(matches!(load_caption_csv(&p, CsvFormat::Generic, &with_dir), Err(Error::Dataset(m)) if m.contains("ghost.wav")));
    }

    #[test]
    fn validation_hold_out_is_seeded() {
        let records = (0..20)
            .map(|i| ClipRecord {
                clip_id: format!("c{i}"),
                source: PathBuf::new(),
                captions: vec![clean_caption("some sound").unwrap()],
                split: Split::Development,
            })
            .collect();
        let mut a = DatasetManifest {
            format: CsvFormat::Generic,
            records,
        };
        let mut b = a.clone();
        a.hold_out_validation(0.1, 3).unwrap();
        b.hold_out_validation(0.1, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.split(Split::Validation).count(), 2);
    }
}
