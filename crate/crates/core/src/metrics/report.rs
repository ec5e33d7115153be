use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{bleu_all, cider, meteor, rouge_l, strip_special};
use crate::text::clean_caption;

/// The score table row: B-1..B-4, CIDEr, METEOR, ROUGE_L.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub bleu: [f64; 4],
    pub cider: f64,
    pub meteor: f64,
    pub rouge_l: f64,
}

impl ScoreReport {
    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("B-1", self.bleu[0]),
            ("B-2", self.bleu[1]),
            ("B-3", self.bleu[2]),
            ("B-4", self.bleu[3]),
            ("CIDEr", self.cider),
            ("METEOR", self.meteor),
            ("ROUGE_L", self.rouge_l),
        ]
    }

    /// Header line and one aligned row.
    pub fn to_table(&self) -> String {
        let e = self.entries();
        let mut head = String::new();
        let mut row = String::new();
        for (k, v) in e {
            let _ = write!(head, "{k:>8}");
            let _ = write!(row, "{v:>8.4}");
        }
        format!("{}\n{}\n", head.trim_start(), row.trim_start())
    }

    /// `key: value` lines.
    pub fn to_key_value(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k}: {v:.6}\n")).collect()
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("expected `key: value`, got {line:?}")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::InvalidInput(format!("bad number in {line:?}")))?;
            map.insert(k.trim().to_string(), v);
        }
        let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::InvalidInput(format!("missing `{k}`")));
        Ok(Self {
            bleu: [get("B-1")?, get("B-2")?, get("B-3")?, get("B-4")?],
            cider: get("CIDEr")?,
            meteor: get("METEOR")?,
            rouge_l: get("ROUGE_L")?,
        })
    }
}

/// All metrics over a corpus. CIDEr needs at least two clips.
pub fn evaluate(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<ScoreReport> {
    let c: Vec<Vec<String>> = candidates.iter().map(|t| strip_special(t)).collect();
    let r: Vec<Vec<Vec<String>>> = references
        .iter()
        .map(|rs| rs.iter().map(|t| strip_special(t)).collect())
        .collect();
    Ok(ScoreReport {
        bleu: bleu_all(&c, &r)?,
        cider: cider(&c, &r)?,
        meteor: meteor(&c, &r)?,
        rouge_l: rouge_l(&c, &r)?,
    })
}

/// Reads `clip_id<TAB>caption` lines, in file order.
pub fn read_caption_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_once('\t')
                .map(|(id, c)| (id.trim().to_string(), c.trim().to_string()))
                .ok_or_else(|| Error::InvalidInput(format!("{}:{}: expected clip_id<TAB>caption", path.display(), i + 1)))
        })
        .collect()
}

fn words(caption: &str) -> Vec<String> {
    // empty or all-punctuation candidates score zero rather than failing
    clean_caption(caption).map(|c| c.words().to_vec()).unwrap_or_default()
}

/// Scores a candidate file against a reference file (references may repeat
/// a clip id). Every candidate clip needs at least one reference.
pub fn score_files(candidates: &Path, references: &Path) -> Result<ScoreReport> {
    let cands = read_caption_file(candidates)?;
    let mut refs: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for (id, c) in read_caption_file(references)? {
        refs.entry(id).or_default().push(words(&c));
    }
    let mut seen = std::collections::HashSet::new();
    let mut c_out = Vec::new();
    let mut r_out = Vec::new();
    for (id, c) in cands {
        if !seen.insert(id.clone()) {
            return Err(Error::InvalidInput(format!("clip `{id}` has more than one candidate")));
        }
        let r = refs
            .get(&id)
            .ok_or_else(|| Error::InvalidInput(format!("no reference caption for clip `{id}`")))?;
        c_out.push(words(&c));
        r_out.push(r.clone());
    }
    evaluate(&c_out, &r_out)
}
