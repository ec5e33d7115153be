//! Corpus-level caption metrics: BLEU-1..4, ROUGE-L, CIDEr and METEOR.
//!
//! Candidates and references are token lists with special tokens already
//! removed (see [`strip_special`]); `references[i]` holds every reference
//! for `candidates[i]`.

mod bleu;
mod cider;
mod meteor;
mod report;
mod rouge;

use std::collections::HashMap;

pub use bleu::{bleu, bleu_all, clipped_precision};
pub use cider::cider;
pub use meteor::{meteor, meteor_sentence, Alignment};
pub use report::{evaluate, read_caption_file, score_files, ScoreReport};
pub use rouge::{lcs_len, rouge_l, rouge_l_sentence, ROUGE_BETA};

use crate::error::{Error, Result};
use crate::text::{EOS, PAD, SOS, UNK};

/// n-gram → count for one sentence.
pub type NGramCounts<'a> = HashMap<&'a [String], usize>;

pub fn ngram_counts(tokens: &[String], n: usize) -> NGramCounts<'_> {
    let mut out = HashMap::new();
    if n == 0 {
        return out;
    }
    for g in tokens.windows(n) {
        *out.entry(g).or_insert(0) += 1;
    }
    out
}

/// Drops `<pad>`, `<sos>`, `<eos>` and `<unk>`.
pub fn strip_special(tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| ![PAD, SOS, EOS, UNK].contains(&t.as_str()))
        .cloned()
        .collect()
}

pub(crate) fn check_corpus(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::Metric("no candidates to score".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Metric(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(Error::Metric(format!("candidate {i} has no references")));
    }
    Ok(())
}

/// Mean of per-clip scores, summed in sorted order so the result does not
/// depend on clip order.
pub(crate) fn order_free_mean(mut xs: Vec<f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / n
}

#[cfg(test)]
pub(crate) fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}
