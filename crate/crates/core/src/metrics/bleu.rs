use crate::error::Result;
use crate::metrics::{check_corpus, ngram_counts};

/// Corpus totals `(clipped matches, candidate n-grams)` for order `n`.
/// Each candidate n-gram count is clipped by its largest count in any one
/// reference.
pub fn clipped_precision(candidates: &[Vec<String>], references: &[Vec<Vec<String>>], n: usize) -> (usize, usize) {
    let mut hits = 0;
    let mut total = 0;
    for (cand, refs) in candidates.iter().zip(references) {
        let counts = ngram_counts(cand, n);
        let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
        for (g, &c) in &counts {
            let max_ref = ref_counts.iter().map(|rc| rc.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
            hits += c.min(max_ref);
        }
        total += cand.len().saturating_sub(n - 1);
    }
    (hits, total)
}

/// Closest reference length, shorter one on ties.
fn closest_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

/// Corpus BLEU-n: geometric mean of clipped precisions for orders `1..=n`
/// times the brevity penalty. Any zero precision gives 0 (no smoothing).
pub fn bleu(candidates: &[Vec<String>], references: &[Vec<Vec<String>>], n: usize) -> Result<f64> {
    check_corpus(candidates, references)?;
    let c: usize = candidates.iter().map(Vec::len).sum();
    let r: usize = candidates
        .iter()
        .zip(references)
        .map(|(cand, refs)| closest_ref_len(cand.len(), refs))
        .sum();
    if c == 0 || n == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        let (hits, total) = clipped_precision(candidates, references, k);
        if hits == 0 || total == 0 {
            return Ok(0.0);
        }
        log_sum += (hits as f64 / total as f64).ln();
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok(bp * (log_sum / n as f64).exp())
}

/// `[BLEU-1, BLEU-2, BLEU-3, BLEU-4]`.
pub fn bleu_all(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (n, o) in out.iter_mut().enumerate() {
        *o = bleu(candidates, references, n + 1)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::toks;

    #[test]
    fn clipping_example() {
        let c = vec![toks("the the the")];
        let r = vec![vec![toks("the cat")]];
        assert_eq!(clipped_precision(&c, &r, 1), (1, 3));
        assert!((bleu(&c, &r, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_uses_closest_reference() {
        let c = vec![toks("a b")];
        let r = vec![vec![toks("a b c d"), toks("a b c d e f g")]];
        let expect = (1.0f64 - 4.0 / 2.0).exp();
        assert!((bleu(&c, &r, 1).unwrap() - expect).abs() < 1e-12);
        // equal distance: the shorter reference wins
        assert_eq!(closest_ref_len(4, &[toks("a b c"), toks("a b c d e")]), 3);
    }
}
