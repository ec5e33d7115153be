use crate::error::Result;
use crate::metrics::{check_corpus, order_free_mean};
use crate::semantics::to_root;

const ALPHA_WEIGHT: f64 = 9.0;
const PENALTY_GAMMA: f64 = 0.5;
const PENALTY_POWER: f64 = 3.0;

/// One-to-one word alignment: `pairs[i] = (candidate pos, reference pos)`,
/// sorted by candidate position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    /// Greedy alignment in two stages: exact word match, then match on
    /// [`to_root`]. Within a stage candidate words are taken left to right;
    /// each picks the reference position right after its predecessor's
    /// match when possible, otherwise the leftmost free one.
    pub fn build(candidate: &[String], reference: &[String]) -> Self {
        let mut cand_ref: Vec<Option<usize>> = vec![None; candidate.len()];
        let mut used = vec![false; reference.len()];
        let cand_roots: Vec<String> = candidate.iter().map(|w| to_root(w)).collect();
        let ref_roots: Vec<String> = reference.iter().map(|w| to_root(w)).collect();
        let stages: [(&[String], &[String]); 2] = [(candidate, reference), (&cand_roots, &ref_roots)];
        for (c, r) in stages {
            for i in 0..c.len() {
                if cand_ref[i].is_some() {
                    continue;
                }
                let next_to_prev = i
                    .checked_sub(1)
                    .and_then(|p| cand_ref[p])
                    .map(|j| j + 1)
                    .filter(|&j| j < r.len() && !used[j] && r[j] == c[i]);
                let pick = next_to_prev.or_else(|| (0..r.len()).find(|&j| !used[j] && r[j] == c[i]));
                if let Some(j) = pick {
                    used[j] = true;
                    cand_ref[i] = Some(j);
                }
            }
        }
        Self {
            pairs: cand_ref.iter().enumerate().filter_map(|(i, j)| j.map(|j| (i, j))).collect(),
        }
    }

    pub fn matches(&self) -> usize {
        self.pairs.len()
    }

    /// Runs of matches adjacent in both sentences.
    pub fn chunks(&self) -> usize {
        if self.pairs.is_empty() {
            return 0;
        }
        1 + self
            .pairs
            .windows(2)
            .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
            .count()
    }
}

/// Best METEOR score of `candidate` over its references:
/// `F_mean · (1 − 0.5·(chunks/m)³)` with `F_mean = 10PR / (R + 9P)`.
pub fn meteor_sentence(candidate: &[String], references: &[Vec<String>]) -> f64 {
    references
        .iter()
        .map(|r| {
            let a = Alignment::build(candidate, r);
            let m = a.matches() as f64;
            if m == 0.0 {
                return 0.0;
            }
            let p = m / candidate.len() as f64;
            let rec = m / r.len() as f64;
            let f_mean = (1.0 + ALPHA_WEIGHT) * p * rec / (rec + ALPHA_WEIGHT * p);
            let penalty = PENALTY_GAMMA * (a.chunks() as f64 / m).powf(PENALTY_POWER);
            f_mean * (1.0 - penalty)
        })
        .fold(0.0, f64::max)
}

pub fn meteor(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    check_corpus(candidates, references)?;
    Ok(order_free_mean(
        candidates
            .iter()
            .zip(references)
            .map(|(c, r)| meteor_sentence(c, r))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::toks;

    #[test]
    fn chunk_counting() {
        let a = Alignment::build(&toks("a b x c d"), &toks("a b c d"));
        assert_eq!(a.matches(), 4);
        assert_eq!(a.chunks(), 2);
        // repeated word continues the current chunk instead of jumping back
        let a = Alignment::build(&toks("the dog the cat"), &toks("the dog the cat"));
        assert_eq!(a.chunks(), 1);
    }
}
