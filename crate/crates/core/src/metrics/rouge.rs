use crate::error::Result;
use crate::metrics::{check_corpus, order_free_mean};

pub const ROUGE_BETA: f64 = 1.2;

/// Longest common subsequence length by dynamic programming.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best F_β over the references, β = 1.2.
pub fn rouge_l_sentence(candidate: &[String], references: &[Vec<String>]) -> f64 {
    let b2 = ROUGE_BETA * ROUGE_BETA;
    references
        .iter()
        .map(|r| {
            let l = lcs_len(candidate, r);
            if l == 0 {
                return 0.0;
            }
            let p = l as f64 / candidate.len() as f64;
            let rec = l as f64 / r.len() as f64;
            (1.0 + b2) * p * rec / (rec + b2 * p)
        })
        .fold(0.0, f64::max)
}

pub fn rouge_l(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    check_corpus(candidates, references)?;
    Ok(order_free_mean(
        candidates
            .iter()
            .zip(references)
            .map(|(c, r)| rouge_l_sentence(c, r))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::toks;

    #[test]
    fn worked_example() {
        let c = toks("a b c d");
        let r = vec![toks("a c d")];
        assert_eq!(lcs_len(&c, &r[0]), 3);
        let (p, rec, b2) = (0.75, 1.0, 1.44);
        let f = (1.0 + b2) * p * rec / (rec + b2 * p);
        assert!((rouge_l_sentence(&c, &r) - f).abs() < 1e-15);
        assert_eq!(rouge_l_sentence(&toks("x y"), &r), 0.0);
        assert_eq!(rouge_l_sentence(&c, std::slice::from_ref(&c)), 1.0);
    }
}
