use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::metrics::{check_corpus, ngram_counts, order_free_mean};

const MAX_N: usize = 4;

type Vector<'a> = BTreeMap<&'a [String], f64>;

/// TF-IDF vector of one sentence for order `n`: term frequency is the
/// n-gram count over the sentence's n-gram total, IDF is
/// `ln(clips / max(1, document frequency))`.
fn tfidf<'a>(tokens: &'a [String], n: usize, df: &HashMap<&[String], usize>, docs: f64) -> Vector<'a> {
    let counts = ngram_counts(tokens, n);
    let total: usize = counts.values().sum();
    // ordered map: float sums must not depend on hash order
    counts
        .into_iter()
        .map(|(g, c)| {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (g, c as f64 / total as f64 * (docs / d).ln())
        })
        .collect()
}

fn cosine(a: &Vector, b: &Vector) -> f64 {
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// CIDEr in its original form: for n = 1..4 the cosine similarity of
/// TF-IDF n-gram vectors, averaged over references and scaled by 10, then
/// averaged over n and over clips. Document frequencies come from the
/// reference sets, one document per clip, so at least two clips are
/// required.
pub fn cider(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    check_corpus(candidates, references)?;
    if candidates.len() < 2 {
        return Err(Error::Metric(
            "CIDEr needs at least two clips: document frequencies are undefined for one".into(),
        ));
    }
    let docs = references.len() as f64;
    let mut per_clip = vec![0.0; candidates.len()];
    for n in 1..=MAX_N {
        let mut df: HashMap<&[String], usize> = HashMap::new();
        for refs in references {
            let seen: HashSet<&[String]> = refs.iter().flat_map(|r| r.windows(n)).collect();
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        for (i, (cand, refs)) in candidates.iter().zip(references).enumerate() {
            let vc = tfidf(cand, n, &df, docs);
            let sim: f64 = refs.iter().map(|r| cosine(&vc, &tfidf(r, n, &df, docs))).sum::<f64>() / refs.len() as f64;
            per_clip[i] += 10.0 * sim / MAX_N as f64;
        }
    }
    Ok(order_free_mean(per_clip))
}
