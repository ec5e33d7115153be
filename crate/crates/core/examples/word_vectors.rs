//! Trains skip-gram vectors on templated captions and lists each word's
//! nearest neighbour.
//!
//!     cargo run --example word_vectors

use aucap::synthetic::subject_verb_captions;
use aucap::text::{clean_caption, train_word2vec, Vocabulary, Word2VecConfig};

fn main() -> aucap::Result<()> {
    let caps = subject_verb_captions(200, 1)
        .iter()
        .map(|c| clean_caption(c))
        .collect::<aucap::Result<Vec<_>>>()?;
    let vocab = Vocabulary::build(&caps);
    let sentences: Vec<Vec<usize>> = caps.iter().map(|c| vocab.encode(c)).collect();
    let cfg = Word2VecConfig {
        dim: 16,
        window: 2,
        epochs: 20,
        ..Word2VecConfig::default()
    };
    let table = train_word2vec(&sentences, vocab.len(), &cfg)?;
    println!("loss per epoch: first {:.3}, last {:.3}", table.epoch_loss[0], table.epoch_loss.last().unwrap());

    for (id, w) in vocab.words().iter().enumerate().filter(|(id, _)| !Vocabulary::is_special(*id)) {
        let (best, sim) = (4..vocab.len())
            .filter(|&o| o != id)
            .map(|o| (o, table.cosine(id, o)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!("{w:>8} ~ {:<8} {sim:.3}", vocab.words()[best]);
    }
    Ok(())
}
