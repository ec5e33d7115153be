//! Builds a subject/verb corpus from a few captions and encodes each one.
//!
//!     cargo run --example subject_verb_embedding

use aucap::semantics::{build_corpus, encode_clip_sve, encode_sve, extract_subjects_verbs, TagLexicon};
use aucap::text::clean_caption;

fn main() -> aucap::Result<()> {
    let raw = [
        "A dog barks while cars pass by.",
        "Birds are chirping and a man speaks.",
        "Water flows over rocks in a stream",
        "The dogs were barking loudly",
    ];
    let caps = raw.iter().map(|c| clean_caption(c)).collect::<aucap::Result<Vec<_>>>()?;
    let lex = TagLexicon::builtin();
    let corpus = build_corpus(&caps, &lex);
    println!("corpus ({}): {}", corpus.len(), corpus.words().join(" "));

    for c in &caps {
        let bits = encode_sve(c, &corpus, &lex)?.bits;
        let bits: String = bits.iter().map(|b| char::from(b'0' + b)).collect();
        println!("{bits}  {:?} <- {}", extract_subjects_verbs(c, &lex), c.text());
    }
    let all = encode_clip_sve(&caps, &corpus, &lex)?;
    println!("clip OR has {} of {} bits set", all.ones(), all.len());
    Ok(())
}
