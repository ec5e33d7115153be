//! Scores two candidate sets against the same references.
//!
//!     cargo run --example caption_metrics

use aucap::metrics::evaluate;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn main() -> aucap::Result<()> {
    let refs = vec![
        vec![words("a dog barks at a passing car"), words("a dog is barking loudly")],
        vec![words("rain falls on a metal roof"), words("heavy rain hits the roof")],
        vec![words("birds chirp in the trees"), words("several birds are singing")],
    ];
    let good = vec![
        words("a dog is barking at a car"),
        words("rain falls on the roof"),
        words("birds are chirping in the trees"),
    ];
    let bad = vec![words("a car passes"), words("people talk"), words("a dog barks")];

    for (name, cands) in [("close", &good), ("off", &bad)] {
        println!("{name}:\n{}", evaluate(cands, &refs)?.to_table());
    }
    Ok(())
}
