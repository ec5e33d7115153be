use aucap::semantics::*;
use aucap::text::TokenizedCaption;
use proptest::prelude::*;

const POOL: &[&str] = &[
    "dog", "dogs", "man", "woman", "car", "cars", "bird", "birds", "water", "engine", "barks", "barking", "speaks",
    "talking", "runs", "chirp", "chirps", "flows", "passes", "passing", "loudly", "softly", "the", "and", "while",
    "loud", "distant", "rumbling", "crashed", "waves",
];

fn caption_strategy() -> impl Strategy<Value = TokenizedCaption> {
    prop::collection::vec(prop::sample::select(POOL), 1..9).prop_map(|w| TokenizedCaption::from_words(w).unwrap())
}

/// Independent restatement: locate the first verb, keep nouns left of it
/// and all verbs, root them, deduplicate by linear scan.
fn oracle_corpus(caps: &[TokenizedCaption], lex: &TagLexicon) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in caps {
        let tags: Vec<Tag> = c.words().iter().map(|w| lex.tag(w)).collect();
        let first_verb = tags.iter().position(|&t| t == Tag::Verb).unwrap_or(tags.len());
        for (i, w) in c.words().iter().enumerate() {
            let keep = tags[i] == Tag::Verb || (tags[i] == Tag::Noun && i < first_verb);
            if keep {
                let r = to_root(w);
                if !out.contains(&r) {
                    out.push(r);
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn corpus_matches_oracle(caps in prop::collection::vec(caption_strategy(), 1..=50)) {
        let lex = TagLexicon::builtin();
        let corpus = build_corpus(&caps, &lex);
        prop_assert_eq!(corpus.words(), &oracle_corpus(&caps, &lex)[..]);
        for c in &caps {
            let sve = encode_sve(c, &corpus, &lex).unwrap();
            let roots: Vec<String> = extract_subjects_verbs(c, &lex).iter().map(|w| to_root(w)).collect();
            for (k, w) in corpus.words().iter().enumerate() {
                prop_assert_eq!(sve.bits[k] == 1, roots.contains(w));
            }
            if !roots.is_empty() {
                prop_assert!(sve.ones() >= 1);
            }
        }
    }

    #[test]
    fn corpus_ignores_multiplicity(caps in prop::collection::vec(caption_strategy(), 1..20), reps in 1usize..4) {
        let lex = TagLexicon::builtin();
        let once = build_corpus(&caps, &lex);
        let mut many = Vec::new();
        for c in &caps {
            for _ in 0..reps {
                many.push(c.clone());
            }
        }
        prop_assert_eq!(build_corpus(&many, &lex), once);
    }

    #[test]
    fn to_root_is_idempotent(w in "[a-z]{1,14}") {
        let r = to_root(&w);
        prop_assert_eq!(to_root(&r), r.clone());
        prop_assert!(r.len() <= w.len() + 1);
    }
}

#[test]
fn roots_are_fixed_points_in_corpus() {
    let lex = TagLexicon::builtin();
    let caps: Vec<_> = POOL.iter().map(|w| TokenizedCaption::from_words([*w, "barking"]).unwrap()).collect();
    let corpus = build_corpus(&caps, &lex);
    for w in corpus.words() {
        assert_eq!(&to_root(w), w);
    }
}

#[test]
fn lexicon_file_substitutes_tags() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lex.tsv");
    std::fs::write(&p, "siren\tNOUN\nwail\tVERB\nloudly\tOTHER\n").unwrap();
    let lex = TagLexicon::load(&p).unwrap();
    let c = TokenizedCaption::from_words(["siren", "wails", "loudly"]).unwrap();
    assert_eq!(extract_subjects_verbs(&c, &lex), ["siren", "wails"]);
    let corpus = build_corpus([&c], &lex);
    corpus.save(&dir.path().join("corpus.txt")).unwrap();
    let back = SubjectVerbCorpus::load(&dir.path().join("corpus.txt")).unwrap();
    assert_eq!(encode_sve(&c, &back, &lex).unwrap().bits, [1, 1]);
    assert!(encode_sve(&c, &back, &TagLexicon::builtin()).is_err());
}
