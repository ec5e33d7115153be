use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{sha256_hex, write_atomic};
use crate::semantics::{to_root, Tag, TagLexicon};
use crate::text::TokenizedCaption;

/// Nouns before the first verb (the subject) plus every verb, in caption
/// order, as surface forms.
pub fn extract_subjects_verbs(caption: &TokenizedCaption, lex: &TagLexicon) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen_verb = false;
    for w in caption.words() {
        match lex.tag(w) {
            Tag::Verb => {
                seen_verb = true;
                out.push(w.clone());
            }
            Tag::Noun if !seen_verb => out.push(w.clone()),
            _ => {}
        }
    }
    out
}

fn roots(caption: &TokenizedCaption, lex: &TagLexicon) -> Vec<String> {
    extract_subjects_verbs(caption, lex).iter().map(|w| to_root(w)).collect()
}

/// Ordered, duplicate-free root words, tied to the lexicon that built it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectVerbCorpus {
    words: Vec<String>,
    lexicon_fingerprint: String,
}

impl SubjectVerbCorpus {
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lexicon_fingerprint(&self) -> &str {
        &self.lexicon_fingerprint
    }

    /// One word per line, after a `# lexicon=<sha256>` line.
    pub fn to_text(&self) -> String {
        let mut s = format!("# lexicon={}\n", self.lexicon_fingerprint);
        for w in &self.words {
            s.push_str(w);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let fp = lines
            .next()
            .and_then(|l| l.strip_prefix("# lexicon="))
            .ok_or_else(|| Error::InvalidInput("corpus file lacks its `# lexicon=` line".into()))?
            .to_string();
        let words: Vec<String> = lines.filter(|l| !l.is_empty()).map(str::to_string).collect();
        let unique: HashSet<&String> = words.iter().collect();
        if unique.len() != words.len() {
            return Err(Error::InvalidInput("corpus file repeats a word".into()));
        }
        Ok(Self {
            words,
            lexicon_fingerprint: fp,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    fn check_lexicon(&self, lex: &TagLexicon) -> Result<()> {
        if lex.fingerprint() != self.lexicon_fingerprint {
            return Err(Error::Config(
                "subject-verb corpus was built with a different tag lexicon".into(),
            ));
        }
        Ok(())
    }
}

/// Unique roots of every caption's subjects and verbs, first appearance
/// first.
pub fn build_corpus<'a>(captions: impl IntoIterator<Item = &'a TokenizedCaption>, lex: &TagLexicon) -> SubjectVerbCorpus {
    let mut words = Vec::new();
    let mut seen = HashSet::new();
    for c in captions {
        for r in roots(c, lex) {
            if seen.insert(r.clone()) {
                words.push(r);
            }
        }
    }
    if words.is_empty() {
        log::warn!("subject-verb corpus is empty (K=0); SVE features are disabled");
    }
    SubjectVerbCorpus {
        words,
        lexicon_fingerprint: lex.fingerprint(),
    }
}

/// A 0/1 vector over the corpus words.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SveVector {
    pub bits: Vec<u8>,
}

impl SveVector {
    pub fn zeros(k: usize) -> Self {
        Self { bits: vec![0; k] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

fn encode_roots(roots: &HashSet<String>, corpus: &SubjectVerbCorpus) -> SveVector {
    SveVector {
        bits: corpus.words.iter().map(|w| roots.contains(w) as u8).collect(),
    }
}

/// Bit `k` is 1 iff the caption's rooted subjects/verbs include
/// `corpus[k]`.
pub fn encode_sve(caption: &TokenizedCaption, corpus: &SubjectVerbCorpus, lex: &TagLexicon) -> Result<SveVector> {
    corpus.check_lexicon(lex)?;
    Ok(encode_roots(&roots(caption, lex).into_iter().collect(), corpus))
}

/// Element-wise OR over all captions of one clip.
pub fn encode_clip_sve<'a>(
    captions: impl IntoIterator<Item = &'a TokenizedCaption>,
    corpus: &SubjectVerbCorpus,
    lex: &TagLexicon,
) -> Result<SveVector> {
    corpus.check_lexicon(lex)?;
    let all: HashSet<String> = captions.into_iter().flat_map(|c| roots(c, lex)).collect();
    Ok(encode_roots(&all, corpus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::clean_caption;

    fn cap(s: &str) -> TokenizedCaption {
        clean_caption(s).unwrap()
    }

    #[test]
    fn extraction_examples() {
        let lex = TagLexicon::builtin();
        assert_eq!(extract_subjects_verbs(&cap("dog barks loudly"), &lex), ["dog", "barks"]);
        assert!(extract_subjects_verbs(&cap("loudly"), &lex).is_empty());
        assert_eq!(
            extract_subjects_verbs(&cap("man speaks dog barks"), &lex),
            ["man", "speaks", "barks"]
        );
    }

    #[test]
    fn corpus_and_sve() {
        let lex = TagLexicon::builtin();
        let caps = [cap("dog barks"), cap("man speaks")];
        let c = build_corpus(&caps, &lex);
        assert_eq!(c.words(), ["dog", "bark", "man", "speak"]);
        assert_eq!(build_corpus(caps.iter().chain(&caps), &lex), c);
        assert_eq!(encode_sve(&caps[0], &c, &lex).unwrap().bits, [1, 1, 0, 0]);
        assert_eq!(encode_sve(&cap("quietly"), &c, &lex).unwrap().bits, [0, 0, 0, 0]);
        assert_eq!(encode_clip_sve(&caps, &c, &lex).unwrap().bits, [1, 1, 1, 1]);
        let empty = build_corpus(&[cap("very loudly")], &lex);
        assert!(empty.is_empty());
    }

    #[test]
    fn lexicon_mismatch_is_rejected() {
        let lex = TagLexicon::builtin();
        let c = build_corpus(&[cap("dog barks")], &lex);
        let mut other = lex.clone();
        other.insert("dog", Tag::Verb);
        assert!(matches!(encode_sve(&cap("dog barks"), &c, &other), Err(Error::Config(_))));
    }

    #[test]
    fn text_round_trip() {
        let lex = TagLexicon::builtin();
        let c = build_corpus(&[cap("birds chirp"), cap("car passes")], &lex);
        assert_eq!(SubjectVerbCorpus::from_text(&c.to_text()).unwrap(), c);
        assert!(SubjectVerbCorpus::from_text("dog\n").is_err());
    }
}
