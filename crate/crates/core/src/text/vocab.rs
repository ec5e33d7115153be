use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{sha256_hex, write_atomic};
use crate::text::TokenizedCaption;

pub const PAD: &str = "<pad>";
pub const SOS: &str = "<sos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Word ↔ index tables with the reserved tokens at 0..4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub const PAD_ID: usize = 0;
    pub const SOS_ID: usize = 1;
    pub const EOS_ID: usize = 2;
    pub const UNK_ID: usize = 3;

    /// Only the reserved tokens.
    pub fn new() -> Self {
        let mut v = Self {
            words: Vec::new(),
            index: HashMap::new(),
        };
        for t in [PAD, SOS, EOS, UNK] {
            v.insert(t);
        }
        v
    }

    fn insert(&mut self, w: &str) -> usize {
        if let Some(&i) = self.index.get(w) {
            return i;
        }
        self.words.push(w.to_string());
        self.index.insert(w.to_string(), self.words.len() - 1);
        self.words.len() - 1
    }

    /// Indexes every distinct token in first-appearance order.
    pub fn build<'a>(captions: impl IntoIterator<Item = &'a TokenizedCaption>) -> Self {
        let mut v = Self::new();
        for c in captions {
            for t in c.tokens() {
                v.insert(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn is_special(id: usize) -> bool {
        id < 4
    }

    /// Unknown tokens map to `<unk>`.
    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(Self::UNK_ID))
            .collect()
    }

    pub fn encode(&self, caption: &TokenizedCaption) -> Vec<usize> {
        self.encode_tokens(caption.tokens())
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&i| {
                self.word(i).map(str::to_string).ok_or(Error::IndexOutOfRange {
                    index: i,
                    size: self.len(),
                })
            })
            .collect()
    }

    /// Decoded words with reserved tokens removed.
    pub fn decode_words(&self, ids: &[usize]) -> Result<Vec<String>> {
        let words = self.decode(ids)?;
        Ok(ids
            .iter()
            .zip(words)
            .filter(|(&i, _)| !Self::is_special(i))
            .map(|(_, w)| w)
            .collect())
    }

    /// `index<TAB>word` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, w) in self.words.iter().enumerate() {
            writeln!(s, "{i}\t{w}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut v = Self {
            words: Vec::new(),
            index: HashMap::new(),
        };
        for (n, line) in text.lines().enumerate() {
            let (idx, word) = line
                .split_once('\t')
                .ok_or_else(|| Error::InvalidInput(format!("vocabulary line {}: missing tab", n + 1)))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::InvalidInput(format!("vocabulary line {}: bad index `{idx}`", n + 1)))?;
            if idx != v.words.len() {
                return Err(Error::InvalidInput(format!(
                    "vocabulary line {}: index {idx}, expected {}",
                    n + 1,
                    v.words.len()
                )));
            }
            if word.is_empty() || v.index.contains_key(word) {
                return Err(Error::InvalidInput(format!("vocabulary line {}: empty or repeated word", n + 1)));
            }
            v.insert(word);
        }
        for (i, t) in [PAD, SOS, EOS, UNK].iter().enumerate() {
            if v.word(i) != Some(t) {
                return Err(Error::InvalidInput(format!("vocabulary must start with {t} at {i}")));
            }
        }
        Ok(v)
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

    /// Hex SHA-256 of the serialized form.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::clean_caption;

    #[test]
    fn reserved_first_then_first_appearance() {
        let caps = [clean_caption("dog").unwrap()];
        let v = Vocabulary::build(&caps);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("dog"), Some(4));
        let caps = [clean_caption("cat meows").unwrap(), clean_caption("dog meows").unwrap()];
        let v = Vocabulary::build(&caps);
        assert_eq!(&v.words()[4..], ["cat", "meows", "dog"]);
        assert_eq!(Vocabulary::build(caps.iter().chain(&caps)), v);
    }

    #[test]
    fn encode_decode() {
        let caps = [clean_caption("birds chirp").unwrap()];
        let v = Vocabulary::build(&caps);
        assert_eq!(v.decode(&v.encode(&caps[0])).unwrap(), caps[0].tokens());
        let other = clean_caption("birds sing").unwrap();
        assert_eq!(v.encode(&other), vec![1, 4, Vocabulary::UNK_ID, 2]);
        assert_eq!(v.decode_words(&[1, 4, 5, 2, 0]).unwrap(), ["birds", "chirp"]);
        assert!(matches!(v.decode(&[99]), Err(Error::IndexOutOfRange { index: 99, size: 6 })));
    }

    #[test]
    fn text_round_trip_and_validation() {
        let caps = [clean_caption("water flows gently").unwrap()];
        let v = Vocabulary::build(&caps);
        assert_eq!(Vocabulary::from_text(&v.to_text()).unwrap(), v);
        assert!(Vocabulary::from_text("0\t<pad>\n2\t<sos>\n").is_err());
        assert!(Vocabulary::from_text("0\tdog\n").is_err());
        assert_eq!(v.fingerprint().len(), 64);
    }
}
