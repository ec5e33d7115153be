use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::text::{EOS, PAD, SOS, UNK};

/// A cleaned caption wrapped in `<sos>` … `<eos>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenizedCaption {
    tokens: Vec<String>,
}

impl TokenizedCaption {
    /// Wraps already-clean words. Words are not re-validated.
    pub fn from_words<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut tokens = vec![SOS.to_string()];
        tokens.extend(words.into_iter().map(Into::into));
        if tokens.len() == 1 {
            return Err(Error::EmptyCaption(String::new()));
        }
        tokens.push(EOS.to_string());
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// The words between `<sos>` and `<eos>`.
    pub fn words(&self) -> &[String] {
        &self.tokens[1..self.tokens.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interior words joined by single spaces.
    pub fn text(&self) -> String {
        self.words().join(" ")
    }
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").unwrap())
}

fn is_special(t: &str) -> bool {
    [PAD, SOS, EOS, UNK].contains(&t)
}

/// Lowercases, strips Unicode punctuation, splits on whitespace, drops
/// one-character and digit-bearing tokens, then wraps the rest.
pub fn clean_caption(raw: &str) -> Result<TokenizedCaption> {
    let words: Vec<String> = raw
        .split_whitespace()
        .filter(|t| !is_special(t))
        .flat_map(|t| {
            let lowered = t.to_lowercase();
            punctuation()
                .replace_all(&lowered, "")
                .split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .filter(|w| w.chars().count() > 1 && !w.chars().any(char::is_numeric))
        .collect();
    if words.is_empty() {
        return Err(Error::EmptyCaption(raw.to_string()));
    }
    TokenizedCaption::from_words(words)
}
