use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::semantics::to_root;
use crate::format::sha256_hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Noun,
    Verb,
    Other,
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NOUN" => Ok(Tag::Noun),
            "VERB" => Ok(Tag::Verb),
            "OTHER" => Ok(Tag::Other),
            _ => Err(Error::InvalidInput(format!("unknown tag `{s}`"))),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Noun => "NOUN",
            Tag::Verb => "VERB",
            Tag::Other => "OTHER",
        })
    }
}

const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "all", "along", "also", "am", "an", "and", "another", "any",
    "are", "around", "as", "at", "away", "back", "be", "because", "been", "before", "behind", "being", "below",
    "beside", "between", "both", "but", "by", "can", "could", "did", "do", "does", "down", "during", "each",
    "either", "else", "even", "ever", "every", "far", "few", "for", "from", "further", "had", "has", "have",
    "he", "her", "here", "him", "his", "how", "if", "in", "inside", "into", "is", "it", "its", "itself", "just",
    "less", "like", "many", "may", "might", "more", "most", "much", "must", "near", "nearby", "next", "no",
    "nor", "not", "now", "of", "off", "often", "on", "once", "one", "only", "onto", "or", "other", "others",
    "our", "out", "outside", "over", "own", "per", "quite", "rather", "same", "several", "she", "should", "so",
    "some", "someone", "something", "somewhere", "still", "such", "than", "that", "the", "their", "them", "then",
    "there", "these", "they", "this", "those", "through", "throughout", "to", "together", "too", "toward",
    "towards", "two", "under", "until", "up", "upon", "very", "via", "was", "we", "were", "what", "when",
    "where", "which", "while", "who", "whom", "whose", "why", "will", "with", "within", "without", "would",
    "yet", "you", "your",
];

const ADJECTIVES: &[&str] = &[
    "big", "bright", "busy", "calm", "clear", "close", "constant", "continuous", "dark", "deep", "different",
    "distant", "dry", "empty", "fast", "faint", "first", "full", "gentle", "good", "great", "hard", "heavy",
    "high", "huge", "large", "last", "little", "long", "loud", "low", "metal", "metallic", "multiple", "new",
    "noisy", "old", "quick", "quiet", "rapid", "repeated", "rhythmic", "sharp", "short", "silent", "slow",
    "small", "soft", "steady", "strong", "sudden", "thin", "various", "warm", "wet", "wooden", "young",
];

const VERBS: &[&str] = &[
    "applaud", "approach", "arrive", "bang", "bark", "beep", "begin", "blow", "boil", "bounce", "break",
    "breathe", "bubble", "buzz", "call", "chant", "chatter", "cheer", "chew", "chime", "chirp", "chop",
    "clang", "clap", "clatter", "click", "climb", "close", "come", "continue", "converse", "cough", "crackle",
    "crash", "crawl", "creak", "croak", "crow", "crunch", "cry", "cut", "dig", "drag", "drip", "drive", "drop",
    "drum", "eat", "echo", "fall", "fill", "flap", "flow", "fly", "get", "giggle", "go", "grind", "growl",
    "grunt", "hammer", "hiss", "hit", "honk", "hoot", "howl", "hum", "jingle", "jump", "kick", "knock",
    "land", "laugh", "leave", "make", "meow", "moo", "move", "mumble", "open", "pass", "pat", "play", "pour",
    "pull", "purr", "push", "quack", "rain", "rattle", "ring", "roar", "roll", "rub", "rumble", "run",
    "rustle", "say", "scrape", "scratch", "scream", "screech", "shake", "shout", "shuffle", "sing", "sizzle",
    "slam", "slide", "snore", "speak", "splash", "squawk", "squeak", "squeal", "start", "step", "stir",
    "stop", "strike", "swim", "swing", "tap", "talk", "tick", "toot", "turn", "type", "wail", "walk",
    "whine", "whir", "whistle", "whisper", "yell", "zip",
];

/// Part-of-speech lookup: a word table plus suffix fallbacks.
///
/// Lookup order: the word, then its root, then the fallback rules
/// (stopword → OTHER, `-ing`/`-ed` → VERB, `-ly` → OTHER, else NOUN).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagLexicon {
    table: BTreeMap<String, Tag>,
}

impl Default for TagLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TagLexicon {
    /// Table with no entries; only the fallback rules apply.
    pub fn empty() -> Self {
        Self { table: BTreeMap::new() }
    }

    /// A general-purpose table for everyday sound descriptions.
    pub fn builtin() -> Self {
        let mut table = BTreeMap::new();
        for w in STOPWORDS.iter().chain(ADJECTIVES) {
            table.insert(w.to_string(), Tag::Other);
        }
        for w in VERBS {
            table.insert(w.to_string(), Tag::Verb);
        }
        Self { table }
    }

    pub fn insert(&mut self, word: &str, tag: Tag) {
        self.table.insert(word.to_string(), tag);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn tag(&self, word: &str) -> Tag {
        if let Some(&t) = self.table.get(word) {
            return t;
        }
        if let Some(&t) = self.table.get(&to_root(word)) {
            return t;
        }
        if word.ends_with("ing") || word.ends_with("ed") {
            Tag::Verb
        } else if word.ends_with("ly") {
            Tag::Other
        } else {
            Tag::Noun
        }
    }

    /// `word<TAB>TAG` lines.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lex = Self::empty();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (w, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::InvalidInput(format!("lexicon line {}: missing tab", n + 1)))?;
            lex.insert(w.trim(), t.trim().parse()?);
        }
        Ok(lex)
    }

    pub fn to_text(&self) -> String {
        self.table.iter().map(|(w, t)| format!("{w}\t{t}\n")).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Hex SHA-256 of the sorted table.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_via_table_root_and_fallback() {
        let lex = TagLexicon::builtin();
        assert_eq!(lex.tag("dog"), Tag::Noun);
        assert_eq!(lex.tag("barks"), Tag::Verb);
        assert_eq!(lex.tag("talking"), Tag::Verb);
        assert_eq!(lex.tag("loudly"), Tag::Other);
        assert_eq!(lex.tag("the"), Tag::Other);
        assert_eq!(lex.tag("whooshing"), Tag::Verb);
        assert_eq!(lex.tag("engine"), Tag::Noun);
    }

    #[test]
    fn text_round_trip() {
        let mut lex = TagLexicon::empty();
        lex.insert("bark", Tag::Verb);
        lex.insert("dog", Tag::Noun);
        let back = TagLexicon::from_text(&lex.to_text()).unwrap();
        assert_eq!(back, lex);
        assert_eq!(back.fingerprint(), lex.fingerprint());
        assert!(TagLexicon::from_text("dog\tADJ\n").is_err());
        assert_ne!(TagLexicon::builtin().fingerprint(), lex.fingerprint());
    }
}
