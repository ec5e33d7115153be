//! Subject/verb extraction, the root-word corpus, and binary SVE vectors.

mod corpus;
mod lexicon;
mod stem;

pub use corpus::{build_corpus, encode_clip_sve, encode_sve, extract_subjects_verbs, SubjectVerbCorpus, SveVector};
pub use lexicon::{Tag, TagLexicon};
pub use stem::to_root;
