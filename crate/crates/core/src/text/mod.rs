//! Caption cleaning, vocabulary, and skip-gram word vectors.

mod clean;
mod vocab;
pub mod word2vec;

pub use clean::{clean_caption, TokenizedCaption};
pub use vocab::{Vocabulary, EOS, PAD, SOS, UNK};
pub use word2vec::{train_word2vec, Word2VecConfig, WordEmbeddingTable};
