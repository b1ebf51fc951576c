//! Hate-speech detection for English and Hindi-English code-mixed social
//! media text.

pub mod annotation;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod preprocess;
pub mod tokenizer;

pub use corpus::{Comment, Dataset, Label, Language, Platform, SplitSpec};
pub use error::{Error, Result};
pub use tokenizer::{encode, load_vocab, wordpiece_tokenize, TokenSequence, Tokenizer, Vocabulary};
