//! Greedy WordPiece tokenization and fixed-length encoding.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";

/// Surface forms of the four special tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub cls: String,
    pub sep: String,
    pub pad: String,
    pub unk: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        SpecialTokens {
            cls: "[CLS]".into(),
            sep: "[SEP]".into(),
            pad: "[PAD]".into(),
            unk: "[UNK]".into(),
        }
    }
}

/// Token inventory with dense ids. Immutable once built.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    continuation_prefix: String,
    specials: SpecialTokens,
    cls: u32,
    sep: u32,
    pad: u32,
    unk: u32,
}

impl Vocabulary {
    /// Builds a vocabulary where id = position. Line numbers in errors are
    /// 1-based positions.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_specials(tokens, SpecialTokens::default(), DEFAULT_CONTINUATION_PREFIX)
    }

    pub fn with_specials<I, S>(tokens: I, specials: SpecialTokens, continuation_prefix: &str) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Validation {
                    field: format!("vocabulary line {}", i + 1),
                    message: format!("token {tok:?} is empty or contains whitespace"),
                });
            }
            if let Some(first) = index.insert(tok.clone(), i as u32) {
                return Err(Error::DuplicateToken {
                    token: tok.clone(),
                    first_line: first as usize + 1,
                    second_line: i + 1,
                });
            }
        }
        let find = |s: &str| index.get(s).copied().ok_or_else(|| Error::MissingSpecial(s.to_string()));
        let (cls, sep, pad, unk) = (
            find(&specials.cls)?,
            find(&specials.sep)?,
            find(&specials.pad)?,
            find(&specials.unk)?,
        );
        // distinct strings always have distinct ids, but a caller could
        // name the same string twice
        if unk == pad {
            return Err(Error::Validation {
                field: "specials".into(),
                message: "unk and pad must be different tokens".into(),
            });
        }
        Ok(Vocabulary {
            tokens,
            index,
            continuation_prefix: continuation_prefix.to_string(),
            specials,
            cls,
            sep,
            pad,
            unk,
        })
    }

    /// Reads one token per line; the line index is the id.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for tok in &self.tokens {
            writeln!(f, "{tok}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn specials(&self) -> &SpecialTokens {
        &self.specials
    }

    pub fn cls_id(&self) -> u32 {
        self.cls
    }

    pub fn sep_id(&self) -> u32 {
        self.sep
    }

    pub fn pad_id(&self) -> u32 {
        self.pad
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn is_special(&self, id: u32) -> bool {
        id == self.cls || id == self.sep || id == self.pad || id == self.unk
    }
}

pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocabulary> {
    Vocabulary::load(path)
}

/// Greedy longest-match-first segmentation of a single word. If any
/// position has no matching piece the whole word becomes the unk token.
pub fn wordpiece_tokenize(word: &str, vocab: &Vocabulary) -> Vec<String> {
    wordpiece_ids(word, vocab)
        .into_iter()
        .map(|id| vocab.tokens[id as usize].clone())
        .collect()
}

fn wordpiece_ids(word: &str, vocab: &Vocabulary) -> Vec<u32> {
    if word.is_empty() {
        return Vec::new();
    }
    // byte offsets of char boundaries, so slices never split a codepoint
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect();
    let mut pieces = Vec::new();
    let mut candidate = String::new();
    let mut start = 0;
    while start < bounds.len() - 1 {
        let mut found = None;
        for end in (start + 1..bounds.len()).rev() {
            candidate.clear();
            if start > 0 {
                candidate.push_str(&vocab.continuation_prefix);
            }
            candidate.push_str(&word[bounds[start]..bounds[end]]);
            if let Some(id) = vocab.id(&candidate) {
                found = Some((id, end));
                break;
            }
        }
        match found {
            Some((id, end)) => {
                pieces.push(id);
                start = end;
            }
            None => return vec![vocab.unk],
        }
    }
    pieces
}

/// A fixed-length encoded sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    /// Exactly `max_len` ids, padded.
    pub ids: Vec<u32>,
    /// Surface tokens before padding, including cls and sep.
    pub tokens: Vec<String>,
    pub mask: Vec<u8>,
    pub max_len: usize,
    /// For each non-pad position, the index of the whitespace word it came
    /// from; `None` for cls and sep.
    pub word_index: Vec<Option<usize>>,
}

impl TokenSequence {
    /// Number of non-pad positions.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Position of the first piece of each word that survived truncation.
    pub fn word_starts(&self) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut last = None;
        for (pos, w) in self.word_index.iter().enumerate() {
            if let Some(w) = *w {
                if last != Some(w) {
                    starts.push(pos);
                    last = Some(w);
                }
            }
        }
        starts
    }
}

/// Encodes whitespace-separated text as `[cls] pieces.. [sep] [pad]..`.
/// The head of the sequence is kept when truncating and sep is always
/// the last non-pad token.
///
/// Panics if `max_len < 3`.
pub fn encode(text: &str, vocab: &Vocabulary, max_len: usize) -> TokenSequence {
    assert!(max_len >= 3, "max_len must be at least 3, got {max_len}");
    let budget = max_len - 2;
    let mut ids = Vec::with_capacity(max_len);
    let mut word_index = Vec::with_capacity(max_len);
    ids.push(vocab.cls);
    word_index.push(None);
    'words: for (w, word) in text.split_whitespace().enumerate() {
        for id in wordpiece_ids(word, vocab) {
            if ids.len() - 1 == budget {
                break 'words;
            }
            ids.push(id);
            word_index.push(Some(w));
        }
    }
    ids.push(vocab.sep);
    word_index.push(None);
    let tokens: Vec<String> = ids.iter().map(|&id| vocab.tokens[id as usize].clone()).collect();
    let used = ids.len();
    let mut mask = vec![1u8; used];
    ids.resize(max_len, vocab.pad);
    mask.resize(max_len, 0);
    TokenSequence {
        ids,
        tokens,
        mask,
        max_len,
        word_index,
    }
}

/// Inverse of [`encode`] for in-vocabulary text: drops specials and pads
/// and fuses continuation pieces back onto their word.
pub fn detokenize(ids: &[u32], vocab: &Vocabulary) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for &id in ids {
        if id == vocab.cls || id == vocab.sep || id == vocab.pad {
            continue;
        }
        let tok = &vocab.tokens[id as usize];
        match tok.strip_prefix(vocab.continuation_prefix.as_str()) {
            Some(rest) if !words.is_empty() && !vocab.continuation_prefix.is_empty() => {
                words.last_mut().unwrap().push_str(rest)
            }
            _ => words.push(tok.clone()),
        }
    }
    words
}

/// A vocabulary bundled with a fixed sequence length.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    pub vocab: std::sync::Arc<Vocabulary>,
    pub max_len: usize,
}

impl Tokenizer {
    pub fn new(vocab: std::sync::Arc<Vocabulary>, max_len: usize) -> Self {
        Tokenizer { vocab, max_len }
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        encode(text, &self.vocab, self.max_len)
    }
}
