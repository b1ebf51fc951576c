use std::collections::HashSet;

use crate::error::{Error, Result};

use super::tables::data_lines;
use super::PipelineLanguage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
    pub language: PipelineLanguage,
}

impl StopwordList {
    /// One token per line; entries must be lowercase without whitespace.
    pub fn parse(src: &str, language: PipelineLanguage) -> Result<StopwordList> {
        let mut words = HashSet::new();
        for (n, line) in data_lines(src) {
            let word = line.trim();
            if word.chars().any(char::is_whitespace) || word.to_lowercase() != word {
                return Err(Error::Config(format!(
                    "stopword list line {n}: `{word}` must be lowercase with no whitespace"
                )));
            }
            words.insert(word.to_owned());
        }
        Ok(StopwordList { words, language })
    }

    pub fn from_words<I, S>(words: I, language: PipelineLanguage) -> Result<StopwordList>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let joined: Vec<String> = words.into_iter().map(|w| w.as_ref().to_owned()).collect();
        StopwordList::parse(&joined.join("\n"), language)
    }

    /// Set union; the result keeps `self`'s language.
    pub fn union(&self, other: &StopwordList) -> StopwordList {
        StopwordList {
            words: self.words.union(&other.words).cloned().collect(),
            language: self.language,
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn remove_from(&self, text: &str) -> String {
        let kept: Vec<&str> = text.split_whitespace().filter(|w| !self.contains(w)).collect();
        kept.join(" ")
    }
}
