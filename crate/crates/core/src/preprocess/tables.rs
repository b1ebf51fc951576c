//! Parsing for the line-oriented data files shipped in `data/`.

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const CONTRACTIONS: &str = include_str!("../../data/contractions.tsv");
pub(crate) const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");
pub(crate) const STOPWORDS_HINGLISH: &str = include_str!("../../data/stopwords_hinglish.txt");
pub(crate) const EMOJI: &str = include_str!("../../data/emoji.tsv");
pub(crate) const DEVANAGARI: &str = include_str!("../../data/devanagari.tsv");
pub(crate) const LEMMAS: &str = include_str!("../../data/lemmas.tsv");

/// Non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn data_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Two tab-separated columns; the second may be empty.
pub(crate) fn tsv_pairs<'a>(src: &'a str, what: &'a str) -> impl Iterator<Item = Result<(&'a str, &'a str)>> + 'a {
    data_lines(src).map(move |(n, line)| {
        line.split_once('\t').ok_or_else(|| Error::Config(format!("{what}: line {n} has no tab separator")))
    })
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
