use std::collections::HashMap;

use super::social::{is_boundary, URL};
use super::tables::tsv_pairs;
use crate::error::{Error, Result};

/// Contraction and abbreviation expansions, keyed by lowercase surface form.
#[derive(Debug, Clone)]
pub struct ContractionTable {
    map: HashMap<String, String>,
    max_key_chars: usize,
}

impl ContractionTable {
    pub fn parse(src: &str) -> Result<ContractionTable> {
        let mut map = HashMap::new();
        for pair in tsv_pairs(src, "contraction table") {
            let (key, expansion) = pair?;
            let key = normalize_apostrophes(&key.trim().to_lowercase());
            if key.is_empty() || key.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("contraction key `{key}` must be a single word")));
            }
            map.insert(key, expansion.trim().to_lowercase());
        }
        let max_key_chars = map.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Ok(ContractionTable { map, max_key_chars })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Replaces each whole-word occurrence of a key with its expansion.
    ///
    /// A word is delimited by the text edges or by any character
    /// [`strip_social`](super::strip_social) would turn into a space, so
    /// keys are matched exactly where stripping would later leave them as
    /// standalone tokens. Matching is case-insensitive and treats `’` as `'`;
    /// the longest key wins at each position. URLs are copied verbatim and
    /// the start of a URL also ends a word.
    pub fn expand(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        // URL spans as char ranges
        let mut urls = URL.find_iter(text).map(|m| {
            let start = text[..m.start()].chars().count();
            (start, start + m.as_str().chars().count())
        });
        let mut next_url = urls.next();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        let mut candidate = String::new();
        while i < chars.len() {
            if let Some((start, end)) = next_url {
                if i == start {
                    out.extend(&chars[start..end]);
                    i = end;
                    next_url = urls.next();
                    continue;
                }
            }
            let url_start = next_url.map_or(usize::MAX, |(s, _)| s);
            let starts_word = i == 0 || is_boundary(chars[i - 1]);
            if starts_word && !is_boundary(chars[i]) {
                let longest = self.max_key_chars.min(chars.len().min(url_start) - i);
                let hit = (1..=longest).rev().find_map(|len| {
                    let end = i + len;
                    if end < chars.len() && end != url_start && !is_boundary(chars[end]) {
                        return None;
                    }
                    candidate.clear();
                    for &c in &chars[i..end] {
                        candidate.extend(c.to_lowercase());
                    }
                    let key = normalize_apostrophes(&candidate);
                    self.map.get(&key).map(|exp| (len, exp))
                });
                if let Some((len, expansion)) = hit {
                    out.push_str(expansion);
                    i += len;
                    continue;
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }
}

fn normalize_apostrophes(s: &str) -> String {
    s.replace(['\u{2019}', '\u{02BC}'], "'")
}
