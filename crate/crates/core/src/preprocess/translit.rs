use std::collections::HashMap;

use super::tables::tsv_pairs;
use crate::error::{Error, Result};

pub const DEVANAGARI_BLOCK: std::ops::RangeInclusive<u32> = 0x0900..=0x097F;

pub fn is_devanagari(c: char) -> bool {
    DEVANAGARI_BLOCK.contains(&(c as u32))
}

/// Devanagari codepoint to lowercase ASCII romanization.
#[derive(Debug, Clone)]
pub struct TranslitTable {
    map: HashMap<char, String>,
}

impl TranslitTable {
    /// Lines are `<hex codepoint>\t<replacement>`; the replacement may be
    /// empty (for instance the virama).
    pub fn parse(src: &str) -> Result<TranslitTable> {
        let mut map = HashMap::new();
        for pair in tsv_pairs(src, "transliteration table") {
            let (hex, rep) = pair?;
            let c = u32::from_str_radix(hex.trim(), 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| Error::Config(format!("transliteration table: bad codepoint `{hex}`")))?;
            if !rep.is_ascii() {
                return Err(Error::Config(format!("transliteration of U+{:04X} is not ASCII", c as u32)));
            }
            map.insert(c, rep.to_owned());
        }
        Ok(TranslitTable { map })
    }

    pub fn get(&self, c: char) -> Option<&str> {
        self.map.get(&c).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Maps every Devanagari codepoint through the table. Codepoints without
    /// an entry are dropped; the second value counts them.
    pub fn transliterate(&self, text: &str) -> (String, usize) {
        let mut out = String::with_capacity(text.len());
        let mut dropped = 0;
        for c in text.chars() {
            if !is_devanagari(c) {
                out.push(c);
            } else if let Some(rep) = self.map.get(&c) {
                out.push_str(rep);
            } else {
                dropped += 1;
            }
        }
        (out, dropped)
    }
}
