use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::social::collapse_whitespace;
use super::tables::tsv_pairs;
use crate::error::{Error, Result};

/// Codepoint ranges treated as emoji or emoji sequence components.
pub const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x00A9, 0x00A9),
    (0x00AE, 0x00AE),
    (0x200D, 0x200D),
    (0x203C, 0x203C),
    (0x2049, 0x2049),
    (0x20E3, 0x20E3),
    (0x2122, 0x2122),
    (0x2139, 0x2139),
    (0x2190, 0x21FF),
    (0x2300, 0x23FF),
    (0x24C2, 0x24C2),
    (0x25AA, 0x25AB),
    (0x25B6, 0x25B6),
    (0x25C0, 0x25C0),
    (0x25FB, 0x25FE),
    (0x2600, 0x27BF),
    (0x2900, 0x297F),
    (0x2B00, 0x2BFF),
    (0x3030, 0x3030),
    (0x303D, 0x303D),
    (0x3297, 0x3297),
    (0x3299, 0x3299),
    (0xFE00, 0xFE0F),
    (0x1F000, 0x1FAFF),
    (0xE0020, 0xE007F),
];

pub fn is_emoji_char(c: char) -> bool {
    let c = c as u32;
    EMOJI_RANGES.iter().any(|&(lo, hi)| (lo..=hi).contains(&c))
}

/// Joiners, variation selectors, keycap and tag characters: parts of a
/// sequence that are not counted as unknown emoji on their own.
fn is_component(c: char) -> bool {
    matches!(c as u32, 0x200D | 0x20E3 | 0xFE00..=0xFE0F | 0x1F3FB..=0x1F3FF | 0xE0020..=0xE007F)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemojizeMode {
    ReplaceWithName,
    Remove,
}

/// Emoji sequence to name. Names are lowercase ASCII with separators removed.
#[derive(Debug, Clone)]
pub struct EmojiTable {
    names: HashMap<String, String>,
    max_chars: usize,
}

impl EmojiTable {
    pub fn parse(src: &str) -> Result<EmojiTable> {
        let mut names = HashMap::new();
        for pair in tsv_pairs(src, "emoji table") {
            let (glyph, name) = pair?;
            let name: String = name
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            if glyph.is_empty() || name.is_empty() {
                return Err(Error::Config(format!("emoji table: empty entry for `{glyph}`")));
            }
            names.insert(glyph.to_owned(), name);
        }
        let max_chars = names.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Ok(EmojiTable { names, max_chars })
    }

    pub fn name(&self, glyph: &str) -> Option<&str> {
        self.names.get(glyph).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.values().map(String::as_str)
    }

    /// Replaces (or removes) every emoji sequence, longest table match
    /// first. Emoji missing from the table are removed; the second value
    /// counts them.
    pub fn demojize(&self, text: &str, mode: DemojizeMode) -> (String, usize) {
        if !text.chars().any(is_emoji_char) {
            return (text.to_owned(), 0);
        }
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len() + 16);
        let mut unknown = 0;
        let mut i = 0;
        let mut key = String::new();
        while i < chars.len() {
            if !is_emoji_char(chars[i]) {
                out.push(chars[i]);
                i += 1;
                continue;
            }
            let longest = self.max_chars.min(chars.len() - i);
            let hit = (1..=longest).rev().find_map(|len| {
                key.clear();
                key.extend(&chars[i..i + len]);
                self.names.get(&key).map(|name| (len, name))
            });
            out.push(' ');
            match hit {
                Some((len, name)) => {
                    if mode == DemojizeMode::ReplaceWithName {
                        out.push_str(name);
                        out.push(' ');
                    }
                    i += len;
                }
                None => {
                    if !is_component(chars[i]) {
                        unknown += 1;
                    }
                    i += 1;
                }
            }
        }
        (collapse_whitespace(&out), unknown)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmojiTable {
        EmojiTable::parse(super::super::tables::EMOJI).unwrap()
    }

    #[test]
    fn names_face_with_symbols() {
        let (s, n) = table().demojize("🤬", DemojizeMode::ReplaceWithName);
        assert_eq!(s, "facewithsymbolsonmouth");
        assert_eq!(n, 0);
    }

    #[test]
    fn removes_thinking_face() {
        assert_eq!(table().demojize("🤔", DemojizeMode::Remove).0, "");
    }

    #[test]
    fn plain_text_untouched() {
        for mode in [DemojizeMode::Remove, DemojizeMode::ReplaceWithName] {
            assert_eq!(table().demojize("abc", mode).0, "abc");
        }
    }

    #[test]
    fn glued_emoji_become_separate_words() {
        let (s, _) = table().demojize("wow🔥🔥", DemojizeMode::ReplaceWithName);
        assert_eq!(s, "wow fire fire");
    }

    #[test]
    fn sequences_match_longest() {
        // woman + ZWJ + laptop, and a skin-tone thumbs up
        let t = table();
        let (s, n) = t.demojize("\u{1F469}\u{200D}\u{1F4BB} \u{1F44D}\u{1F3FD}", DemojizeMode::ReplaceWithName);
        assert_eq!(n, 0);
        assert_eq!(s, "womantechnologist thumbsupmediumskintone");
    }

    #[test]
    fn unknown_emoji_removed_and_counted() {
        // U+1FAFF is inside the emoji block but unassigned
        let (s, n) = table().demojize("a \u{1FAFF} b", DemojizeMode::ReplaceWithName);
        assert_eq!(s, "a b");
        assert_eq!(n, 1);
    }

    #[test]
    fn names_are_lowercase_alphanumeric() {
        let t = table();
        assert!(t.len() > 3000);
        for name in t.names() {
            assert!(name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()), "{name}");
        }
    }
}
