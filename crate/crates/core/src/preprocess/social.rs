use std::sync::LazyLock;

use regex::Regex;

use super::emoji::{is_emoji_char, EMOJI_RANGES};

pub(crate) static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)https?://\S+|\bwww\.\S+").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#\w+").unwrap());

/// Punctuation, symbols, control and format characters, minus the emoji ranges
/// (those are left for the demojize stage).
static REMOVED: LazyLock<Regex> = LazyLock::new(|| {
    let emoji: String = EMOJI_RANGES
        .iter()
        .map(|&(lo, hi)| format!(r"\x{{{lo:X}}}-\x{{{hi:X}}}"))
        .collect();
    Regex::new(&format!(r"[[\p{{P}}\p{{S}}\p{{Cc}}\p{{Cf}}]--[{emoji}]]")).unwrap()
});

/// True for characters that [`strip_social`] replaces with a space.
pub fn is_removed_char(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation() || c.is_ascii_control();
    }
    let mut buf = [0u8; 4];
    REMOVED.is_match(c.encode_utf8(&mut buf))
}

/// Word delimiter shared by the stages that match whole words before
/// stripping: whitespace, anything stripping removes, and emoji.
pub fn is_boundary(c: char) -> bool {
    c.is_whitespace() || is_removed_char(c) || is_emoji_char(c)
}

/// Removes URLs, @-mentions, #-hashtags and punctuation, then collapses
/// whitespace. Emoji are kept.
pub fn strip_social(text: &str) -> String {
    let text = URL.replace_all(text, " ");
    let text = MENTION.replace_all(&text, " ");
    let text = HASHTAG.replace_all(&text, " ");
    let text = REMOVED.replace_all(&text, " ");
    collapse_whitespace(&text)
}

pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
