use std::collections::HashSet;
use std::io::Write;

use hatespeech::tokenizer::{detokenize, encode, load_vocab, wordpiece_tokenize, Vocabulary};
use proptest::prelude::*;

const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];
const TOY: &[&str] = &[
    "a", "b", "ab", "abc", "ba", "c", "##a", "##b", "##c", "##bc", "##ca", "cab", "##abc", "d", "##d",
];

fn toy_vocab() -> Vocabulary {
    Vocabulary::from_tokens(SPECIALS.iter().chain(TOY).copied()).unwrap()
}

/// Straightforward reference segmentation: from each position, try every
/// end point from the longest down and take the first one in the set.
fn brute_force(word: &str, set: &HashSet<String>) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut matched = false;
        for j in (i + 1..=chars.len()).rev() {
            let body: String = chars[i..j].iter().collect();
            let piece = if i == 0 { body } else { format!("##{body}") };
            if set.contains(&piece) {
                out.push(piece);
                i = j;
                matched = true;
                break;
            }
        }
        if !matched {
            return vec!["[UNK]".to_string()];
        }
    }
    out
}

#[test]
fn monolingual_sized_vocab_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vocab.txt");
    let mut f = std::fs::File::create(&path).unwrap();
    for s in SPECIALS {
        writeln!(f, "{s}").unwrap();
    }
    for i in 0..30523 - SPECIALS.len() {
        writeln!(f, "tok{i}").unwrap();
    }
    drop(f);
    let v = load_vocab(&path).unwrap();
    assert_eq!(v.len(), 30523);
    assert_eq!(v.token(30522), Some("tok30518"));
}

#[test]
fn duplicate_in_file_cites_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vocab.txt");
    std::fs::write(&path, "[PAD]\n[UNK]\n[CLS]\n[SEP]\nfoo\nx\ny\nz\nfoo\n").unwrap();
    let msg = load_vocab(&path).unwrap_err().to_string();
    assert!(msg.contains("foo") && msg.contains('5') && msg.contains('9'), "{msg}");
}

#[test]
fn kaam_with_both_vocabularies() {
    let multi = Vocabulary::from_tokens(SPECIALS.iter().chain(&["kaam", "karna", "he"]).copied()).unwrap();
    let mono = Vocabulary::from_tokens(SPECIALS.iter().chain(&["ka", "##am", "##rna", "he"]).copied()).unwrap();
    assert_eq!(encode("kaam karna he", &multi, 75).tokens, ["[CLS]", "kaam", "karna", "he", "[SEP]"]);
    assert_eq!(
        encode("kaam karna he", &mono, 75).tokens,
        ["[CLS]", "ka", "##am", "ka", "##rna", "he", "[SEP]"]
    );
}

#[test]
fn two_hundred_pieces_truncate_to_100() {
    let v = toy_vocab();
    // "abcd" -> abc ##d: two pieces per word
    let text = vec!["abcd"; 100].join(" ");
    assert_eq!(text.split(' ').flat_map(|w| wordpiece_tokenize(w, &v)).count(), 200);
    let seq = encode(&text, &v, 100);
    assert_eq!(seq.ids.len(), 100);
    assert_eq!(seq.mask.len(), 100);
    let last = seq.mask.iter().rposition(|&m| m == 1).unwrap();
    assert_eq!(seq.ids[last], v.sep_id());
    assert_eq!(last, 99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn greedy_matches_brute_force(word in "[a-e]{1,12}") {
        let v = toy_vocab();
        let set: HashSet<String> = v.tokens().iter().cloned().collect();
        prop_assert_eq!(wordpiece_tokenize(&word, &v), brute_force(&word, &set));
    }

    #[test]
    fn length_law(text in "[a-e ]{0,300}", max_len in 3usize..120) {
        let v = toy_vocab();
        let seq = encode(&text, &v, max_len);
        prop_assert_eq!(seq.ids.len(), max_len);
        prop_assert_eq!(seq.mask.len(), max_len);
        prop_assert_eq!(seq.ids[0], v.cls_id());
        let n = seq.tokens.len();
        prop_assert!(n <= max_len);
        prop_assert_eq!(seq.ids[n - 1], v.sep_id());
        for i in 0..max_len {
            prop_assert!((seq.ids[i] as usize) < v.len());
            prop_assert_eq!(seq.mask[i] == 1, i < n);
            prop_assert_eq!(seq.ids[i] == v.pad_id(), i >= n);
        }
    }

    #[test]
    fn vocabulary_closure(idx in 0usize..TOY.len()) {
        let v = toy_vocab();
        let tok = TOY[idx];
        prop_assume!(!tok.starts_with("##"));
        prop_assert_eq!(wordpiece_tokenize(tok, &v), vec![tok.to_string()]);
    }

    #[test]
    fn detokenize_roundtrip(words in prop::collection::vec("[a-d]{1,6}", 0..20)) {
        let v = toy_vocab();
        let set: HashSet<String> = v.tokens().iter().cloned().collect();
        // only in-vocabulary text round-trips
        prop_assume!(words.iter().all(|w| brute_force(w, &set) != ["[UNK]"]));
        let text = words.join(" ");
        let seq = encode(&text, &v, 200);
        prop_assert_eq!(detokenize(&seq.ids, &v), words);
    }
}
