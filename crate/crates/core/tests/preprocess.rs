use hatespeech::preprocess::{
    is_devanagari, is_emoji_char, is_removed_char, run_pipeline, PipelineLanguage, Resources, DEVANAGARI_BLOCK,
};
use proptest::prelude::*;

/// Fragments that exercise every stage: contractions, abbreviations,
/// URLs, mentions, hashtags, emoji sequences, Devanagari, punctuation
/// glued to words, stopwords, plurals and irregular forms.
const FRAGMENTS: &[&str] = &[
    "can't", "DON'T", "won’t", "u", "ur", "pls", "ppl", "thx", "idk", "i'm", "y'all", "you", "the", "of",
    "logics", "minds", "mens", "people", "ladies", "boxes", "glasses", "news", "ppls", "urs", "thxs",
    "https://t.co/x1", "www.example.com", "@user", "#Tag", "🤬", "🤔", "🔥", "👍🏽", "👩\u{200D}💻", "\u{FE0F}",
    "\u{1FAFF}", "मेरा", "देश", "नहीं", "है", "क़", "।", "ः", ".", ",", "!!", "'", "’", "\"", "-", "_", "(",
    ")", "@", "#", ":", "/", "bhai", "hate", "pyar", "teko", "hain", "se", "jo", "BHAI", "Hate", "2020s",
    "café", "naïve", "\u{00AD}", "\u{200B}", "x", "s", "t",
];

fn fragment_text() -> impl Strategy<Value = String> {
    let sep = prop::sample::select(vec!["", " ", "  ", "\t", "\n"]);
    prop::collection::vec((prop::sample::select(FRAGMENTS.to_vec()), sep), 0..14).prop_map(|parts| {
        parts
            .into_iter()
            .map(|(f, s)| format!("{f}{s}"))
            .collect::<String>()
    })
}

fn arbitrary_text() -> impl Strategy<Value = String> {
    // printable ASCII, Devanagari, general punctuation, emoji planes
    let ch = prop_oneof![
        4 => prop::char::range(' ', '~'),
        2 => prop::char::range('\u{0900}', '\u{097F}'),
        1 => prop::char::range('\u{2000}', '\u{206F}'),
        1 => prop::char::range('\u{1F300}', '\u{1FAFF}'),
        1 => prop::char::range('\u{00A0}', '\u{024F}'),
    ];
    prop::collection::vec(ch, 0..60).prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn english_idempotent_on_fragments(x in fragment_text()) {
        let once = run_pipeline(PipelineLanguage::English, &x);
        prop_assert_eq!(run_pipeline(PipelineLanguage::English, &once), once);
    }

    #[test]
    fn hinglish_idempotent_on_fragments(x in fragment_text()) {
        let once = run_pipeline(PipelineLanguage::Hinglish, &x);
        prop_assert_eq!(run_pipeline(PipelineLanguage::Hinglish, &once), once);
    }

    #[test]
    fn english_idempotent_on_arbitrary(x in arbitrary_text()) {
        let once = run_pipeline(PipelineLanguage::English, &x);
        prop_assert_eq!(run_pipeline(PipelineLanguage::English, &once), once);
    }

    #[test]
    fn hinglish_idempotent_on_arbitrary(x in arbitrary_text()) {
        let once = run_pipeline(PipelineLanguage::Hinglish, &x);
        prop_assert_eq!(run_pipeline(PipelineLanguage::Hinglish, &once), once);
    }

    #[test]
    fn hinglish_output_is_clean(x in fragment_text()) {
        let out = run_pipeline(PipelineLanguage::Hinglish, &x);
        prop_assert!(!out.chars().any(is_devanagari), "{}", out);
        prop_assert!(!out.chars().any(is_emoji_char), "{}", out);
        prop_assert!(!out.contains("http") && !out.contains('@') && !out.contains('#'), "{}", out);
        prop_assert_eq!(out.to_lowercase(), out.clone());
    }

    #[test]
    fn english_output_is_clean(x in fragment_text()) {
        let out = run_pipeline(PipelineLanguage::English, &x);
        prop_assert!(!out.chars().any(is_emoji_char), "{}", out);
        prop_assert!(!out.starts_with(' ') && !out.ends_with(' ') && !out.contains("  "));
    }

    #[test]
    fn outputs_use_restricted_alphabet(x in arbitrary_text()) {
        // letters and marks of other scripts pass through; Devanagari only
        // survives the English pipeline, which does not transliterate
        for lang in [PipelineLanguage::English, PipelineLanguage::Hinglish] {
            let out = run_pipeline(lang, &x);
            let bad: Vec<char> = out
                .chars()
                .filter(|&c| !(c == ' ' || c.is_ascii_lowercase() || c.is_ascii_digit()))
                .filter(|&c| {
                    c.is_ascii()
                        || c.is_whitespace()
                        || is_removed_char(c)
                        || is_emoji_char(c)
                        || (lang == PipelineLanguage::Hinglish && is_devanagari(c))
                })
                .collect();
            prop_assert!(bad.is_empty(), "{:?} -> {:?} {:?}", x, out, bad);
        }
    }

    #[test]
    fn ascii_devanagari_emoji_inputs_give_plain_output(x in fragment_text()) {
        let ascii_like = x.chars().all(|c| c.is_ascii() || is_devanagari(c) || is_emoji_char(c)
            || matches!(c, '\u{2019}' | '\u{00AD}' | '\u{200B}'));
        prop_assume!(ascii_like);
        let out = run_pipeline(PipelineLanguage::Hinglish, &x);
        prop_assert!(out.chars().all(|c| c == ' ' || c.is_ascii_lowercase() || c.is_ascii_digit()), "{}", out);
    }

    #[test]
    fn stopword_removal_never_adds_tokens(x in fragment_text()) {
        let res = Resources::bundled();
        let lowered = x.to_lowercase();
        let before = lowered.split_whitespace().count();
        prop_assert!(res.stopwords_en.remove_from(&lowered).split_whitespace().count() <= before);
        prop_assert!(res.stopwords_hinglish.remove_from(&lowered).split_whitespace().count() <= before);
    }
}

#[test]
fn devanagari_block_maps_to_ascii() {
    let table = &Resources::bundled().translit;
    let mut dropped = Vec::new();
    for cp in DEVANAGARI_BLOCK {
        let c = char::from_u32(cp).unwrap();
        let (out, n) = table.transliterate(&c.to_string());
        assert!(out.is_ascii(), "U+{cp:04X} -> {out:?}");
        if n > 0 {
            dropped.push(cp);
        }
    }
    // only the glottal stop lacks a romanization
    assert_eq!(dropped, vec![0x097D]);
}

/// Codepoints the reference leaves blank, romanized by hand in the bundled
/// table, plus signs that intentionally vanish.
const LOCAL_ROMANIZATIONS: &[u32] = &[
    0x0900, 0x0904, 0x093A, 0x093B, 0x094E, 0x094F, 0x0955, 0x0956, 0x0957, 0x0972, 0x0973,
    0x0974, 0x0975, 0x0976, 0x0977, 0x0978, 0x0979, 0x097A, 0x097B, 0x097C, 0x097D, 0x097E,
    0x097F, 0x094D, 0x0971,
];

/// Diffs the bundled table against deunicode, an independent port of the
/// same romanization data.
#[test]
fn devanagari_table_matches_reference_romanization() {
    let table = &Resources::bundled().translit;
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for cp in DEVANAGARI_BLOCK {
        if LOCAL_ROMANIZATIONS.contains(&cp) {
            continue;
        }
        let c = char::from_u32(cp).unwrap();
        let Some(reference) = deunicode::deunicode_char(c) else { continue };
        let reference = reference.trim().to_lowercase();
        if reference.is_empty() || reference.contains('[') {
            continue;
        }
        compared += 1;
        let ours = table.get(c).unwrap_or("<unmapped>").trim();
        if ours != reference {
            mismatches.push(format!("U+{cp:04X} ours={ours:?} reference={reference:?}"));
        }
    }
    assert!(compared > 90, "compared only {compared}");
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn golden_rows_are_fast() {
    let start = std::time::Instant::now();
    let en = run_pipeline(PipelineLanguage::English, "@amitshah You can't change the minds of such small minded people who are stuck in the past, they just don't understand logics.#IndiaAgainstCAA 🤬");
    let hi = run_pipeline(PipelineLanguage::Hinglish, "@narendramodi मेरा देश BHAI hate ni pyar phailata ha or jo pyar se nhi manta wo use ache se samjhate hain!! 🤔 https://twitter.com/4948747235330");
    assert_eq!(en, "you cannot change mind small minded people stuck past understand logic facewithsymbolsonmouth");
    assert_eq!(hi, "meraa desh hate ni pyar phailata pyar nhi manta ache samjhate hain");
    assert!(start.elapsed().as_secs_f64() < 1.0);
}
