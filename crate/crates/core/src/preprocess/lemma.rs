use std::borrow::Cow;
use std::collections::{HashMap, HashSet};

use super::tables::tsv_pairs;
use crate::error::Result;

/// Maps a single lowercase token to its root form.
pub trait Lemmatizer: Send + Sync {
    fn lemma<'a>(&self, token: &'a str) -> Cow<'a, str>;

    fn lemmatize(&self, text: &str) -> String {
        let lemmas: Vec<Cow<'_, str>> = text.split_whitespace().map(|t| self.lemma(t)).collect();
        lemmas.join(" ")
    }
}

/// Noun-oriented lemmatizer: an irregular-form dictionary followed by
/// plural suffix rules.
///
/// Rules apply only to `[a-z]+` tokens of at least four letters and never
/// produce a word ending in `s` other than `-ss`, so every lemma is its own
/// lemma. A rule result found in `protected` is discarded and the token is
/// returned unchanged.
#[derive(Debug, Clone, Default)]
pub struct RuleLemmatizer {
    irregular: HashMap<String, String>,
    protected: HashSet<String>,
}

impl RuleLemmatizer {
    pub fn parse(src: &str) -> Result<RuleLemmatizer> {
        let mut irregular = HashMap::new();
        for pair in tsv_pairs(src, "lemma table") {
            let (form, lemma) = pair?;
            irregular.insert(form.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        Ok(RuleLemmatizer {
            irregular,
            protected: HashSet::new(),
        })
    }

    pub fn with_protected<I: IntoIterator<Item = String>>(mut self, words: I) -> Self {
        self.protected.extend(words);
        self
    }

    pub fn irregular(&self) -> impl Iterator<Item = (&str, &str)> {
        self.irregular.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn rule(token: &str) -> Option<String> {
        let n = token.len();
        if n < 4 || !token.bytes().all(|b| b.is_ascii_lowercase()) {
            return None;
        }
        if n >= 5 && token.ends_with("ies") {
            return Some(format!("{}y", &token[..n - 3]));
        }
        if token.ends_with("sses") || token.ends_with("xes") || token.ends_with("ches") || token.ends_with("shes") {
            return Some(token[..n - 2].to_owned());
        }
        if token.ends_with('s') && !["ss", "us", "is"].iter().any(|s| token.ends_with(s)) {
            return Some(token[..n - 1].to_owned());
        }
        None
    }
}

impl Lemmatizer for RuleLemmatizer {
    fn lemma<'a>(&self, token: &'a str) -> Cow<'a, str> {
        if let Some(l) = self.irregular.get(token) {
            return Cow::Owned(l.clone());
        }
        // a rule result may itself be an irregular form ("mens" -> "men")
        let lemma = Self::rule(token).map(|l| self.irregular.get(&l).cloned().unwrap_or(l));
        match lemma {
            Some(l) if !self.protected.contains(&l) => Cow::Owned(l),
            _ => Cow::Borrowed(token),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::tables::LEMMAS;

    fn lem() -> RuleLemmatizer {
        RuleLemmatizer::parse(LEMMAS).unwrap()
    }

    #[test]
    fn plural_nouns() {
        let l = lem();
        assert_eq!(l.lemmatize("logics"), "logic");
        assert_eq!(l.lemmatize("minds"), "mind");
        assert_eq!(l.lemmatize("run"), "run");
        assert_eq!(l.lemmatize("ladies boxes glasses churches"), "lady box glass church");
        assert_eq!(l.lemmatize("women people"), "woman people");
    }

    #[test]
    fn non_plurals_untouched() {
        let l = lem();
        assert_eq!(l.lemmatize("minded stuck past this bus status basis"), "minded stuck past this bus status basis");
        assert_eq!(l.lemmatize("politics news 2020s"), "politics news 2020s");
    }

    #[test]
    fn protected_results_are_rejected() {
        let l = lem().with_protected(["ppl".to_owned()]);
        assert_eq!(l.lemma("ppls"), "ppls");
    }

    #[test]
    fn lemma_is_a_fixed_point() {
        let l = lem();
        for w in ["mens", "logics", "ladies", "boxes", "glasses", "wives", "cats", "series", "abcs", "xss"] {
            let once = l.lemma(w).into_owned();
            assert_eq!(l.lemma(&once), once, "{w}");
        }
        for (_, lemma) in l.irregular() {
            assert_eq!(l.lemma(lemma), lemma);
        }
    }
}
