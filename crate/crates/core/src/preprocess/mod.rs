//! Text normalization pipelines for English and Hinglish comments.
//!
//! Each pipeline is an ordered list of named, deterministic stages:
//!
//! | English               | Hinglish                   |
//! |-----------------------|----------------------------|
//! | lowercase             | lowercase                  |
//! | expand_contractions   | transliterate_devanagari   |
//! | strip_social          | strip_social               |
//! | demojize (name)       | demojize (remove)          |
//! | remove_stopwords (en) | remove_stopwords (hi ∪ en) |
//! | lemmatize             |                            |
//!
//! Every table a stage consults lives in `data/` and can be overridden by
//! pointing [`Resources::load_dir`] at a directory holding files with the
//! same names. Both pipelines are idempotent.

mod contractions;
mod emoji;
mod lemma;
mod social;
mod stopwords;
mod tables;
mod translit;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

pub use contractions::ContractionTable;
pub use emoji::{is_emoji_char, DemojizeMode, EmojiTable, EMOJI_RANGES};
pub use lemma::{Lemmatizer, RuleLemmatizer};
pub use social::{collapse_whitespace, is_boundary, is_removed_char, strip_social};
pub use stopwords::StopwordList;
pub use translit::{is_devanagari, TranslitTable, DEVANAGARI_BLOCK};

use crate::corpus::Language;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineLanguage {
    English,
    Hinglish,
}

impl PipelineLanguage {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineLanguage::English => "english",
            PipelineLanguage::Hinglish => "hinglish",
        }
    }

    /// Hindi comments go through the Hinglish pipeline (it transliterates).
    pub fn for_comment(language: Language) -> Option<PipelineLanguage> {
        match language {
            Language::English => Some(PipelineLanguage::English),
            Language::Hindi | Language::Hinglish => Some(PipelineLanguage::Hinglish),
            Language::Unknown => None,
        }
    }
}

impl fmt::Display for PipelineLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineLanguage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "english" | "en" => Ok(PipelineLanguage::English),
            "hinglish" | "hi-en" => Ok(PipelineLanguage::Hinglish),
            other => Err(Error::Validation {
                field: "language".into(),
                message: format!("`{other}` is not one of english, hinglish"),
            }),
        }
    }
}

/// All lookup tables used by the stages.
#[derive(Debug, Clone)]
pub struct Resources {
    pub contractions: ContractionTable,
    pub stopwords_en: StopwordList,
    pub stopwords_hinglish: StopwordList,
    pub emoji: EmojiTable,
    pub translit: TranslitTable,
    pub lemmatizer: RuleLemmatizer,
}

impl Resources {
    fn from_sources(src: [&str; 6]) -> Result<Resources> {
        let [contractions, en, hi, emoji, devanagari, lemmas] = src;
        let contractions = ContractionTable::parse(contractions)?;
        let stopwords_en = StopwordList::parse(en, PipelineLanguage::English)?;
        let stopwords_hinglish = StopwordList::parse(hi, PipelineLanguage::Hinglish)?;
        // a lemma that is a stopword or an abbreviation would be rewritten
        // by a second pass
        let protected = stopwords_en
            .iter()
            .chain(contractions.iter().map(|(k, _)| k))
            .map(str::to_owned)
            .collect::<Vec<_>>();
        Ok(Resources {
            contractions,
            stopwords_en,
            stopwords_hinglish,
            emoji: EmojiTable::parse(emoji)?,
            translit: TranslitTable::parse(devanagari)?,
            lemmatizer: RuleLemmatizer::parse(lemmas)?.with_protected(protected),
        })
    }

    /// The tables compiled into the binary.
    pub fn bundled() -> Arc<Resources> {
        static BUNDLED: OnceLock<Arc<Resources>> = OnceLock::new();
        BUNDLED
            .get_or_init(|| {
                Arc::new(
                    Resources::from_sources([
                        tables::CONTRACTIONS,
                        tables::STOPWORDS_EN,
                        tables::STOPWORDS_HINGLISH,
                        tables::EMOJI,
                        tables::DEVANAGARI,
                        tables::LEMMAS,
                    ])
                    .expect("bundled preprocessing tables are valid"),
                )
            })
            .clone()
    }

    /// Reads `contractions.tsv`, `stopwords_en.txt`, `stopwords_hinglish.txt`,
    /// `emoji.tsv`, `devanagari.tsv` and `lemmas.tsv` from `dir`, falling
    /// back to the bundled copy for any file that is absent.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Resources> {
        let dir = dir.as_ref();
        let bundled = [
            ("contractions.tsv", tables::CONTRACTIONS),
            ("stopwords_en.txt", tables::STOPWORDS_EN),
            ("stopwords_hinglish.txt", tables::STOPWORDS_HINGLISH),
            ("emoji.tsv", tables::EMOJI),
            ("devanagari.tsv", tables::DEVANAGARI),
            ("lemmas.tsv", tables::LEMMAS),
        ];
        let mut loaded = Vec::with_capacity(bundled.len());
        for (file, fallback) in bundled {
            let path = dir.join(file);
            loaded.push(if path.exists() {
                tables::read_to_string(&path)?
            } else {
                fallback.to_owned()
            });
        }
        let src: [&str; 6] = std::array::from_fn(|i| loaded[i].as_str());
        Resources::from_sources(src)
    }
}

type StageFn = dyn Fn(&str) -> (String, usize) + Send + Sync;

/// A named text transform. The second value of the transform counts
/// warnings (unknown emoji, unmapped codepoints).
pub struct PipelineStage {
    name: &'static str,
    transform: Box<StageFn>,
}

impl PipelineStage {
    pub fn new(name: &'static str, f: impl Fn(&str) -> (String, usize) + Send + Sync + 'static) -> Self {
        PipelineStage {
            name,
            transform: Box::new(f),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn apply(&self, text: &str) -> (String, usize) {
        (self.transform)(text)
    }
}

impl fmt::Debug for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PipelineStage").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineRun {
    pub text: String,
    pub warnings: usize,
    /// Output after each stage, in execution order.
    pub trace: Vec<(&'static str, String)>,
}

#[derive(Debug)]
pub struct Pipeline {
    language: PipelineLanguage,
    stages: Vec<PipelineStage>,
}

impl Pipeline {
    pub fn new(language: PipelineLanguage, resources: Arc<Resources>) -> Pipeline {
        match language {
            PipelineLanguage::English => Pipeline::english(resources),
            PipelineLanguage::Hinglish => Pipeline::hinglish(resources),
        }
    }

    pub fn english(res: Arc<Resources>) -> Pipeline {
        let (r1, r2, r3, r4) = (res.clone(), res.clone(), res.clone(), res);
        Pipeline {
            language: PipelineLanguage::English,
            stages: vec![
                PipelineStage::new("lowercase", |t| (t.to_lowercase(), 0)),
                PipelineStage::new("expand_contractions", move |t| (r1.contractions.expand(t), 0)),
                PipelineStage::new("strip_social", |t| (strip_social(t), 0)),
                PipelineStage::new("demojize", move |t| r2.emoji.demojize(t, DemojizeMode::ReplaceWithName)),
                PipelineStage::new("remove_stopwords", move |t| (r3.stopwords_en.remove_from(t), 0)),
                PipelineStage::new("lemmatize", move |t| (r4.lemmatizer.lemmatize(t), 0)),
            ],
        }
    }

    pub fn hinglish(res: Arc<Resources>) -> Pipeline {
        let stopwords = res.stopwords_hinglish.union(&res.stopwords_en);
        let (r1, r2) = (res.clone(), res);
        Pipeline {
            language: PipelineLanguage::Hinglish,
            stages: vec![
                PipelineStage::new("lowercase", |t| (t.to_lowercase(), 0)),
                PipelineStage::new("transliterate_devanagari", move |t| r1.translit.transliterate(t)),
                PipelineStage::new("strip_social", |t| (strip_social(t), 0)),
                PipelineStage::new("demojize", move |t| r2.emoji.demojize(t, DemojizeMode::Remove)),
                PipelineStage::new("remove_stopwords", move |t| (stopwords.remove_from(t), 0)),
            ],
        }
    }

    pub fn language(&self) -> PipelineLanguage {
        self.language
    }

    pub fn stage_names(&self) -> Vec<&'static str> {
        self.stages.iter().map(PipelineStage::name).collect()
    }

    pub fn run(&self, text: &str) -> String {
        self.stages
            .iter()
            .fold(text.to_owned(), |acc, stage| stage.apply(&acc).0)
    }

    pub fn run_traced(&self, text: &str) -> PipelineRun {
        let mut current = text.to_owned();
        let mut warnings = 0;
        let mut trace = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let (out, w) = stage.apply(&current);
            warnings += w;
            trace.push((stage.name, out.clone()));
            current = out;
        }
        PipelineRun {
            text: current,
            warnings,
            trace,
        }
    }
}

fn bundled_pipeline(language: PipelineLanguage) -> &'static Pipeline {
    static EN: OnceLock<Pipeline> = OnceLock::new();
    static HI: OnceLock<Pipeline> = OnceLock::new();
    let cell = match language {
        PipelineLanguage::English => &EN,
        PipelineLanguage::Hinglish => &HI,
    };
    cell.get_or_init(|| Pipeline::new(language, Resources::bundled()))
}

pub fn run_pipeline_english(text: &str) -> String {
    bundled_pipeline(PipelineLanguage::English).run(text)
}

pub fn run_pipeline_hinglish(text: &str) -> String {
    bundled_pipeline(PipelineLanguage::Hinglish).run(text)
}

pub fn run_pipeline(language: PipelineLanguage, text: &str) -> String {
    bundled_pipeline(language).run(text)
}

pub fn expand_contractions(text: &str) -> String {
    Resources::bundled().contractions.expand(text)
}

pub fn demojize(text: &str, mode: DemojizeMode) -> String {
    Resources::bundled().emoji.demojize(text, mode).0
}

pub fn remove_stopwords(text: &str, list: &StopwordList) -> String {
    list.remove_from(text)
}

pub fn lemmatize(text: &str) -> String {
    Resources::bundled().lemmatizer.lemmatize(text)
}

pub fn transliterate_devanagari(text: &str) -> String {
    Resources::bundled().translit.transliterate(text).0
}

pub fn english_stopwords() -> StopwordList {
    Resources::bundled().stopwords_en.clone()
}

pub fn hinglish_stopwords() -> StopwordList {
    Resources::bundled().stopwords_hinglish.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const GOLDEN_EN_IN: &str = "@amitshah You can't change the minds of such small minded people who are stuck in the past, they just don't understand logics.#IndiaAgainstCAA 🤬";
    pub(crate) const GOLDEN_EN_OUT: &str =
        "you cannot change mind small minded people stuck past understand logic facewithsymbolsonmouth";
    pub(crate) const GOLDEN_HI_IN: &str = "@narendramodi मेरा देश BHAI hate ni pyar phailata ha or jo pyar se nhi manta wo use ache se samjhate hain!! 🤔 https://twitter.com/4948747235330";
    pub(crate) const GOLDEN_HI_OUT: &str = "meraa desh hate ni pyar phailata pyar nhi manta ache samjhate hain";

    #[test]
    fn english_golden() {
        assert_eq!(run_pipeline_english(GOLDEN_EN_IN), GOLDEN_EN_OUT);
        assert_eq!(run_pipeline_english(""), "");
    }

    #[test]
    fn hinglish_golden() {
        assert_eq!(run_pipeline_hinglish(GOLDEN_HI_IN), GOLDEN_HI_OUT);
        assert_eq!(run_pipeline_hinglish("मेरा"), "meraa");
    }

    #[test]
    fn stage_order() {
        let res = Resources::bundled();
        assert_eq!(
            Pipeline::english(res.clone()).stage_names(),
            ["lowercase", "expand_contractions", "strip_social", "demojize", "remove_stopwords", "lemmatize"]
        );
        assert_eq!(
            Pipeline::hinglish(res).stage_names(),
            ["lowercase", "transliterate_devanagari", "strip_social", "demojize", "remove_stopwords"]
        );
    }

    #[test]
    fn trace_records_each_stage() {
        let run = Pipeline::english(Resources::bundled()).run_traced(GOLDEN_EN_IN);
        assert_eq!(run.trace.len(), 6);
        assert_eq!(run.text, GOLDEN_EN_OUT);
        assert!(run.trace[1].1.contains("cannot"));
        assert_eq!(run.warnings, 0);
    }

    #[test]
    fn stopword_example_with_pronoun_list() {
        // the default English list keeps "you"; a list naming it drops it
        assert_eq!(remove_stopwords("you are stuck in the past", &english_stopwords()), "you stuck past");
        let with_you = english_stopwords().union(&StopwordList::from_words(["you"], PipelineLanguage::English).unwrap());
        assert_eq!(remove_stopwords("you are stuck in the past", &with_you), "stuck past");
        assert_eq!(remove_stopwords("teko terko tujhe", &hinglish_stopwords()), "");
    }

    #[test]
    fn free_functions() {
        assert_eq!(expand_contractions("can't change"), "cannot change");
        assert_eq!(demojize("🤬", DemojizeMode::ReplaceWithName), "facewithsymbolsonmouth");
        assert_eq!(lemmatize("logics minds run"), "logic mind run");
        assert_eq!(transliterate_devanagari("मेरा देश"), "meraa desh");
    }

    #[test]
    fn tables_do_not_interfere() {
        let res = Resources::bundled();
        for name in res.emoji.names() {
            assert!(!res.contractions.contains_key(name), "emoji name {name} is an abbreviation");
        }
        for (form, lemma) in res.lemmatizer.irregular().filter(|(f, l)| f != l) {
            assert!(!res.stopwords_en.contains(lemma) && !res.contractions.contains_key(lemma), "{form} -> {lemma}");
        }
        for (_, exp) in res.contractions.iter() {
            for w in exp.split_whitespace() {
                assert!(!res.contractions.contains_key(w));
            }
        }
    }

    #[test]
    fn load_dir_overrides_one_table() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("stopwords_hinglish.txt"), "hate\n").unwrap();
        let res = Arc::new(Resources::load_dir(dir.path()).unwrap());
        let p = Pipeline::hinglish(res);
        assert_eq!(p.run("hate ni pyar"), "ni pyar");
    }

    #[test]
    fn language_parse() {
        assert_eq!("English".parse::<PipelineLanguage>().unwrap(), PipelineLanguage::English);
        assert!("french".parse::<PipelineLanguage>().is_err());
    }
}
