//! Comment datasets: CSV ingestion, seeded train/dev/test splitting and
//! export to the `__label__<class> <text>` line format.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Binary annotation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Hate,
    NotHate,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Hate, Label::NotHate];

    /// Row/column index used by confusion matrices and classifier outputs.
    pub fn index(self) -> usize {
        match self {
            Label::Hate => 0,
            Label::NotHate => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Hate => "hate",
            Label::NotHate => "not_hate",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    /// Case-insensitive; accepts `hate`, `not_hate`, `not-hate`, `not hate`
    /// and `nothate` in any casing.
    fn from_str(s: &str) -> Result<Self> {
        let folded: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        match folded.as_str() {
            "hate" => Ok(Label::Hate),
            "nothate" => Ok(Label::NotHate),
            _ => Err(Error::Validation {
                field: "label".into(),
                message: format!("`{s}` is neither hate nor not_hate"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Youtube,
    Instagram,
    Twitter,
    #[default]
    Other,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Youtube => "youtube",
            Platform::Instagram => "instagram",
            Platform::Twitter => "twitter",
            Platform::Other => "other",
        }
    }

    /// Unrecognized names map to `Other`.
    pub fn parse_lenient(s: &str) -> Platform {
        match s.trim().to_lowercase().as_str() {
            "youtube" | "yt" => Platform::Youtube,
            "instagram" | "ig" => Platform::Instagram,
            "twitter" | "x" => Platform::Twitter,
            _ => Platform::Other,
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    English,
    Hindi,
    Hinglish,
    #[default]
    Unknown,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::English => "english",
            Language::Hindi => "hindi",
            Language::Hinglish => "hinglish",
            Language::Unknown => "unknown",
        }
    }

    /// Unrecognized names map to `Unknown`.
    pub fn parse_lenient(s: &str) -> Language {
        match s.trim().to_lowercase().as_str() {
            "english" | "en" | "eng" => Language::English,
            "hindi" | "hi" => Language::Hindi,
            "hinglish" | "hi-en" | "code-mixed" => Language::Hinglish,
            _ => Language::Unknown,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub platform: Platform,
    pub raw_text: String,
    pub language: Language,
    pub gold_label: Option<Label>,
    #[serde(default)]
    pub annotator_labels: BTreeMap<String, Label>,
    /// Output of a preprocessing pipeline, when one has been applied.
    #[serde(default)]
    pub processed_text: Option<String>,
}

impl Comment {
    /// NFC-normalizes `raw_text`; fails if nothing but whitespace remains.
    pub fn new(id: impl Into<String>, raw_text: &str) -> Result<Comment> {
        let text = normalize_text(raw_text);
        if text.trim().is_empty() {
            return Err(Error::EmptyInput("comment text".into()));
        }
        Ok(Comment {
            id: id.into(),
            platform: Platform::Other,
            raw_text: text,
            language: Language::Unknown,
            gold_label: None,
            annotator_labels: BTreeMap::new(),
            processed_text: None,
        })
    }

    pub fn with_label(mut self, label: Label) -> Comment {
        self.gold_label = Some(label);
        self
    }

    pub fn with_language(mut self, language: Language) -> Comment {
        self.language = language;
        self
    }

    pub fn with_platform(mut self, platform: Platform) -> Comment {
        self.platform = platform;
        self
    }

    /// Preprocessed text if available, raw text otherwise.
    pub fn text(&self) -> &str {
        self.processed_text.as_deref().unwrap_or(&self.raw_text)
    }
}

fn normalize_text(s: &str) -> String {
    s.nfc().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    comments: Vec<Comment>,
}

impl Dataset {
    pub fn new(name: impl Into<String>) -> Dataset {
        Dataset {
            name: name.into(),
            comments: Vec::new(),
        }
    }

    /// Fails on the first duplicate id.
    pub fn from_comments(name: impl Into<String>, comments: Vec<Comment>) -> Result<Dataset> {
        let mut seen = HashSet::with_capacity(comments.len());
        for c in &comments {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Validation {
                    field: "id".into(),
                    message: format!("duplicate comment id `{}`", c.id),
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            comments,
        })
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Comment> {
        self.comments.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.comments.iter().map(|c| c.id.as_str()).collect()
    }

    /// Applies `f` to every comment's raw text and stores the result as its
    /// processed text.
    pub fn map_processed(&self, mut f: impl FnMut(&str) -> String) -> Dataset {
        let comments = self
            .comments
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.processed_text = Some(f(&c.raw_text));
                c
            })
            .collect();
        Dataset {
            name: self.name.clone(),
            comments,
        }
    }

    /// Drops comments whose text exactly repeats an earlier one. Returns the
    /// number removed.
    pub fn dedup_exact(&mut self) -> usize {
        let mut seen = HashSet::new();
        let before = self.comments.len();
        self.comments.retain(|c| seen.insert(c.text().to_owned()));
        before - self.comments.len()
    }

    fn subset(&self, name: &str, order: &[usize]) -> Dataset {
        Dataset {
            name: format!("{}/{}", self.name, name),
            comments: order.iter().map(|&i| self.comments[i].clone()).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Comment;
    type IntoIter = std::slice::Iter<'a, Comment>;

    fn into_iter(self) -> Self::IntoIter {
        self.comments.iter()
    }
}

/// Maps logical comment fields to CSV header names. Only `text` is required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub id: Option<String>,
    pub platform: Option<String>,
    pub text: String,
    pub language: Option<String>,
    pub label: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: Some("id".into()),
            platform: Some("platform".into()),
            text: "text".into(),
            language: Some("language".into()),
            label: Some("label".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the file (the header is line 1).
    pub row: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub skipped_empty: usize,
    pub row_errors: Vec<RowError>,
}

/// Reads a UTF-8 CSV with a header row.
///
/// The `id` column is required only when it is mapped *and* present in the
/// header; otherwise ids are the 1-based data-row numbers. Optional columns
/// missing from the header leave the corresponding field unknown or absent.
pub fn load_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, columns, name)
}

pub fn read_csv(reader: impl std::io::Read, columns: &ColumnMap, name: String) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = match rdr.headers() {
        Ok(h) => h.clone(),
        // An empty file has no header and no rows.
        Err(e) if is_empty_input(&e) => csv::StringRecord::new(),
        Err(e) => return Err(e.into()),
    };
    if header.is_empty() {
        return Ok(LoadReport {
            dataset: Dataset::new(name),
            skipped_empty: 0,
            row_errors: Vec::new(),
        });
    }
    let find = |col: &str| header.iter().position(|h| h.trim() == col);
    let text_idx = find(&columns.text).ok_or_else(|| Error::MissingColumn(columns.text.clone()))?;
    let optional = |col: &Option<String>| col.as_deref().and_then(find);
    let id_idx = optional(&columns.id);
    let platform_idx = optional(&columns.platform);
    let language_idx = optional(&columns.language);
    let label_idx = optional(&columns.label);

    let mut comments = Vec::new();
    let mut seen = HashSet::new();
    let mut skipped_empty = 0;
    let mut row_errors = Vec::new();

    for (n, record) in rdr.records().enumerate() {
        let row = (n + 2) as u64;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map(|p| p.line()).unwrap_or(row);
                row_errors.push(RowError {
                    row,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let field = |idx: Option<usize>| idx.and_then(|i| record.get(i)).map(str::trim);
        let text = record.get(text_idx).unwrap_or_default();
        let id = match field(id_idx) {
            Some(id) if !id.is_empty() => id.to_owned(),
            Some(_) => {
                row_errors.push(RowError {
                    row,
                    message: "empty id".into(),
                });
                continue;
            }
            None => (n + 1).to_string(),
        };
        let mut comment = match Comment::new(id, text) {
            Ok(c) => c,
            Err(_) => {
                skipped_empty += 1;
                continue;
            }
        };
        if let Some(p) = field(platform_idx) {
            comment.platform = Platform::parse_lenient(p);
        }
        if let Some(l) = field(language_idx) {
            comment.language = Language::parse_lenient(l);
        }
        if let Some(label) = field(label_idx).filter(|s| !s.is_empty()) {
            match label.parse::<Label>() {
                Ok(l) => comment.gold_label = Some(l),
                Err(e) => {
                    row_errors.push(RowError {
                        row,
                        message: e.to_string(),
                    });
                    continue;
                }
            }
        }
        if !seen.insert(comment.id.clone()) {
            row_errors.push(RowError {
                row,
                message: format!("duplicate id `{}`", comment.id),
            });
            continue;
        }
        comments.push(comment);
    }

    Ok(LoadReport {
        dataset: Dataset { name, comments },
        skipped_empty,
        row_errors,
    })
}

fn is_empty_input(e: &csv::Error) -> bool {
    matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof)
}

/// Writes the corpus schema `id,platform,text,language,label[,processed_text]`.
pub fn write_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let with_processed = dataset.iter().any(|c| c.processed_text.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id", "platform", "text", "language", "label"];
    if with_processed {
        header.push("processed_text");
    }
    w.write_record(&header)?;
    for c in dataset {
        let label = c.gold_label.map(Label::as_str).unwrap_or("");
        let mut row = vec![
            c.id.as_str(),
            c.platform.as_str(),
            c.raw_text.as_str(),
            c.language.as_str(),
            label,
        ];
        if with_processed {
            row.push(c.processed_text.as_deref().unwrap_or(""));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub dev_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// 80% train, 10% dev, 10% test.
    pub fn standard(seed: u64) -> SplitSpec {
        SplitSpec {
            train_frac: 0.8,
            dev_frac: 0.1,
            test_frac: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.dev_frac, self.test_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidSplit(format!("fractions {fracs:?} must lie in [0, 1]")));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Floor allocation for train and dev; the remainder goes to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon absorbs products such as 0.29 * 100 = 28.999999999999996.
        let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let train = floor(self.train_frac).min(n);
        let dev = floor(self.dev_frac).min(n - train);
        (train, dev, n - train - dev)
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

/// Seeded shuffle followed by floor-then-remainder allocation: the first
/// `floor(n * train_frac)` shuffled comments form train, the next
/// `floor(n * dev_frac)` form dev and all remaining ones go to test.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if dataset.len() < 3 {
        return Err(Error::DatasetTooSmall(dataset.len()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let (n_train, n_dev, _) = spec.sizes(dataset.len());
    let (train, rest) = order.split_at(n_train);
    let (dev, test) = rest.split_at(n_dev);
    Ok(Splits {
        train: dataset.subset("train", train),
        dev: dataset.subset("dev", dev),
        test: dataset.subset("test", test),
    })
}

pub const FLAIR_LABEL_PREFIX: &str = "__label__";

/// One `__label__<class> <text>` line, without the trailing newline.
pub fn flair_line(label: Label, text: &str) -> String {
    let mut line = String::with_capacity(FLAIR_LABEL_PREFIX.len() + 9 + text.len());
    line.push_str(FLAIR_LABEL_PREFIX);
    line.push_str(label.as_str());
    line.push(' ');
    line.push_str(&text.replace("\r\n", " ").replace(['\n', '\r'], " "));
    line
}

/// Splits at the first space after the label prefix.
pub fn parse_flair_line(line: &str) -> Result<(Label, String)> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let rest = line.strip_prefix(FLAIR_LABEL_PREFIX).ok_or_else(|| Error::Validation {
        field: "line".into(),
        message: format!("missing `{FLAIR_LABEL_PREFIX}` prefix"),
    })?;
    let (class, text) = rest.split_once(' ').unwrap_or((rest, ""));
    let label = match class {
        "hate" => Label::Hate,
        "not_hate" => Label::NotHate,
        other => {
            return Err(Error::Validation {
                field: "label".into(),
                message: format!("unknown class `{other}`"),
            })
        }
    };
    Ok((label, text.to_owned()))
}

/// Writes every comment's [`Comment::text`] as a label line. Nothing is
/// written when any comment lacks a gold label.
pub fn export_flair(dataset: &Dataset, path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let unlabeled: Vec<String> = dataset
        .iter()
        .filter(|c| c.gold_label.is_none())
        .map(|c| c.id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::MissingLabels(unlabeled));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for c in dataset {
        let label = c.gold_label.expect("checked above");
        writeln!(w, "{}", flair_line(label, c.text())).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(dataset.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let comments = (0..n)
            .map(|i| Comment::new(format!("c{i}"), &format!("text {i}")).unwrap())
            .collect();
        Dataset::from_comments("toy", comments).unwrap()
    }

    fn load(s: &str) -> LoadReport {
        read_csv(s.as_bytes(), &ColumnMap::default(), "t".into()).unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let r = load("id,platform,text,language,label\n1,youtube,a,english,Hate\n2,twitter,b,hinglish,Not-Hate\n3,x,c,,\n");
        assert_eq!(r.dataset.len(), 3);
        let c = &r.dataset.comments()[1];
        assert_eq!(c.platform, Platform::Twitter);
        assert_eq!(c.language, Language::Hinglish);
        assert_eq!(c.gold_label, Some(Label::NotHate));
        assert_eq!(r.dataset.comments()[2].gold_label, None);
        assert_eq!(r.dataset.comments()[2].language, Language::Unknown);
    }

    #[test]
    fn empty_text_is_skipped_and_counted() {
        let r = load("id,platform,text,language,label\n1,youtube,a,english,hate\n2,youtube,   ,english,hate\n");
        assert_eq!(r.dataset.len(), 1);
        assert_eq!(r.skipped_empty, 1);
    }

    #[test]
    fn every_label_casing_maps() {
        // enumerate each letter's case for both label spellings
        for base in ["hate", "not-hate", "not_hate"] {
            let letters: Vec<usize> = base
                .char_indices()
                .filter(|(_, c)| c.is_ascii_alphabetic())
                .map(|(i, _)| i)
                .collect();
            for mask in 0u32..(1 << letters.len()) {
                let mut s: Vec<char> = base.chars().collect();
                for (bit, &pos) in letters.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        s[pos] = s[pos].to_ascii_uppercase();
                    }
                }
                let s: String = s.into_iter().collect();
                let expected = if base == "hate" { Label::Hate } else { Label::NotHate };
                assert_eq!(s.parse::<Label>().unwrap(), expected, "{s}");
            }
        }
        assert!("hateful".parse::<Label>().is_err());
    }

    #[test]
    fn missing_text_column_names_it() {
        let err = read_csv("id,body\n1,a\n".as_bytes(), &ColumnMap::default(), "t".into()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "text"), "{err}");
    }

    #[test]
    fn malformed_row_is_reported_and_load_continues() {
        let r = load("id,platform,text,language,label\n1,youtube,a,english,hate\n2,youtube\n3,youtube,c,english,hate\n");
        assert_eq!(r.dataset.len(), 2);
        assert_eq!(r.row_errors.len(), 1);
        assert_eq!(r.row_errors[0].row, 3);
    }

    #[test]
    fn unknown_label_and_duplicate_id_are_row_errors() {
        let r = load("id,text,label\n1,a,spam\n2,b,hate\n2,c,hate\n");
        assert_eq!(r.dataset.len(), 1);
        assert_eq!(r.row_errors.iter().map(|e| e.row).collect::<Vec<_>>(), vec![2, 4]);
    }

    #[test]
    fn ids_default_to_row_numbers() {
        let r = read_csv(
            "text\nfoo\nbar\n".as_bytes(),
            &ColumnMap {
                id: None,
                ..ColumnMap::default()
            },
            "t".into(),
        )
        .unwrap();
        assert_eq!(r.dataset.ids(), vec!["1", "2"]);
    }

    #[test]
    fn empty_file_loads_nothing() {
        let r = load("");
        assert!(r.dataset.is_empty());
    }

    #[test]
    fn split_allocation() {
        assert_eq!(split_sizes(100, 7), (80, 10, 10));
        assert_eq!(split_sizes(10, 0), (8, 1, 1));
        // 101 * 0.8 = 80.8 -> 80; 101 * 0.1 = 10.1 -> 10; remainder 11
        assert_eq!(split_sizes(101, 3), (80, 10, 11));
    }

    fn split_sizes(n: usize, seed: u64) -> (usize, usize, usize) {
        let s = split(&toy(n), &SplitSpec::standard(seed)).unwrap();
        (s.train.len(), s.dev.len(), s.test.len())
    }

    #[test]
    fn split_rejects_tiny_and_invalid() {
        assert!(matches!(
            split(&toy(2), &SplitSpec::standard(0)),
            Err(Error::DatasetTooSmall(2))
        ));
        let bad = SplitSpec {
            train_frac: 0.8,
            dev_frac: 0.3,
            test_frac: 0.1,
            seed: 0,
        };
        assert!(matches!(split(&toy(10), &bad), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn flair_line_format() {
        assert_eq!(
            flair_line(Label::NotHate, "meraa desh hate ni pyar"),
            "__label__not_hate meraa desh hate ni pyar"
        );
        assert_eq!(flair_line(Label::Hate, "a\nb\r\nc"), "__label__hate a b c");
        assert_eq!(
            parse_flair_line("__label__hate a b c\n").unwrap(),
            (Label::Hate, "a b c".to_owned())
        );
    }

    #[test]
    fn export_requires_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        let ds = toy(3);
        match export_flair(&ds, &path) {
            Err(Error::MissingLabels(ids)) => assert_eq!(ids, vec!["c0", "c1", "c2"]),
            other => panic!("{other:?}"),
        }
        assert!(!path.exists());
    }

    #[test]
    fn export_empty_dataset_creates_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        assert_eq!(export_flair(&Dataset::new("e"), &path).unwrap(), 0);
        assert_eq!(std::fs::read(&path).unwrap(), b"");
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::from_comments(
            "x",
            vec![Comment::new("a", "hello, \"world\"").unwrap().with_label(Label::Hate)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(&buf[..], &ColumnMap::default(), "x".into()).unwrap();
        assert_eq!(back.dataset.comments(), ds.comments());
    }
}
