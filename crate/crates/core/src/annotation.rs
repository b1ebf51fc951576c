//! Multi-annotator labeling state backed by an append-only project file.
//!
//! The project file holds one JSON entry per line: comments, annotator
//! registrations and label records. State is rebuilt by replaying it, and a
//! label is only acknowledged after its line has been synced to disk, so a
//! crash can at worst leave one torn, unacknowledged line at the end. That
//! line is dropped on the next open.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, Dataset, Label, Language, Platform};
use crate::error::{Error, Result};
use crate::metrics::{cohen_kappa, AgreementReport};

pub const PROJECT_FORMAT_VERSION: u32 = 1;

/// How long a handed-out task stays reserved for the annotator who got it.
pub const DEFAULT_LEASE: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Labeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub comment_id: String,
    pub raw_text: String,
    pub platform: Platform,
    pub status: TaskStatus,
    pub assigned_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub comment_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub language: Language,
    pub timestamp: String,
    pub revision: u32,
    /// Audit trail: the label this record replaced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaces: Option<Label>,
}

/// A label as it arrives over the wire, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub comment_id: String,
    pub annotator_id: String,
    pub label: String,
    pub language: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    /// Comments with at least one label, project wide.
    pub labeled_count: usize,
    /// 1 for a first submission, incremented on each resubmission.
    pub revision: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportStrategy {
    /// Every annotator agrees.
    Unanimous,
    /// Strictly more than half of the annotators agree.
    Majority,
    /// The annotator who labeled the comment first decides.
    First,
}

impl std::str::FromStr for ExportStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unanimous" => Ok(ExportStrategy::Unanimous),
            "majority" => Ok(ExportStrategy::Majority),
            "first" => Ok(ExportStrategy::First),
            _ => Err(Error::Validation {
                field: "strategy".into(),
                message: format!("`{s}` is not one of unanimous, majority, first"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub dataset: Dataset,
    /// Labeled comments the strategy could not resolve.
    pub excluded: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusTotals {
    pub pending: usize,
    pub labeled: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub total: usize,
    pub by_status: StatusTotals,
    /// Comments labeled by each registered annotator.
    pub per_annotator: BTreeMap<String, usize>,
    pub label_records: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
enum Entry {
    Project { format_version: u32, created: String },
    Comment { id: String, platform: Platform, text: String },
    Annotator { id: String, registered: String },
    Label(LabelRecord),
}

#[derive(Debug, Clone)]
struct StoredComment {
    id: String,
    platform: Platform,
    text: String,
    /// One record per annotator, in order of first submission.
    labels: Vec<LabelRecord>,
}

#[derive(Debug)]
pub struct ProjectStore {
    path: PathBuf,
    file: File,
    comments: Vec<StoredComment>,
    index: HashMap<String, usize>,
    annotators: BTreeMap<String, usize>,
    leases: HashMap<String, HashMap<usize, Instant>>,
    lease: Duration,
    records: usize,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn line(entry: &Entry) -> Result<String> {
    let mut s = serde_json::to_string(entry)?;
    s.push('\n');
    Ok(s)
}

impl ProjectStore {
    /// Writes a new project with every comment pending. Refuses to
    /// overwrite an existing file.
    pub fn create(path: impl AsRef<Path>, dataset: &Dataset, annotators: &[String]) -> Result<ProjectStore> {
        let path = path.as_ref();
        if path.exists() {
            return Err(Error::Validation {
                field: "project".into(),
                message: format!("{} already exists", path.display()),
            });
        }
        let mut body = line(&Entry::Project {
            format_version: PROJECT_FORMAT_VERSION,
            created: now(),
        })?;
        for c in dataset {
            body += &line(&Entry::Comment {
                id: c.id.clone(),
                platform: c.platform,
                text: c.raw_text.clone(),
            })?;
        }
        // written aside and renamed so a crash never leaves half a project
        let tmp = path.with_extension("partial");
        {
            let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            f.write_all(body.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
            f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        let mut store = ProjectStore::open(path)?;
        for a in annotators {
            store.register(a)?;
        }
        Ok(store)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<ProjectStore> {
        let path = path.as_ref().to_path_buf();
        let bad = |line: usize, message: String| Error::ProjectFile {
            path: path.clone(),
            line,
            message,
        };
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        // anything after the last newline was never acknowledged
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        let mut store_comments: Vec<StoredComment> = Vec::new();
        let mut index = HashMap::new();
        let mut annotators = BTreeMap::new();
        let mut records = 0;
        let mut saw_header = false;

        for (i, raw) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
            let n = i + 1;
            if raw.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let entry = std::str::from_utf8(raw)
                .map_err(|e| e.to_string())
                .and_then(|s| serde_json::from_str::<Entry>(s).map_err(|e| e.to_string()))
                .map_err(|m| bad(n, m))?;
            match entry {
                Entry::Project { format_version, .. } => {
                    if format_version != PROJECT_FORMAT_VERSION {
                        return Err(bad(n, format!("format_version {format_version} is not supported")));
                    }
                    saw_header = true;
                }
                Entry::Comment { id, platform, text } => {
                    if index.insert(id.clone(), store_comments.len()).is_some() {
                        return Err(bad(n, format!("duplicate comment id `{id}`")));
                    }
                    store_comments.push(StoredComment {
                        id,
                        platform,
                        text,
                        labels: Vec::new(),
                    });
                }
                Entry::Annotator { id, .. } => {
                    annotators.entry(id).or_insert(0);
                }
                Entry::Label(rec) => {
                    let &idx = index
                        .get(&rec.comment_id)
                        .ok_or_else(|| bad(n, format!("label for unknown comment `{}`", rec.comment_id)))?;
                    let Some(count) = annotators.get_mut(&rec.annotator_id) else {
                        return Err(bad(n, format!("label by unregistered annotator `{}`", rec.annotator_id)));
                    };
                    let labels = &mut store_comments[idx].labels;
                    match labels.iter_mut().find(|r| r.annotator_id == rec.annotator_id) {
                        Some(slot) => *slot = rec,
                        None => {
                            *count += 1;
                            labels.push(rec);
                        }
                    }
                    records += 1;
                }
            }
        }
        if !saw_header {
            return Err(bad(1, "missing project header".into()));
        }
        if complete < bytes.len() {
            log::warn!("{}: dropping a torn final line", path.display());
            let f = OpenOptions::new().write(true).open(&path).map_err(|e| Error::io(&path, e))?;
            f.set_len(complete as u64).map_err(|e| Error::io(&path, e))?;
            f.sync_all().map_err(|e| Error::io(&path, e))?;
        }
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(ProjectStore {
            path,
            file,
            comments: store_comments,
            index,
            annotators,
            leases: HashMap::new(),
            lease: DEFAULT_LEASE,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn set_lease(&mut self, lease: Duration) {
        self.lease = lease;
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        self.annotators.keys().map(String::as_str)
    }

    fn append(&mut self, entry: &Entry) -> Result<()> {
        let text = line(entry)?;
        self.file
            .write_all(text.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))
    }

    /// Returns false when the annotator was already known.
    pub fn register(&mut self, annotator: &str) -> Result<bool> {
        let id = annotator.trim();
        if id.is_empty() {
            return Err(Error::Validation {
                field: "annotator_id".into(),
                message: "must not be empty".into(),
            });
        }
        if self.annotators.contains_key(id) {
            return Ok(false);
        }
        self.append(&Entry::Annotator {
            id: id.to_string(),
            registered: now(),
        })?;
        self.annotators.insert(id.to_string(), 0);
        Ok(true)
    }

    fn known(&self, annotator: &str) -> Result<()> {
        if self.annotators.contains_key(annotator) {
            Ok(())
        } else {
            Err(Error::UnknownAnnotator(annotator.to_string()))
        }
    }

    fn status(c: &StoredComment) -> TaskStatus {
        if c.labels.is_empty() {
            TaskStatus::Pending
        } else {
            TaskStatus::Labeled
        }
    }

    /// The first comment, in project order, that this annotator has
    /// neither labeled nor currently holds a lease on. The returned task is
    /// leased to them, so concurrent sessions of one annotator never see
    /// the same comment twice while the lease lasts.
    pub fn next_task(&mut self, annotator: &str) -> Result<Option<AnnotationTask>> {
        self.known(annotator)?;
        let now = Instant::now();
        let lease = self.lease;
        let held = self.leases.entry(annotator.to_string()).or_default();
        held.retain(|_, t| now.duration_since(*t) < lease);
        let found = self
            .comments
            .iter()
            .enumerate()
            .find(|(i, c)| !held.contains_key(i) && !c.labels.iter().any(|r| r.annotator_id == annotator));
        Ok(found.map(|(i, c)| {
            held.insert(i, now);
            AnnotationTask {
                comment_id: c.id.clone(),
                raw_text: c.text.clone(),
                platform: c.platform,
                status: Self::status(c),
                assigned_to: Some(annotator.to_string()),
            }
        }))
    }

    pub fn task(&self, comment_id: &str) -> Result<AnnotationTask> {
        let &i = self
            .index
            .get(comment_id)
            .ok_or_else(|| Error::NotFound(format!("comment `{comment_id}`")))?;
        let c = &self.comments[i];
        Ok(AnnotationTask {
            comment_id: c.id.clone(),
            raw_text: c.text.clone(),
            platform: c.platform,
            status: Self::status(c),
            assigned_to: None,
        })
    }

    /// Validates, persists, then applies a label.
    pub fn submit(&mut self, sub: &LabelSubmission) -> Result<Ack> {
        let &idx = self
            .index
            .get(&sub.comment_id)
            .ok_or_else(|| Error::NotFound(format!("comment `{}`", sub.comment_id)))?;
        self.known(&sub.annotator_id)?;
        let label: Label = sub.label.parse()?;
        let language = match Language::parse_lenient(&sub.language) {
            Language::Unknown => {
                return Err(Error::Validation {
                    field: "language".into(),
                    message: format!("`{}` is not one of english, hindi, hinglish", sub.language),
                })
            }
            l => l,
        };
        let previous = self.comments[idx].labels.iter().find(|r| r.annotator_id == sub.annotator_id);
        let rec = LabelRecord {
            comment_id: sub.comment_id.clone(),
            annotator_id: sub.annotator_id.clone(),
            label,
            language,
            timestamp: now(),
            revision: previous.map_or(1, |p| p.revision + 1),
            replaces: previous.map(|p| p.label),
        };
        self.append(&Entry::Label(rec.clone()))?;

        let revision = rec.revision;
        let labels = &mut self.comments[idx].labels;
        match labels.iter_mut().find(|r| r.annotator_id == sub.annotator_id) {
            Some(slot) => *slot = rec,
            None => {
                labels.push(rec);
                *self.annotators.get_mut(&sub.annotator_id).expect("checked above") += 1;
            }
        }
        self.records += 1;
        if let Some(held) = self.leases.get_mut(&sub.annotator_id) {
            held.remove(&idx);
        }
        Ok(Ack {
            labeled_count: self.labeled_count(),
            revision,
        })
    }

    pub fn labeled_count(&self) -> usize {
        self.comments.iter().filter(|c| !c.labels.is_empty()).count()
    }

    /// Current labels of one annotator, in project order.
    pub fn labels_of(&self, annotator: &str) -> Result<Vec<&LabelRecord>> {
        self.known(annotator)?;
        Ok(self
            .comments
            .iter()
            .filter_map(|c| c.labels.iter().find(|r| r.annotator_id == annotator))
            .collect())
    }

    /// Kappa over the comments both annotators have labeled.
    pub fn agreement(&self, a: &str, b: &str) -> Result<AgreementReport> {
        self.known(a)?;
        self.known(b)?;
        let (mut la, mut lb) = (Vec::new(), Vec::new());
        for c in &self.comments {
            let ra = c.labels.iter().find(|r| r.annotator_id == a);
            let rb = c.labels.iter().find(|r| r.annotator_id == b);
            if let (Some(ra), Some(rb)) = (ra, rb) {
                la.push(ra.label);
                lb.push(rb.label);
            }
        }
        if la.is_empty() {
            return Err(Error::NoOverlap(a.to_string(), b.to_string()));
        }
        cohen_kappa(&la, &lb)
    }

    /// Resolves one gold label per labeled comment. Comments nobody has
    /// labeled are left out without counting as excluded.
    pub fn export(&self, strategy: ExportStrategy) -> Result<Export> {
        let mut out = Vec::new();
        let mut excluded = 0;
        for c in &self.comments {
            if c.labels.is_empty() {
                continue;
            }
            let Some(gold) = resolve(&c.labels, strategy) else {
                excluded += 1;
                continue;
            };
            let mut comment = Comment {
                id: c.id.clone(),
                platform: c.platform,
                raw_text: c.text.clone(),
                language: modal_language(&c.labels),
                gold_label: Some(gold),
                annotator_labels: BTreeMap::new(),
                processed_text: None,
            };
            for r in &c.labels {
                comment.annotator_labels.insert(r.annotator_id.clone(), r.label);
            }
            out.push(comment);
        }
        if out.is_empty() {
            log::warn!("export under {strategy:?} produced no comments");
        }
        Ok(Export {
            dataset: Dataset::from_comments("annotations", out)?,
            excluded,
        })
    }

    pub fn stats(&self) -> Stats {
        let labeled = self.labeled_count();
        Stats {
            total: self.comments.len(),
            by_status: StatusTotals {
                pending: self.comments.len() - labeled,
                labeled,
            },
            per_annotator: self.annotators.clone(),
            label_records: self.records,
        }
    }
}

fn resolve(labels: &[LabelRecord], strategy: ExportStrategy) -> Option<Label> {
    let hate = labels.iter().filter(|r| r.label == Label::Hate).count();
    let not = labels.len() - hate;
    match strategy {
        ExportStrategy::First => labels.first().map(|r| r.label),
        ExportStrategy::Unanimous if not == 0 => Some(Label::Hate),
        ExportStrategy::Unanimous if hate == 0 => Some(Label::NotHate),
        ExportStrategy::Unanimous => None,
        ExportStrategy::Majority if 2 * hate > labels.len() => Some(Label::Hate),
        ExportStrategy::Majority if 2 * not > labels.len() => Some(Label::NotHate),
        ExportStrategy::Majority => None,
    }
}

/// Most frequent tag; ties go to whichever tied tag was submitted first.
fn modal_language(labels: &[LabelRecord]) -> Language {
    let count = |l: Language| labels.iter().filter(|r| r.language == l).count();
    let best = labels.iter().map(|r| count(r.language)).max().unwrap_or(0);
    labels
        .iter()
        .map(|r| r.language)
        .find(|&l| count(l) == best)
        .unwrap_or(Language::Unknown)
}
