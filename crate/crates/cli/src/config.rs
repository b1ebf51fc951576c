//! Run configuration files.
//!
//! A config is TOML. It may name a `preset`, whose tables are merged under
//! the file's own: nested tables merge key by key, while scalars and arrays
//! in the file replace the preset's.

use std::path::{Path, PathBuf};

use hatespeech::corpus::ColumnMap;
use hatespeech::embeddings::{EmbedderSpec, LoadContext};
use hatespeech::models::{ClassifierConfig, HeadKind};
use hatespeech::preprocess::PipelineLanguage;
use hatespeech::SplitSpec;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

const BASE: &str = r#"
[split]
train_frac = 0.8
dev_frac = 0.1
test_frac = 0.1
seed = 0
"#;

/// Published recipes. Pretrained paths are relative to the weights root.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "english-bertbu-cnn",
        r#"
[pipeline]
language = "english"

[embedder]
kind = "transformer"
name = "bert-base-uncased"
dim = 768
weight_source = { type = "pretrained_file", path = "bert-base-uncased" }

[classifier]
head = "cnn"
max_len = 100
learning_rate = "authors"
"#,
    ),
    (
        "hinglish-bertmu-cnn",
        r#"
[pipeline]
language = "hinglish"

[embedder]
kind = "transformer"
name = "bert-base-multilingual-uncased"
dim = 768
weight_source = { type = "pretrained_file", path = "bert-base-multilingual-uncased" }

[classifier]
head = "cnn"
max_len = 75
learning_rate = "combined"
"#,
    ),
    (
        "hinglish-elmo-mlp",
        r#"
[pipeline]
language = "hinglish"

[embedder]
kind = "char_bilstm"
name = "elmo"
dim = 1024
weight_source = { type = "pretrained_file", path = "elmo" }

[classifier]
head = "mlp"
max_len = 75
learning_rate = "elmo"
"#,
    ),
    (
        "flair-stacked-bilstm",
        r#"
[pipeline]
language = "hinglish"

[embedder]
kind = "stacked"
name = "flair-stacked"
dim = 4396

[[embedder.components]]
kind = "transformer"
name = "word-hi"
dim = 300
weight_source = { type = "pretrained_file", path = "word-hi" }

[[embedder.components]]
kind = "char_bilstm"
name = "flair-hi-forward"
dim = 2048
weight_source = { type = "pretrained_file", path = "flair-hi-forward" }

[[embedder.components]]
kind = "char_bilstm"
name = "flair-hi-backward"
dim = 2048
weight_source = { type = "pretrained_file", path = "flair-hi-backward" }

[classifier]
head = "bilstm"
max_len = 75
learning_rate = "flair"
"#,
    ),
    (
        "flair-bert-bilstm",
        r#"
[pipeline]
language = "hinglish"

[embedder]
kind = "stacked"
name = "flair-bert"
dim = 1536

[[embedder.components]]
kind = "transformer"
name = "bert-base-uncased"
dim = 768
weight_source = { type = "pretrained_file", path = "bert-base-uncased" }

[[embedder.components]]
kind = "transformer"
name = "bert-base-multilingual-uncased"
dim = 768
weight_source = { type = "pretrained_file", path = "bert-base-multilingual-uncased" }

[classifier]
head = "bilstm"
max_len = 75
learning_rate = "flair"
"#,
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Corpus CSV, relative to the config file.
    pub path: PathBuf,
    #[serde(default)]
    pub columns: ColumnMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub language: PipelineLanguage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preset: Option<String>,
    /// Shown in the Dataset column and used for the run directory.
    #[serde(default)]
    pub name: Option<String>,
    pub data: DataConfig,
    pub pipeline: PipelineConfig,
    pub split: SplitSpec,
    pub embedder: EmbedderSpec,
    #[serde(default)]
    pub classifier: ClassifierConfig,
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table, CliError> {
    text.parse::<Table>()
        .map_err(|e| CliError::Usage(format!("{origin}: {e}")))
}

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|&(_, t)| t)
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|&(n, _)| n).collect()
}

impl RunConfig {
    /// Parses config text. Relative paths stay relative; see [`RunConfig::load`].
    pub fn from_toml(text: &str, origin: &str) -> Result<RunConfig, CliError> {
        let user = parse_table(text, origin)?;
        let mut merged = parse_table(BASE, "built-in defaults")?;
        if let Some(name) = user.get("preset") {
            let name = name
                .as_str()
                .ok_or_else(|| CliError::Usage(format!("{origin}: `preset` must be a string")))?;
            let body = preset(name).ok_or_else(|| {
                CliError::Usage(format!(
                    "{origin}: unknown preset `{name}` (known: {})",
                    preset_names().join(", ")
                ))
            })?;
            merge(&mut merged, parse_table(body, name)?);
        }
        merge(&mut merged, user);
        let config: RunConfig = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("{origin}: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a TOML config, or the config snapshot inside a run manifest
    /// (`.json`), and makes its file paths absolute.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let origin = path.display().to_string();
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            let manifest: crate::manifest::RunManifest =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
            let config = manifest
                .config
                .ok_or_else(|| CliError::Usage(format!("{origin}: manifest holds no run config")))?;
            config.validate()?;
            config
        } else {
            RunConfig::from_toml(&text, &origin)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let base = std::path::absolute(base).map_err(|e| CliError::Data(format!("{}: {e}", base.display())))?;
        config.absolutize(&base);
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.embedder.validate()?;
        self.classifier.validate()?;
        self.split.validate()?;
        Ok(())
    }

    fn absolutize(&mut self, base: &Path) {
        let ctx = LoadContext::new(base);
        self.data.path = ctx.resolve(&self.data.path);
        fn walk(spec: &mut EmbedderSpec, ctx: &LoadContext) {
            if let Some(v) = spec.transformer.as_mut().and_then(|t| t.vocab.as_mut()) {
                *v = ctx.resolve(v);
            }
            for c in &mut spec.components {
                walk(c, ctx);
            }
        }
        walk(&mut self.embedder, &ctx);
    }

    /// `--seed` replaces both the split and the classifier seed.
    pub fn apply_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.classifier.seed = seed;
    }

    /// Context for building the embedder: vocabularies resolve against the
    /// data file's directory once paths are absolute, pretrained weights
    /// against the environment's weights root.
    pub fn load_context(&self) -> LoadContext {
        let base = self.data.path.parent().map(Path::to_path_buf).unwrap_or_default();
        LoadContext::new(base).with_env()
    }

    pub fn dataset_label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.data
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn model_label(&self) -> String {
        if let Some(p) = &self.preset {
            return p.clone();
        }
        let head = match self.classifier.head {
            HeadKind::Cnn => "CNN",
            HeadKind::Mlp => "MLP",
            HeadKind::Bilstm => "BiLSTM",
        };
        let emb = if self.embedder.name.is_empty() {
            format!("{:?}", self.embedder.kind).to_lowercase()
        } else {
            self.embedder.name.clone()
        };
        format!("{emb} + {head}")
    }
}
