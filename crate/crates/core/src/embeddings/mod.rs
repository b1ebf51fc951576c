//! Contextual embedding backends behind one contract: text in, one vector
//! per position out.
//!
//! Backends register their parameters in a caller-supplied [`ParamStore`]
//! under a name prefix, so a classifier can train the embedder and its
//! head in one graph.

pub mod char_bilstm;
pub mod transformer;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use char_bilstm::{CharBilstm, CharBilstmConfig, Direction};
pub use transformer::{Transformer, TransformerConfig};

use crate::error::{Error, Result};
use crate::nn::weights::{load_into_prefixed, save_params_prefixed};
use crate::nn::{Graph, ParamStore, Var};
use crate::tokenizer::{encode, TokenSequence, Vocabulary};

pub const TRANSFORMER_LAYOUT: &str =
    "<dir>/config.json (transformer config), <dir>/vocab.txt, <dir>/weights.json + <dir>/weights.bin";
pub const CHAR_BILSTM_LAYOUT: &str = "<dir>/config.json (char_bilstm config), <dir>/weights.json + <dir>/weights.bin";

/// Environment variable naming the root for relative pretrained paths.
pub const WEIGHTS_DIR_ENV: &str = "HATESPEECH_WEIGHTS_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Transformer,
    CharBilstm,
    Stacked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WeightSource {
    RandomTiny {
        #[serde(default)]
        seed: u64,
    },
    PretrainedFile {
        path: PathBuf,
    },
}

impl Default for WeightSource {
    fn default() -> Self {
        WeightSource::RandomTiny { seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    #[serde(default)]
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub weight_source: WeightSource,
    #[serde(default)]
    pub components: Vec<EmbedderSpec>,
    /// Fine-tune embedder weights along with the head.
    #[serde(default)]
    pub trainable: bool,
    #[serde(default)]
    pub transformer: Option<TransformerConfig>,
    #[serde(default)]
    pub char_bilstm: Option<CharBilstmConfig>,
}

impl EmbedderSpec {
    pub fn transformer(name: &str, config: TransformerConfig, seed: u64) -> Self {
        EmbedderSpec {
            kind: EmbedderKind::Transformer,
            name: name.into(),
            dim: config.hidden,
            weight_source: WeightSource::RandomTiny { seed },
            components: Vec::new(),
            trainable: false,
            transformer: Some(config),
            char_bilstm: None,
        }
    }

    pub fn char_bilstm(name: &str, config: CharBilstmConfig, seed: u64) -> Self {
        EmbedderSpec {
            kind: EmbedderKind::CharBilstm,
            name: name.into(),
            dim: config.dim(),
            weight_source: WeightSource::RandomTiny { seed },
            components: Vec::new(),
            trainable: false,
            transformer: None,
            char_bilstm: Some(config),
        }
    }

    pub fn stacked(name: &str, components: Vec<EmbedderSpec>) -> Self {
        EmbedderSpec {
            kind: EmbedderKind::Stacked,
            name: name.into(),
            dim: components.iter().map(|c| c.dim).sum(),
            weight_source: WeightSource::default(),
            components,
            trainable: false,
            transformer: None,
            char_bilstm: None,
        }
    }

    pub fn pretrained(kind: EmbedderKind, name: &str, dim: usize, path: impl Into<PathBuf>) -> Self {
        EmbedderSpec {
            kind,
            name: name.into(),
            dim,
            weight_source: WeightSource::PretrainedFile { path: path.into() },
            components: Vec::new(),
            trainable: false,
            transformer: None,
            char_bilstm: None,
        }
    }

    /// Checks the structural invariants that do not need weight files.
    pub fn validate(&self) -> Result<()> {
        let label = if self.name.is_empty() { format!("{:?}", self.kind) } else { self.name.clone() };
        let bad = |m: String| Error::Config(format!("embedder {label}: {m}"));
        if self.dim == 0 {
            return Err(bad("dim must be positive".into()));
        }
        match self.kind {
            EmbedderKind::Stacked => {
                if self.components.is_empty() {
                    return Err(bad("a stacked embedder needs components".into()));
                }
                for c in &self.components {
                    c.validate()?;
                }
                let sum: usize = self.components.iter().map(|c| c.dim).sum();
                if sum != self.dim {
                    return Err(bad(format!(
                        "declared dim {} does not equal the sum of component dims {sum}",
                        self.dim
                    )));
                }
            }
            kind => {
                if !self.components.is_empty() {
                    return Err(bad("only stacked embedders take components".into()));
                }
                let random = matches!(self.weight_source, WeightSource::RandomTiny { .. });
                let declared = match kind {
                    EmbedderKind::Transformer => self.transformer.as_ref().map(|c| {
                        c.validate()?;
                        Ok::<_, Error>(c.hidden)
                    }),
                    _ => self.char_bilstm.as_ref().map(|c| {
                        c.validate()?;
                        Ok(c.dim())
                    }),
                };
                match declared {
                    Some(d) => {
                        let d = d?;
                        if d != self.dim {
                            return Err(bad(format!("dim {} does not match its backend config ({d})", self.dim)));
                        }
                    }
                    None if random => {
                        return Err(bad("random_tiny weights need a backend config section".into()));
                    }
                    None => {}
                }
            }
        }
        Ok(())
    }
}

/// Where relative paths in a spec are resolved.
#[derive(Debug, Clone, Default)]
pub struct LoadContext {
    /// Base for vocabulary paths (usually the config file's directory).
    pub base_dir: PathBuf,
    /// Base for relative pretrained weight paths.
    pub weights_root: Option<PathBuf>,
}

impl LoadContext {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        LoadContext {
            base_dir: base_dir.into(),
            weights_root: None,
        }
    }

    /// Reads the weights root from the environment.
    pub fn with_env(mut self) -> Self {
        if let Some(root) = std::env::var_os(WEIGHTS_DIR_ENV) {
            self.weights_root = Some(PathBuf::from(root));
        }
        self
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn resolve_weights(&self, path: &Path) -> PathBuf {
        match (&self.weights_root, path.is_absolute()) {
            (Some(root), false) => root.join(path),
            _ => self.resolve(path),
        }
    }
}

/// Per-position vectors produced by an embedder.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vectors: Array2<f64>,
    pub dim: usize,
    pub backend_name: String,
}

impl EmbeddingMatrix {
    pub fn new(vectors: Array2<f64>, backend_name: impl Into<String>) -> Result<Self> {
        if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation {
                field: "embedding".into(),
                message: format!("non-finite entry at flat index {pos}"),
            });
        }
        Ok(EmbeddingMatrix {
            dim: vectors.ncols(),
            vectors,
            backend_name: backend_name.into(),
        })
    }

    pub fn rows(&self) -> usize {
        self.vectors.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// One row per WordPiece position, specials and pads included.
    Subword,
    /// One row per whitespace word, padded with zero rows.
    Word,
}

/// Text prepared for a backend at a fixed length.
#[derive(Debug, Clone)]
pub struct EmbedInput {
    pub sequence: Option<TokenSequence>,
    pub words: Vec<String>,
    pub mask: Vec<bool>,
    pub max_len: usize,
}

#[derive(Debug, Clone)]
pub enum Backend {
    Transformer(Transformer),
    CharBilstm(CharBilstm),
    Stacked(Vec<Embedder>),
}

#[derive(Debug, Clone)]
pub struct Embedder {
    pub spec: EmbedderSpec,
    pub backend: Backend,
    /// Prefix of this embedder's parameter names in the store.
    pub prefix: String,
}

fn missing_files(dir: &Path, files: &[&str]) -> Vec<String> {
    files
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| f.to_string())
        .collect()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

impl Embedder {
    /// Builds the backend described by `spec`, adding its parameters to
    /// `store` under `prefix`. Pretrained sources must exist on disk; a
    /// missing file is an error, never a silent random init.
    pub fn build(spec: &EmbedderSpec, ctx: &LoadContext, store: &mut ParamStore, prefix: &str) -> Result<Self> {
        spec.validate()?;
        let backend = match (spec.kind, &spec.weight_source) {
            (EmbedderKind::Stacked, _) => {
                let mut comps = Vec::with_capacity(spec.components.len());
                for (i, c) in spec.components.iter().enumerate() {
                    comps.push(Embedder::build(c, ctx, store, &format!("{prefix}components.{i}."))?);
                }
                Backend::Stacked(comps)
            }
            (EmbedderKind::Transformer, WeightSource::RandomTiny { seed }) => {
                let cfg = spec.transformer.clone().expect("validated");
                let vocab_path = cfg
                    .vocab
                    .as_ref()
                    .ok_or_else(|| Error::Config("random_tiny transformer needs a vocab path".into()))?;
                let vocab = Arc::new(Vocabulary::load(ctx.resolve(vocab_path))?);
                Backend::Transformer(Transformer::init(cfg, vocab, store, prefix, *seed)?)
            }
            (EmbedderKind::CharBilstm, WeightSource::RandomTiny { seed }) => {
                let cfg = spec.char_bilstm.clone().expect("validated");
                Backend::CharBilstm(CharBilstm::init(cfg, store, prefix, *seed)?)
            }
            (EmbedderKind::Transformer, WeightSource::PretrainedFile { path }) => {
                let dir = ctx.resolve_weights(path);
                let mut need = vec!["config.json", "weights.json", "weights.bin"];
                let cfg_probe: Option<TransformerConfig> = read_json(&dir.join("config.json")).ok();
                let external_vocab = cfg_probe.as_ref().and_then(|c| c.vocab.clone());
                if external_vocab.is_none() {
                    need.push("vocab.txt");
                }
                let missing = missing_files(&dir, &need);
                if !missing.is_empty() {
                    return Err(Error::MissingWeights {
                        dir,
                        missing: missing.join(", "),
                        layout: TRANSFORMER_LAYOUT,
                    });
                }
                let cfg: TransformerConfig = read_json(&dir.join("config.json"))?;
                if cfg.hidden != spec.dim {
                    return Err(Error::Config(format!(
                        "embedder {}: spec dim {} but {} has hidden {}",
                        spec.name,
                        spec.dim,
                        dir.display(),
                        cfg.hidden
                    )));
                }
                let vocab_path = match &cfg.vocab {
                    Some(v) if v.is_absolute() => v.clone(),
                    Some(v) => dir.join(v),
                    None => dir.join("vocab.txt"),
                };
                let vocab = Arc::new(Vocabulary::load(vocab_path)?);
                let model = Transformer::init(cfg, vocab, store, prefix, 0)?;
                load_into_prefixed(store, &dir, "weights", prefix)?;
                Backend::Transformer(model)
            }
            (EmbedderKind::CharBilstm, WeightSource::PretrainedFile { path }) => {
                let dir = ctx.resolve_weights(path);
                let missing = missing_files(&dir, &["config.json", "weights.json", "weights.bin"]);
                if !missing.is_empty() {
                    return Err(Error::MissingWeights {
                        dir,
                        missing: missing.join(", "),
                        layout: CHAR_BILSTM_LAYOUT,
                    });
                }
                let cfg: CharBilstmConfig = read_json(&dir.join("config.json"))?;
                if cfg.dim() != spec.dim {
                    return Err(Error::Config(format!(
                        "embedder {}: spec dim {} but {} produces {}",
                        spec.name,
                        spec.dim,
                        dir.display(),
                        cfg.dim()
                    )));
                }
                let model = CharBilstm::init(cfg, store, prefix, 0)?;
                load_into_prefixed(store, &dir, "weights", prefix)?;
                Backend::CharBilstm(model)
            }
        };
        Ok(Embedder {
            spec: spec.clone(),
            backend,
            prefix: prefix.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        match &self.backend {
            Backend::Transformer(t) => t.dim(),
            Backend::CharBilstm(c) => c.dim(),
            Backend::Stacked(cs) => cs.iter().map(Embedder::dim).sum(),
        }
    }

    pub fn name(&self) -> &str {
        if self.spec.name.is_empty() {
            match self.spec.kind {
                EmbedderKind::Transformer => "transformer",
                EmbedderKind::CharBilstm => "char_bilstm",
                EmbedderKind::Stacked => "stacked",
            }
        } else {
            &self.spec.name
        }
    }

    pub fn granularity(&self) -> Granularity {
        match self.backend {
            Backend::Transformer(_) => Granularity::Subword,
            _ => Granularity::Word,
        }
    }

    /// Vocabulary of the first transformer found, if any.
    pub fn vocabulary(&self) -> Option<&Arc<Vocabulary>> {
        match &self.backend {
            Backend::Transformer(t) => Some(&t.vocab),
            Backend::CharBilstm(_) => None,
            Backend::Stacked(cs) => cs.iter().find_map(Embedder::vocabulary),
        }
    }

    /// Every char-BiLSTM in this embedder, for inspecting mix weights.
    pub fn char_bilstms(&self) -> Vec<&CharBilstm> {
        match &self.backend {
            Backend::Transformer(_) => Vec::new(),
            Backend::CharBilstm(c) => vec![c],
            Backend::Stacked(cs) => cs.iter().flat_map(Embedder::char_bilstms).collect(),
        }
    }

    pub fn prepare(&self, text: &str, max_len: usize) -> EmbedInput {
        match &self.backend {
            Backend::Transformer(t) => {
                let seq = encode(text, &t.vocab, max_len);
                let mask = seq.mask.iter().map(|&m| m == 1).collect();
                let words = text.split_whitespace().map(String::from).collect();
                EmbedInput {
                    sequence: Some(seq),
                    words,
                    mask,
                    max_len,
                }
            }
            _ => {
                let words: Vec<String> = text.split_whitespace().take(max_len).map(String::from).collect();
                let mut mask = vec![true; words.len()];
                mask.resize(max_len, false);
                EmbedInput {
                    sequence: None,
                    words,
                    mask,
                    max_len,
                }
            }
        }
    }

    /// `max_len × dim` node for prepared input.
    pub fn forward(&self, g: &mut Graph, input: &EmbedInput) -> Result<Var> {
        match (&self.backend, &input.sequence) {
            (Backend::Transformer(t), Some(seq)) => t.forward(g, seq),
            (Backend::Transformer(_), None) => Err(Error::Shape("transformer input was not tokenized".into())),
            _ => {
                let n = input.words.len();
                if n == 0 {
                    return Ok(g.input(Array2::zeros((input.max_len, self.dim()))));
                }
                let v = self.forward_words(g, &input.words)?;
                if n < input.max_len {
                    let pad = g.input(Array2::zeros((input.max_len - n, self.dim())));
                    Ok(g.concat_rows(&[v, pad]))
                } else {
                    Ok(v)
                }
            }
        }
    }

    /// One vector per word.
    pub fn forward_words(&self, g: &mut Graph, words: &[String]) -> Result<Var> {
        if words.is_empty() {
            return Err(Error::EmptyInput("no words to embed".into()));
        }
        match &self.backend {
            Backend::Transformer(t) => t.forward_words(g, words),
            Backend::CharBilstm(c) => c.forward(g, words),
            Backend::Stacked(cs) => {
                let parts = cs.iter().map(|c| c.forward_words(g, words)).collect::<Result<Vec<_>>>()?;
                Ok(if parts.len() == 1 { parts[0] } else { g.concat_cols(&parts) })
            }
        }
    }

    pub fn embed_text(&self, store: &ParamStore, text: &str, max_len: usize) -> Result<(EmbeddingMatrix, Vec<bool>)> {
        let input = self.prepare(text, max_len);
        let mut g = Graph::inference(store);
        let v = self.forward(&mut g, &input)?;
        let m = EmbeddingMatrix::new(g.into_value(v), self.name())?;
        Ok((m, input.mask))
    }

    pub fn embed_sequence(&self, store: &ParamStore, seq: &TokenSequence) -> Result<EmbeddingMatrix> {
        let Backend::Transformer(t) = &self.backend else {
            return Err(Error::Config(format!("{} is not a transformer", self.name())));
        };
        let mut g = Graph::inference(store);
        let v = t.forward(&mut g, seq)?;
        EmbeddingMatrix::new(g.into_value(v), self.name())
    }

    pub fn embed_words(&self, store: &ParamStore, words: &[String]) -> Result<EmbeddingMatrix> {
        let mut g = Graph::inference(store);
        let v = self.forward_words(&mut g, words)?;
        EmbeddingMatrix::new(g.into_value(v), self.name())
    }

    /// Writes this embedder in the pretrained layout so it can be loaded
    /// back through a `pretrained_file` source. Stacked embedders write one
    /// directory per component under `dir/<index>`.
    pub fn export_pretrained(&self, store: &ParamStore, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write_json = |name: &str, json: String| {
            let p = dir.join(name);
            fs::write(&p, json).map_err(|e| Error::io(&p, e))
        };
        match &self.backend {
            Backend::Transformer(t) => {
                let mut cfg = t.config.clone();
                cfg.vocab = None;
                write_json("config.json", serde_json::to_string_pretty(&cfg)?)?;
                t.vocab.save(dir.join("vocab.txt"))?;
            }
            Backend::CharBilstm(c) => {
                write_json("config.json", serde_json::to_string_pretty(&c.config)?)?;
            }
            Backend::Stacked(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    c.export_pretrained(store, &dir.join(i.to_string()))?;
                }
                return Ok(());
            }
        }
        save_params_prefixed(store, dir, "weights", &self.prefix)?;
        Ok(())
    }
}

/// An embedder with its own parameter store.
#[derive(Debug, Clone)]
pub struct EmbedderInstance {
    pub embedder: Embedder,
    pub params: ParamStore,
}

impl EmbedderInstance {
    pub fn from_spec(spec: &EmbedderSpec, ctx: &LoadContext) -> Result<Self> {
        let mut params = ParamStore::new();
        let embedder = Embedder::build(spec, ctx, &mut params, "")?;
        Ok(EmbedderInstance { embedder, params })
    }

    pub fn dim(&self) -> usize {
        self.embedder.dim()
    }

    pub fn embed_text(&self, text: &str, max_len: usize) -> Result<(EmbeddingMatrix, Vec<bool>)> {
        self.embedder.embed_text(&self.params, text, max_len)
    }

    pub fn embed_sequence(&self, seq: &TokenSequence) -> Result<EmbeddingMatrix> {
        self.embedder.embed_sequence(&self.params, seq)
    }

    pub fn embed_words(&self, words: &[String]) -> Result<EmbeddingMatrix> {
        self.embedder.embed_words(&self.params, words)
    }
}
