//! Model directories: `model.json` describes everything needed to rebuild
//! the model, `head.{json,bin}` hold the head and, when the embedder is
//! not a read-only pretrained one, `embedder.{json,bin}` hold its weights.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClassifierConfig, EpochRecord, Head, TrainedModel, EMBEDDER_PREFIX, HEAD_PREFIX};
use crate::embeddings::{Backend, Embedder, EmbedderSpec, LoadContext, WeightSource};
use crate::error::{Error, Result};
use crate::nn::weights::{blob_path, load_into_prefixed, manifest_path, save_params_prefixed};
use crate::nn::ParamStore;
use crate::preprocess::PipelineLanguage;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "model.json";
const HEAD_STEM: &str = "head";
const EMBEDDER_STEM: &str = "embedder";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub language: PipelineLanguage,
    pub config: ClassifierConfig,
    /// Vocabulary paths point into the model directory; pretrained paths
    /// are absolute unless they were relative to the weights root.
    pub embedder: EmbedderSpec,
    /// Hash of the first vocabulary's token list, one token per line.
    pub vocab_sha256: Option<String>,
    pub head_weights: String,
    pub embedder_weights: Option<String>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

fn has_random_part(spec: &EmbedderSpec) -> bool {
    match &spec.weight_source {
        _ if !spec.components.is_empty() => spec.components.iter().any(has_random_part),
        WeightSource::RandomTiny { .. } => true,
        WeightSource::PretrainedFile { .. } => false,
    }
}

fn portable_spec(emb: &Embedder, ctx: &LoadContext, dir: &Path, vocabs: &mut usize) -> Result<EmbedderSpec> {
    let mut spec = emb.spec.clone();
    match (&emb.backend, &mut spec.weight_source) {
        (Backend::Stacked(parts), _) => {
            spec.components = parts
                .iter()
                .map(|p| portable_spec(p, ctx, dir, vocabs))
                .collect::<Result<_>>()?;
        }
        (Backend::Transformer(t), WeightSource::RandomTiny { .. }) => {
            let name = match *vocabs {
                0 => "vocab.txt".to_string(),
                n => format!("vocab-{n}.txt"),
            };
            *vocabs += 1;
            t.vocab.save(dir.join(&name))?;
            if let Some(cfg) = spec.transformer.as_mut() {
                cfg.vocab = Some(name.into());
            }
        }
        (_, WeightSource::PretrainedFile { path }) if ctx.weights_root.is_none() || path.is_absolute() => {
            let resolved = ctx.resolve_weights(path);
            *path = std::path::absolute(&resolved).map_err(|e| Error::io(&resolved, e))?;
        }
        _ => {}
    }
    Ok(spec)
}

fn vocab_digest(emb: &Embedder) -> Option<String> {
    emb.vocabulary().map(|v| {
        let mut h = Sha256::new();
        for t in v.tokens() {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    })
}

impl TrainedModel {
    /// Writes the model directory and returns the files written. `ctx`
    /// must be the context the model was built with.
    pub fn save(&self, dir: impl AsRef<Path>, ctx: &LoadContext) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        let mut vocabs = 0;
        let spec = portable_spec(&self.embedder, ctx, dir, &mut vocabs)?;
        for i in 0..vocabs {
            files.push(dir.join(if i == 0 { "vocab.txt".into() } else { format!("vocab-{i}.txt") }));
        }

        save_params_prefixed(&self.params, dir, HEAD_STEM, HEAD_PREFIX)?;
        files.push(manifest_path(dir, HEAD_STEM));
        files.push(blob_path(dir, HEAD_STEM));
        let embedder_weights = if spec.trainable || has_random_part(&spec) {
            save_params_prefixed(&self.params, dir, EMBEDDER_STEM, EMBEDDER_PREFIX)?;
            files.push(manifest_path(dir, EMBEDDER_STEM));
            files.push(blob_path(dir, EMBEDDER_STEM));
            Some(EMBEDDER_STEM.to_string())
        } else {
            None
        };

        let manifest = ModelManifest {
            format_version: MODEL_FORMAT_VERSION,
            language: self.language,
            config: self.config.clone(),
            embedder: spec,
            vocab_sha256: vocab_digest(&self.embedder),
            head_weights: HEAD_STEM.into(),
            embedder_weights,
            history: self.history.clone(),
            best_epoch: self.best_epoch,
        };
        let path = dir.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        files.push(path);
        Ok(files)
    }

    /// Rebuilds a saved model. Relative pretrained paths resolve against
    /// `weights_root`.
    pub fn load(dir: impl AsRef<Path>, weights_root: Option<PathBuf>) -> Result<TrainedModel> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: ModelManifest = serde_json::from_str(&text)?;
        if manifest.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Weights(format!(
                "{} has format_version {}, this build reads {MODEL_FORMAT_VERSION}",
                path.display(),
                manifest.format_version
            )));
        }
        let ctx = LoadContext {
            base_dir: dir.to_path_buf(),
            weights_root,
        };
        let mut params = ParamStore::new();
        let embedder = Embedder::build(&manifest.embedder, &ctx, &mut params, EMBEDDER_PREFIX)?;
        if vocab_digest(&embedder) != manifest.vocab_sha256 {
            return Err(Error::Weights(format!(
                "vocabulary of {} differs from the one the model was trained with",
                dir.display()
            )));
        }
        if let Some(stem) = &manifest.embedder_weights {
            load_into_prefixed(&mut params, dir, stem, EMBEDDER_PREFIX)?;
        }
        let head = Head::init(&manifest.config, embedder.dim(), &mut params, HEAD_PREFIX)?;
        load_into_prefixed(&mut params, dir, &manifest.head_weights, HEAD_PREFIX)?;
        Ok(TrainedModel {
            config: manifest.config,
            language: manifest.language,
            history: manifest.history,
            best_epoch: manifest.best_epoch,
            embedder,
            head,
            params,
        })
    }
}

/// Reads only the manifest of a saved model.
pub fn read_manifest(dir: impl AsRef<Path>) -> Result<ModelManifest> {
    let path = dir.as_ref().join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
