//! Classifier heads and the fine-tuning loop.

mod artifact;
pub mod config;
pub mod heads;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use artifact::{read_manifest, ModelManifest, MODEL_FORMAT_VERSION};
pub use config::{learning_rate_preset, ClassifierConfig, HeadKind, Optimizer, LEARNING_RATE_PRESETS};
pub use heads::Head;

use crate::corpus::{Dataset, Label};
use crate::embeddings::{EmbedInput, Embedder, EmbedderSpec, LoadContext};
use crate::error::{Error, Result};
use crate::nn::{Adam, Graph, ParamId, ParamStore};
use crate::preprocess::{run_pipeline, PipelineLanguage};

pub const EMBEDDER_PREFIX: &str = "embedder.";
pub const HEAD_PREFIX: &str = "head.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when the dev set is empty.
    pub dev_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    fn from_probs(p: Vec<f64>) -> Prediction {
        // ties go to the lower class index
        let best = p
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > p[best] { i } else { best });
        Prediction {
            label: Label::from_index(best).expect("binary head"),
            probabilities: p,
        }
    }
}

/// An embedder plus a trained head, sharing one parameter store.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ClassifierConfig,
    pub language: PipelineLanguage,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; `None` if no epoch ran.
    pub best_epoch: Option<usize>,
    embedder: Embedder,
    head: Head,
    params: ParamStore,
}

struct Example {
    input: EmbedInput,
    target: usize,
}

fn examples(embedder: &Embedder, data: &Dataset, max_len: usize) -> Result<Vec<Example>> {
    let unlabeled: Vec<String> = data
        .iter()
        .filter(|c| c.gold_label.is_none())
        .map(|c| c.id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::MissingLabels(unlabeled));
    }
    Ok(data
        .iter()
        .map(|c| Example {
            input: embedder.prepare(c.text(), max_len),
            target: c.gold_label.expect("checked").index(),
        })
        .collect())
}

fn embed(embedder: &Embedder, store: &ParamStore, input: &EmbedInput) -> Result<Array2<f64>> {
    let mut g = Graph::inference(store);
    let v = embedder.forward(&mut g, input)?;
    Ok(g.into_value(v))
}

fn accuracy(probs: &Array2<f64>, targets: &[usize]) -> f64 {
    let correct = probs
        .rows()
        .into_iter()
        .zip(targets)
        .filter(|(row, &t)| Prediction::from_probs(row.to_vec()).label.index() == t)
        .count();
    correct as f64 / targets.len() as f64
}

impl TrainedModel {
    /// A model with freshly initialized parameters.
    pub fn init(spec: &EmbedderSpec, ctx: &LoadContext, language: PipelineLanguage, config: &ClassifierConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let embedder = Embedder::build(spec, ctx, &mut params, EMBEDDER_PREFIX)?;
        let head = Head::init(config, embedder.dim(), &mut params, HEAD_PREFIX)?;
        Ok(TrainedModel {
            config: config.clone(),
            language,
            history: Vec::new(),
            best_epoch: None,
            embedder,
            head,
            params,
        })
    }

    pub fn embedder(&self) -> &Embedder {
        &self.embedder
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    fn trainable_ids(&self) -> Vec<ParamId> {
        let train_embedder = self.embedder.spec.trainable;
        self.params
            .ids()
            .filter(|&id| train_embedder || self.params.name(id).starts_with(HEAD_PREFIX))
            .collect()
    }

    /// Probabilities for already-embedded inputs, in batches.
    fn probs_for(&self, embs: &[ArrayView2<f64>], masks: &[Vec<bool>]) -> Result<Array2<f64>> {
        let mut out = Vec::with_capacity(embs.len());
        for (e, m) in embs.chunks(self.config.batch_size).zip(masks.chunks(self.config.batch_size)) {
            out.push(self.head.probabilities_batch(&self.params, e, m)?);
        }
        let views: Vec<_> = out.iter().map(|a| a.view()).collect();
        if views.is_empty() {
            return Ok(Array2::zeros((0, self.config.num_classes)));
        }
        concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
    }

    fn embed_all(&self, exs: &[Example]) -> Result<Vec<Array2<f64>>> {
        exs.iter().map(|e| embed(&self.embedder, &self.params, &e.input)).collect()
    }

    /// Fine-tunes with Adam on shuffled mini-batches and keeps the
    /// parameters of the epoch with the best dev accuracy (the last epoch
    /// when dev is empty). Frozen embedders are run once per comment and
    /// their outputs cached.
    fn fit(&mut self, train: &Dataset, dev: &Dataset) -> Result<()> {
        let cfg = self.config.clone();
        let train_ex = examples(&self.embedder, train, cfg.max_len)?;
        let dev_ex = examples(&self.embedder, dev, cfg.max_len)?;
        if cfg.epochs == 0 {
            return Ok(());
        }
        if train_ex.is_empty() {
            return Err(Error::EmptyInput("training set is empty".into()));
        }
        let frozen = !self.embedder.spec.trainable;
        let train_cache = if frozen { Some(self.embed_all(&train_ex)?) } else { None };
        let dev_cache = if frozen { Some(self.embed_all(&dev_ex)?) } else { None };
        let dev_masks: Vec<Vec<bool>> = dev_ex.iter().map(|e| e.input.mask.clone()).collect();
        let dev_targets: Vec<usize> = dev_ex.iter().map(|e| e.target).collect();

        let trainable = self.trainable_ids();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut adam = Adam::new(cfg.learning_rate);
        let mut order: Vec<usize> = (0..train_ex.len()).collect();
        let mut best: Option<(f64, Vec<Array2<f64>>)> = None;

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for (batch_no, idx) in order.chunks(cfg.batch_size).enumerate() {
                let masks: Vec<Vec<bool>> = idx.iter().map(|&i| train_ex[i].input.mask.clone()).collect();
                let targets: Vec<usize> = idx.iter().map(|&i| train_ex[i].target).collect();
                let grads = {
                    let mut g = Graph::new(&self.params);
                    let x = match &train_cache {
                        Some(cache) => {
                            let views: Vec<_> = idx.iter().map(|&i| cache[i].view()).collect();
                            g.input(concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?)
                        }
                        None => {
                            let parts = idx
                                .iter()
                                .map(|&i| self.embedder.forward(&mut g, &train_ex[i].input))
                                .collect::<Result<Vec<_>>>()?;
                            g.concat_rows(&parts)
                        }
                    };
                    let logits = self.head.logits(&mut g, x, &masks)?;
                    let loss = g.cross_entropy(logits, &targets);
                    let value = g.value(loss)[[0, 0]];
                    if !value.is_finite() {
                        return Err(Error::NonFiniteLoss { epoch, batch: batch_no });
                    }
                    loss_sum += value * idx.len() as f64;
                    g.backward(loss)
                };
                if !grads.all_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: batch_no });
                }
                adam.update(&mut self.params, &grads);
                if !self.params.all_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: batch_no });
                }
            }

            let dev_accuracy = if dev_ex.is_empty() {
                None
            } else {
                let fresh;
                let embs: Vec<ArrayView2<f64>> = match &dev_cache {
                    Some(c) => c.iter().map(|a| a.view()).collect(),
                    None => {
                        fresh = self.embed_all(&dev_ex)?;
                        fresh.iter().map(|a| a.view()).collect()
                    }
                };
                Some(accuracy(&self.probs_for(&embs, &dev_masks)?, &dev_targets))
            };
            self.history.push(EpochRecord {
                epoch,
                train_loss: loss_sum / train_ex.len() as f64,
                dev_accuracy,
            });
            let score = dev_accuracy.unwrap_or(f64::NEG_INFINITY);
            if best.as_ref().is_none_or(|(b, _)| score > *b || dev_accuracy.is_none()) {
                let snapshot = trainable.iter().map(|&id| self.params.get(id).clone()).collect();
                best = Some((score, snapshot));
                self.best_epoch = Some(epoch);
            }
        }

        if let Some((_, snapshot)) = best {
            for (&id, value) in trainable.iter().zip(snapshot) {
                self.params.set(id, value)?;
            }
        }
        Ok(())
    }

    /// Classifies text that has already been through the pipeline.
    pub fn predict_processed(&self, text: &str) -> Result<Prediction> {
        Ok(self.predict_processed_batch(&[text])?.remove(0))
    }

    pub fn predict_processed_batch(&self, texts: &[&str]) -> Result<Vec<Prediction>> {
        let inputs: Vec<EmbedInput> = texts.iter().map(|t| self.embedder.prepare(t, self.config.max_len)).collect();
        let embs = inputs
            .iter()
            .map(|i| embed(&self.embedder, &self.params, i))
            .collect::<Result<Vec<_>>>()?;
        let views: Vec<_> = embs.iter().map(|a| a.view()).collect();
        let masks: Vec<Vec<bool>> = inputs.into_iter().map(|i| i.mask).collect();
        let probs = self.probs_for(&views, &masks)?;
        Ok(probs.rows().into_iter().map(|r| Prediction::from_probs(r.to_vec())).collect())
    }

    /// Runs the model's preprocessing pipeline on raw text, then classifies.
    pub fn predict(&self, text: &str) -> Result<Prediction> {
        self.predict_processed(&run_pipeline(self.language, text))
    }

    /// Like [`TrainedModel::predict`], but fails if the caller's pipeline
    /// differs from the one the model was trained with.
    pub fn predict_as(&self, text: &str, language: PipelineLanguage) -> Result<Prediction> {
        if language != self.language {
            return Err(Error::LanguageMismatch {
                model: self.language.to_string(),
                requested: language.to_string(),
            });
        }
        self.predict(text)
    }

    /// Predicted labels for every comment; comments without processed text
    /// go through the model's pipeline first.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<Prediction>> {
        let texts: Vec<String> = data
            .iter()
            .map(|c| match &c.processed_text {
                Some(t) => t.clone(),
                None => run_pipeline(self.language, &c.raw_text),
            })
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        self.predict_processed_batch(&refs)
    }

    /// Softmax-normalized layer weights of every char-BiLSTM component.
    pub fn mix_weights(&self) -> Vec<Vec<f64>> {
        self.embedder
            .char_bilstms()
            .iter()
            .map(|c| c.mix_weights(&self.params))
            .collect()
    }
}

/// Builds a model from `spec` and fine-tunes it on `train`, selecting the
/// epoch by accuracy on `dev`. Comments are used through
/// [`crate::Comment::text`], so pass preprocessed datasets.
pub fn train(
    spec: &EmbedderSpec,
    ctx: &LoadContext,
    language: PipelineLanguage,
    train: &Dataset,
    dev: &Dataset,
    config: &ClassifierConfig,
) -> Result<TrainedModel> {
    let mut model = TrainedModel::init(spec, ctx, language, config)?;
    model.fit(train, dev)?;
    Ok(model)
}
