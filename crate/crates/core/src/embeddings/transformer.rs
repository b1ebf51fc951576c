use std::path::PathBuf;
use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::normal;
use crate::nn::{Graph, Linear, ParamId, ParamStore, Var};
use crate::tokenizer::{encode, TokenSequence, Vocabulary};

/// Additive bias that drives attention to padded keys to exactly zero.
const MASKED_SCORE: f64 = -1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    /// Vocabulary file. Pretrained models use `vocab.txt` in their weight
    /// directory when this is unset.
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub intermediate: usize,
    pub max_positions: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    #[serde(default = "default_ln_eps")]
    pub layer_norm_eps: f64,
    /// Without position and segment embeddings and with zero layers the
    /// model reduces to a static word-embedding table.
    #[serde(default = "default_true")]
    pub position_embeddings: bool,
}

fn default_type_vocab() -> usize {
    2
}

fn default_ln_eps() -> f64 {
    1e-12
}

fn default_true() -> bool {
    true
}

impl TransformerConfig {
    /// Two layers of width 32, enough for tests without downloads.
    pub fn tiny(vocab: impl Into<PathBuf>) -> Self {
        TransformerConfig {
            vocab: Some(vocab.into()),
            hidden: 32,
            layers: 2,
            heads: 2,
            intermediate: 64,
            max_positions: 128,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
            position_embeddings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::Config(format!("transformer: {m}"));
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(bad("hidden must be a positive multiple of heads"));
        }
        if self.max_positions == 0 {
            return Err(bad("max_positions must be positive"));
        }
        if self.layers > 0 && self.intermediate == 0 {
            return Err(bad("intermediate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerNormParams {
    gamma: ParamId,
    beta: ParamId,
}

impl LayerNormParams {
    fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        LayerNormParams {
            gamma: store.add(format!("{name}.weight"), Array2::ones((1, dim))),
            beta: store.add(format!("{name}.bias"), Array2::zeros((1, dim))),
        }
    }

    fn forward(&self, g: &mut Graph, x: Var, eps: f64) -> Var {
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        g.layer_norm(x, gamma, beta, eps)
    }
}

#[derive(Debug, Clone, Copy)]
struct EncoderLayer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNormParams,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNormParams,
}

/// BERT-style encoder with post-layer-norm blocks. Weight matrices are
/// stored input-major (`x · W`); tensor names follow the usual BERT
/// checkpoint naming.
#[derive(Debug, Clone)]
pub struct Transformer {
    pub config: TransformerConfig,
    pub vocab: Arc<Vocabulary>,
    word: ParamId,
    position: Option<ParamId>,
    token_type: Option<ParamId>,
    embed_norm: LayerNormParams,
    layers: Vec<EncoderLayer>,
}

impl Transformer {
    /// Registers freshly initialized parameters under `prefix`.
    pub fn init(config: TransformerConfig, vocab: Arc<Vocabulary>, store: &mut ParamStore, prefix: &str, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden;
        let p = |n: &str| format!("{prefix}{n}");
        let word = store.add(p("embeddings.word_embeddings.weight"), normal(&mut rng, vocab.len(), h, 0.02));
        let (position, token_type) = if config.position_embeddings {
            (
                Some(store.add(
                    p("embeddings.position_embeddings.weight"),
                    normal(&mut rng, config.max_positions, h, 0.02),
                )),
                Some(store.add(
                    p("embeddings.token_type_embeddings.weight"),
                    normal(&mut rng, config.type_vocab_size, h, 0.02),
                )),
            )
        } else {
            (None, None)
        };
        let embed_norm = LayerNormParams::new(store, &p("embeddings.LayerNorm"), h);
        let mut dense = |store: &mut ParamStore, name: String, i: usize, o: usize| Linear {
            weight: store.add(format!("{name}.weight"), normal(&mut rng, i, o, 0.02)),
            bias: store.add(format!("{name}.bias"), Array2::zeros((1, o))),
        };
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let base = p(&format!("encoder.layer.{l}."));
            let query = dense(store, format!("{base}attention.self.query"), h, h);
            let key = dense(store, format!("{base}attention.self.key"), h, h);
            let value = dense(store, format!("{base}attention.self.value"), h, h);
            let attn_out = dense(store, format!("{base}attention.output.dense"), h, h);
            let attn_norm = LayerNormParams::new(store, &format!("{base}attention.output.LayerNorm"), h);
            let intermediate = dense(store, format!("{base}intermediate.dense"), h, config.intermediate);
            let output = dense(store, format!("{base}output.dense"), config.intermediate, h);
            let out_norm = LayerNormParams::new(store, &format!("{base}output.LayerNorm"), h);
            layers.push(EncoderLayer {
                query,
                key,
                value,
                attn_out,
                attn_norm,
                intermediate,
                output,
                out_norm,
            });
        }
        Ok(Transformer {
            config,
            vocab,
            word,
            position,
            token_type,
            embed_norm,
            layers,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.hidden
    }

    pub fn word_table(&self) -> ParamId {
        self.word
    }

    pub fn check_length(&self, len: usize) -> Result<()> {
        if self.position.is_some() && len > self.config.max_positions {
            return Err(Error::SequenceTooLong {
                len,
                capacity: self.config.max_positions,
            });
        }
        Ok(())
    }

    /// One vector per position of `seq`, including specials and pads.
    pub fn forward(&self, g: &mut Graph, seq: &TokenSequence) -> Result<Var> {
        let len = seq.ids.len();
        self.check_length(len)?;
        if let Some(bad) = seq.ids.iter().find(|&&id| id as usize >= self.vocab.len()) {
            return Err(Error::Shape(format!(
                "token id {bad} outside vocabulary of {}",
                self.vocab.len()
            )));
        }
        let eps = self.config.layer_norm_eps;
        let ids: Vec<usize> = seq.ids.iter().map(|&i| i as usize).collect();
        let mut x = g.gather(self.word, &ids);
        if let (Some(pos), Some(tt)) = (self.position, self.token_type) {
            let positions: Vec<usize> = (0..len).collect();
            let p = g.gather(pos, &positions);
            let t = g.gather(tt, &vec![0; len]);
            x = g.add(x, p);
            x = g.add(x, t);
        }
        x = self.embed_norm.forward(g, x, eps);

        let mut key_bias = Array2::zeros((1, len));
        for (j, &m) in seq.mask.iter().enumerate() {
            if m == 0 {
                key_bias[[0, j]] = MASKED_SCORE;
            }
        }
        let key_bias = g.input(key_bias);
        let heads = self.config.heads;
        let dh = self.config.hidden / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        for layer in &self.layers {
            let q = layer.query.forward(g, x);
            let k = layer.key.forward(g, x);
            let v = layer.value.forward(g, x);
            let mut ctx = Vec::with_capacity(heads);
            for hd in 0..heads {
                let (a, b) = (hd * dh, (hd + 1) * dh);
                let qh = g.slice_cols(q, a, b);
                let kh = g.slice_cols(k, a, b);
                let vh = g.slice_cols(v, a, b);
                let scores = g.matmul_t(qh, kh);
                let scores = g.scale(scores, scale);
                let scores = g.add_row(scores, key_bias);
                let attn = g.softmax(scores);
                ctx.push(g.matmul(attn, vh));
            }
            let ctx = if heads == 1 { ctx[0] } else { g.concat_cols(&ctx) };
            let attn = layer.attn_out.forward(g, ctx);
            let res = g.add(attn, x);
            let x1 = layer.attn_norm.forward(g, res, eps);
            let inter = layer.intermediate.forward(g, x1);
            let inter = g.gelu(inter);
            let out = layer.output.forward(g, inter);
            let res = g.add(out, x1);
            x = layer.out_norm.forward(g, res, eps);
        }
        Ok(x)
    }

    /// Word-level vectors from the first sub-token of each word. Words
    /// beyond the positional capacity get zero vectors.
    pub fn forward_words(&self, g: &mut Graph, words: &[String]) -> Result<Var> {
        let capacity = if self.position.is_some() {
            self.config.max_positions
        } else {
            // no positional limit, but every word needs at least one piece
            words.len() * 64 + 2
        };
        let text = words.join(" ");
        let seq = encode(&text, &self.vocab, capacity.max(3));
        let starts = seq.word_starts();
        let dim = self.dim();
        let states = self.forward(g, &seq)?;
        let mut parts = Vec::new();
        if !starts.is_empty() {
            parts.push(g.select_rows(states, &starts));
        }
        if starts.len() < words.len() {
            parts.push(g.input(Array2::zeros((words.len() - starts.len(), dim))));
        }
        Ok(match parts.len() {
            1 => parts[0],
            _ => g.concat_rows(&parts),
        })
    }
}
