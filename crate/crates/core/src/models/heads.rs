//! Classifier heads over a batch of embedding matrices.
//!
//! A batch is `B` matrices of `L` rows stacked into one `(B·L) × d` node,
//! with one mask per sequence. Every head zeroes or skips masked rows
//! before they can reach the output, so pad values never matter.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ClassifierConfig, HeadKind};
use crate::error::{Error, Result};
use crate::nn::{softmax_rows, Graph, Linear, Lstm, ParamStore, Var};

// Small conv weights keep early max-pooling from locking onto one window;
// a wider output layer lets the few pooled features move the logits.
const CONV_STD: f64 = 0.005;
const OUTPUT_STD: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct CnnHead {
    pub filters: Vec<(usize, usize)>,
    pub convs: Vec<Linear>,
    pub output: Linear,
}

#[derive(Debug, Clone)]
pub struct MlpHead {
    pub hidden: Vec<Linear>,
    pub output: Linear,
}

#[derive(Debug, Clone)]
pub struct BilstmHead {
    pub forward: Lstm,
    pub backward: Lstm,
    pub output: Linear,
}

#[derive(Debug, Clone)]
pub enum Head {
    Cnn(CnnHead),
    Mlp(MlpHead),
    Bilstm(BilstmHead),
}

impl Head {
    /// Registers the head's parameters under `prefix`, seeded from the
    /// config.
    pub fn init(config: &ClassifierConfig, input_dim: usize, store: &mut ParamStore, prefix: &str) -> Result<Head> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("head input dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let p = |n: &str| format!("{prefix}{n}");
        let classes = config.num_classes;
        Ok(match config.head {
            HeadKind::Cnn => {
                let convs = config
                    .cnn_filters
                    .iter()
                    .enumerate()
                    .map(|(i, &(w, c))| Linear::normal(store, &mut rng, &p(&format!("conv.{i}")), w * input_dim, c, CONV_STD))
                    .collect();
                let output = Linear::normal(store, &mut rng, &p("output"), config.total_filters(), classes, OUTPUT_STD);
                Head::Cnn(CnnHead {
                    filters: config.cnn_filters.clone(),
                    convs,
                    output,
                })
            }
            HeadKind::Mlp => {
                let mut hidden = Vec::new();
                let mut width = input_dim;
                for (i, &h) in config.mlp_hidden.iter().enumerate() {
                    hidden.push(Linear::new(store, &mut rng, &p(&format!("hidden.{i}")), width, h));
                    width = h;
                }
                let output = Linear::new(store, &mut rng, &p("output"), width, classes);
                Head::Mlp(MlpHead { hidden, output })
            }
            HeadKind::Bilstm => {
                let h = config.bilstm_hidden;
                Head::Bilstm(BilstmHead {
                    forward: Lstm::new(store, &mut rng, &p("forward"), input_dim, h),
                    backward: Lstm::new(store, &mut rng, &p("backward"), input_dim, h),
                    output: Linear::new(store, &mut rng, &p("output"), 2 * h, classes),
                })
            }
        })
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Cnn(_) => HeadKind::Cnn,
            Head::Mlp(_) => HeadKind::Mlp,
            Head::Bilstm(_) => HeadKind::Bilstm,
        }
    }

    fn input_dim(&self, store: &ParamStore) -> usize {
        match self {
            Head::Cnn(h) => h.convs[0].input_dim(store) / h.filters[0].0,
            Head::Mlp(h) => h.hidden.first().unwrap_or(&h.output).input_dim(store),
            Head::Bilstm(h) => store.get(h.forward.w_ih).nrows(),
        }
    }

    /// Unnormalized class scores, one row per sequence.
    pub fn logits(&self, g: &mut Graph, x: Var, masks: &[Vec<bool>]) -> Result<Var> {
        let batch = masks.len();
        if batch == 0 {
            return Err(Error::EmptyInput("empty batch".into()));
        }
        let len = masks[0].len();
        if masks.iter().any(|m| m.len() != len) {
            return Err(Error::Shape("masks in one batch must share a length".into()));
        }
        let (rows, dim) = g.shape(x);
        let expected = self.input_dim(g.store());
        if rows != batch * len || dim != expected {
            return Err(Error::Shape(format!(
                "head expects {} × {expected}, got {rows} × {dim}",
                batch * len
            )));
        }
        match self {
            Head::Cnn(h) => {
                let widest = h.filters.iter().map(|&(w, _)| w).max().unwrap_or(1);
                if len < widest {
                    return Err(Error::Config(format!(
                        "sequence length {len} is shorter than the widest filter ({widest})"
                    )));
                }
                let flat: Vec<bool> = masks.iter().flatten().copied().collect();
                let xm = g.mask_rows(x, &flat);
                let mut pooled = Vec::with_capacity(h.convs.len());
                for (conv, &(w, _)) in h.convs.iter().zip(&h.filters) {
                    let windows = g.unfold(xm, len, w);
                    let act = conv.forward(g, windows);
                    let act = g.relu(act);
                    let per_seq = len - w + 1;
                    // only windows that start on a real token compete
                    let groups: Vec<Vec<usize>> = masks
                        .iter()
                        .enumerate()
                        .map(|(b, m)| {
                            let starts: Vec<usize> = (0..per_seq).filter(|&s| m[s]).map(|s| b * per_seq + s).collect();
                            if starts.is_empty() {
                                vec![b * per_seq]
                            } else {
                                starts
                            }
                        })
                        .collect();
                    pooled.push(g.segment_max(act, &groups));
                }
                let feats = if pooled.len() == 1 { pooled[0] } else { g.concat_cols(&pooled) };
                Ok(h.output.forward(g, feats))
            }
            Head::Mlp(h) => {
                // an all-pad sequence pools to zeros
                let groups: Vec<Vec<usize>> = masks
                    .iter()
                    .enumerate()
                    .map(|(b, m)| (0..len).filter(|&t| m[t]).map(|t| b * len + t).collect())
                    .collect();
                let mut hcur = g.segment_mean(x, &groups);
                for layer in &h.hidden {
                    let a = layer.forward(g, hcur);
                    hcur = g.relu(a);
                }
                Ok(h.output.forward(g, hcur))
            }
            Head::Bilstm(h) => {
                let (_, fwd) = h.forward.run(g, x, batch, len, masks, false);
                let (_, bwd) = h.backward.run(g, x, batch, len, masks, true);
                let both = g.concat_cols(&[fwd, bwd]);
                Ok(h.output.forward(g, both))
            }
        }
    }

    /// Class probabilities for a batch of `L × d` matrices.
    pub fn probabilities_batch(&self, store: &ParamStore, embs: &[ArrayView2<f64>], masks: &[Vec<bool>]) -> Result<Array2<f64>> {
        if embs.len() != masks.len() {
            return Err(Error::LengthMismatch {
                left: embs.len(),
                right: masks.len(),
            });
        }
        if let Some((e, m)) = embs.iter().zip(masks).find(|(e, m)| e.nrows() != m.len()) {
            return Err(Error::Shape(format!("{} embedding rows but a mask of {}", e.nrows(), m.len())));
        }
        if embs.is_empty() {
            return Ok(Array2::zeros((0, 2)));
        }
        let stacked = concatenate(Axis(0), embs).map_err(|e| Error::Shape(e.to_string()))?;
        let mut g = Graph::inference(store);
        let x = g.input(stacked);
        let logits = self.logits(&mut g, x, masks)?;
        Ok(softmax_rows(g.value(logits)))
    }

    pub fn probabilities(&self, store: &ParamStore, emb: &Array2<f64>, mask: &[bool]) -> Result<Vec<f64>> {
        let p = self.probabilities_batch(store, &[emb.view()], &[mask.to_vec()])?;
        Ok(p.row(0).to_vec())
    }
}
