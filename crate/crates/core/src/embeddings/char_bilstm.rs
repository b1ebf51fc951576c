use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::normal;
use crate::nn::{Graph, Linear, Lstm, ParamId, ParamStore, Var};

/// Character ids are UTF-8 bytes plus three markers.
const BOW: usize = 256;
const EOW: usize = 257;
const PAD_CHAR: usize = 258;
const CHAR_VOCAB: usize = 259;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Both,
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharBilstmConfig {
    pub char_dim: usize,
    /// (width, count) pairs of the character CNN.
    pub filters: Vec<(usize, usize)>,
    /// Per-direction LSTM width; also the projected input width.
    pub hidden: usize,
    pub layers: usize,
    /// Bytes per word including the begin and end markers.
    pub max_word_chars: usize,
    #[serde(default)]
    pub direction: Direction,
}

impl CharBilstmConfig {
    pub fn tiny() -> Self {
        CharBilstmConfig {
            char_dim: 8,
            filters: vec![(1, 8), (2, 8), (3, 16)],
            hidden: 16,
            layers: 2,
            max_word_chars: 20,
            direction: Direction::Both,
        }
    }

    /// The 2 × 512 layout that yields 1024-wide word vectors.
    pub fn elmo() -> Self {
        CharBilstmConfig {
            char_dim: 16,
            filters: vec![(1, 32), (2, 32), (3, 64), (4, 128), (5, 256), (6, 512), (7, 1024)],
            hidden: 512,
            layers: 2,
            max_word_chars: 50,
            direction: Direction::Both,
        }
    }

    pub fn dim(&self) -> usize {
        match self.direction {
            Direction::Both => 2 * self.hidden,
            _ => self.hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::Config(format!("char_bilstm: {m}"));
        if self.hidden == 0 || self.char_dim == 0 {
            return Err(bad("hidden and char_dim must be positive"));
        }
        if self.filters.is_empty() || self.filters.iter().any(|&(w, c)| w == 0 || c == 0) {
            return Err(bad("filters need positive widths and counts"));
        }
        if self.max_word_chars < 3 {
            return Err(bad("max_word_chars must be at least 3"));
        }
        if let Some(&(w, _)) = self.filters.iter().find(|&&(w, _)| w > self.max_word_chars) {
            return Err(bad(&format!("filter width {w} exceeds max_word_chars")));
        }
        Ok(())
    }
}

/// Character CNN, then a projection, then separate forward and backward
/// LSTM stacks. The output is a softmax-weighted mix of the input layer
/// and each LSTM layer.
#[derive(Debug, Clone)]
pub struct CharBilstm {
    pub config: CharBilstmConfig,
    char_embed: ParamId,
    convs: Vec<Linear>,
    projection: Linear,
    forward: Vec<Lstm>,
    backward: Vec<Lstm>,
    mix: ParamId,
}

impl CharBilstm {
    /// Registers parameters under `prefix`, randomly initialized from
    /// `seed`.
    pub fn init(config: CharBilstmConfig, store: &mut ParamStore, prefix: &str, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = |n: &str| format!("{prefix}{n}");
        let char_embed = store.add(p("char_embed.weight"), normal(&mut rng, CHAR_VOCAB, config.char_dim, 1.0));
        let convs = config
            .filters
            .iter()
            .enumerate()
            .map(|(i, &(w, c))| Linear::new(store, &mut rng, &p(&format!("char_cnn.{i}")), w * config.char_dim, c))
            .collect();
        let total: usize = config.filters.iter().map(|&(_, c)| c).sum();
        let projection = Linear::new(store, &mut rng, &p("projection"), total, config.hidden);
        let h = config.hidden;
        let mut forward = Vec::new();
        let mut backward = Vec::new();
        for l in 0..config.layers {
            if config.direction != Direction::Backward {
                forward.push(Lstm::new(store, &mut rng, &p(&format!("forward.{l}")), h, h));
            }
            if config.direction != Direction::Forward {
                backward.push(Lstm::new(store, &mut rng, &p(&format!("backward.{l}")), h, h));
            }
        }
        let mix = store.add(p("scalar_mix.weights"), Array2::zeros((1, config.layers + 1)));
        Ok(CharBilstm {
            config,
            char_embed,
            convs,
            projection,
            forward,
            backward,
            mix,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn mix_param(&self) -> ParamId {
        self.mix
    }

    fn char_ids(&self, word: &str) -> Vec<usize> {
        let m = self.config.max_word_chars;
        let mut ids = Vec::with_capacity(m);
        ids.push(BOW);
        ids.extend(word.bytes().take(m - 2).map(usize::from));
        ids.push(EOW);
        ids.resize(m, PAD_CHAR);
        ids
    }

    /// Input representation and each LSTM layer's output, all `n × dim`.
    pub fn layer_outputs(&self, g: &mut Graph, words: &[String]) -> Result<Vec<Var>> {
        if words.is_empty() {
            return Err(Error::EmptyInput("char_bilstm needs at least one word".into()));
        }
        let n = words.len();
        let m = self.config.max_word_chars;
        let ids: Vec<usize> = words.iter().flat_map(|w| self.char_ids(w)).collect();
        let chars = g.gather(self.char_embed, &ids);
        let mut pooled = Vec::with_capacity(self.convs.len());
        for (conv, &(w, _)) in self.convs.iter().zip(&self.config.filters) {
            let windows = g.unfold(chars, m, w);
            let act = conv.forward(g, windows);
            let act = g.relu(act);
            let per_word = m - w + 1;
            let groups: Vec<Vec<usize>> = (0..n).map(|i| (i * per_word..(i + 1) * per_word).collect()).collect();
            pooled.push(g.segment_max(act, &groups));
        }
        let feats = if pooled.len() == 1 { pooled[0] } else { g.concat_cols(&pooled) };
        let x = self.projection.forward(g, feats);

        let mask = vec![vec![true; n]];
        let mut layers = Vec::with_capacity(self.config.layers + 1);
        layers.push(match self.config.direction {
            Direction::Both => g.concat_cols(&[x, x]),
            _ => x,
        });
        let (mut fin, mut bin) = (x, x);
        for l in 0..self.config.layers {
            let mut parts = Vec::new();
            if let Some(lstm) = self.forward.get(l) {
                let (steps, _) = lstm.run(g, fin, 1, n, &mask, false);
                fin = g.concat_rows(&steps);
                parts.push(fin);
            }
            if let Some(lstm) = self.backward.get(l) {
                let (steps, _) = lstm.run(g, bin, 1, n, &mask, true);
                bin = g.concat_rows(&steps);
                parts.push(bin);
            }
            layers.push(if parts.len() == 1 { parts[0] } else { g.concat_cols(&parts) });
        }
        Ok(layers)
    }

    /// Current layer weights after normalization; they always sum to 1.
    pub fn mix_weights(&self, store: &ParamStore) -> Vec<f64> {
        crate::nn::softmax_rows(store.get(self.mix)).row(0).to_vec()
    }

    pub fn forward(&self, g: &mut Graph, words: &[String]) -> Result<Var> {
        let layers = self.layer_outputs(g, words)?;
        let mix = g.param(self.mix);
        let weights = g.softmax(mix);
        let mut out = g.scale_by(layers[0], weights, 0);
        for (k, &layer) in layers.iter().enumerate().skip(1) {
            let term = g.scale_by(layer, weights, k);
            out = g.add(out, term);
        }
        Ok(out)
    }
}
