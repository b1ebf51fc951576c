use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Cnn,
    Mlp,
    Bilstm,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Cnn => "cnn",
            HeadKind::Mlp => "mlp",
            HeadKind::Bilstm => "bilstm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
}

/// Named learning rates of the published recipes.
pub const LEARNING_RATE_PRESETS: &[(&str, f64)] = &[
    ("hot", 1e-4),
    ("combined", 1e-3),
    ("authors", 1e-3),
    ("elmo", 1e-5),
    ("flair", 1e-5),
];

pub fn learning_rate_preset(name: &str) -> Option<f64> {
    LEARNING_RATE_PRESETS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, lr)| lr)
}

/// Accepts either a number or a preset name.
fn deserialize_learning_rate<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Preset(String),
    }
    match Raw::deserialize(d)? {
        Raw::Number(v) => Ok(v),
        Raw::Preset(name) => learning_rate_preset(&name).ok_or_else(|| {
            let known: Vec<&str> = LEARNING_RATE_PRESETS.iter().map(|(n, _)| *n).collect();
            serde::de::Error::custom(format!("unknown learning rate preset `{name}` (known: {})", known.join(", ")))
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub head: HeadKind,
    pub num_classes: usize,
    #[serde(deserialize_with = "deserialize_learning_rate")]
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub seed: u64,
    pub max_len: usize,
    /// (width, count) pairs.
    pub cnn_filters: Vec<(usize, usize)>,
    pub mlp_hidden: Vec<usize>,
    pub bilstm_hidden: usize,
    pub batch_size: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            head: HeadKind::Cnn,
            num_classes: 2,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            epochs: 10,
            seed: 0,
            max_len: 100,
            cnn_filters: vec![(2, 2), (3, 2), (4, 2)],
            mlp_hidden: vec![64],
            bilstm_hidden: 64,
            batch_size: 32,
        }
    }
}

impl ClassifierConfig {
    pub fn with_head(head: HeadKind) -> Self {
        ClassifierConfig {
            head,
            ..ClassifierConfig::default()
        }
    }

    pub fn total_filters(&self) -> usize {
        self.cnn_filters.iter().map(|&(_, c)| c).sum()
    }

    pub fn max_filter_width(&self) -> usize {
        self.cnn_filters.iter().map(|&(w, _)| w).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("classifier: {m}")));
        if self.num_classes != 2 {
            return bad(format!("num_classes must be 2, got {}", self.num_classes));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.max_len == 0 {
            return bad("max_len must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        match self.head {
            HeadKind::Cnn => {
                if self.cnn_filters.is_empty() || self.cnn_filters.iter().any(|&(w, c)| w == 0 || c == 0) {
                    return bad("cnn_filters need positive widths and counts".into());
                }
                if self.max_len < self.max_filter_width() {
                    return bad(format!(
                        "max_len {} is shorter than the widest filter ({})",
                        self.max_len,
                        self.max_filter_width()
                    ));
                }
            }
            HeadKind::Mlp => {
                if self.mlp_hidden.contains(&0) {
                    return bad("mlp_hidden sizes must be positive".into());
                }
            }
            HeadKind::Bilstm => {
                if self.bilstm_hidden == 0 {
                    return bad("bilstm_hidden must be positive".into());
                }
            }
        }
        Ok(())
    }
}
