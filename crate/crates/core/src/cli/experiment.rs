use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Execution;
use crate::graph_data::{generate_synthetic, load_dataset, Dataset, SynthConfig};
use crate::label_encoding::{
    compact, fetch_table, load_embedding_table, one_hot_table, synth_hierarchical_table,
    EmbeddingEndpointConfig, EncodingTable, LabelVocabulary,
};
use crate::stats::DEFAULT_ALPHA;
use crate::training::{LossKind, TrainConfig};

pub const TOKEN_ENV: &str = "SEMLABEL_API_TOKEN";

/// Where the target vectors of one encoding come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodingSource {
    OneHot,
    SynthHierarchical {
        dim: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_within_group_cos")]
        within_group_cos: f64,
    },
    /// Embedding-table file, path relative to the config file.
    File { path: PathBuf },
    Fetch {
        endpoint: EmbeddingEndpointConfig,
        #[serde(default = "default_prompt_template")]
        prompt_template: String,
    },
}

pub fn default_within_group_cos() -> f64 {
    0.8
}

pub fn default_prompt_template() -> String {
    "{label}".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: EncodingSource,
    /// Truncate-and-renormalize to this many dimensions after acquisition.
    #[serde(default)]
    pub compact: Option<usize>,
    /// Defaults to softmax cross-entropy for one-hot and cosine embedding
    /// loss for everything else.
    #[serde(default)]
    pub loss_kind: Option<LossKind>,
}

impl EncodingSpec {
    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind.unwrap_or(match self.source {
            EncodingSource::OneHot => LossKind::SoftmaxCrossEntropy,
            _ => LossKind::CosineEmbedding,
        })
    }

    /// Builds the table for `vocab`; relative paths resolve against `base`.
    pub fn build(&self, vocab: &LabelVocabulary, base: &Path) -> Result<EncodingTable> {
        let table = match &self.source {
            EncodingSource::OneHot => one_hot_table(vocab)?,
            EncodingSource::SynthHierarchical {
                dim,
                seed,
                within_group_cos,
            } => synth_hierarchical_table(vocab, *dim, *seed, *within_group_cos)?,
            EncodingSource::File { path } => {
                let bytes = fs::read(base.join(path))?;
                load_embedding_table(&bytes, vocab)?
            }
            EncodingSource::Fetch {
                endpoint,
                prompt_template,
            } => {
                let mut endpoint = endpoint.clone();
                if endpoint.auth_token.is_none() {
                    endpoint.auth_token = std::env::var(TOKEN_ENV).ok();
                }
                fetch_table(&endpoint, vocab, prompt_template)?
            }
        };
        match self.compact {
            Some(d) => compact(&table, d),
            None => Ok(table),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SynthConfig>,
    pub encodings: Vec<EncodingSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub execution: Execution,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl ExperimentConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.is_some() == self.synthetic.is_some() {
            return Err(Error::InvalidConfig(
                "exactly one of `dataset` and `synthetic` must be given".into(),
            ));
        }
        if self.encodings.is_empty() {
            return Err(Error::InvalidConfig("at least one encoding is required".into()));
        }
        let mut names: Vec<&str> = self.encodings.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!("encoding name {:?} repeated", w[0])));
        }
        if let Some(e) = self.encodings.iter().find(|e| file_stem(&e.name).is_empty()) {
            return Err(Error::InvalidConfig(format!(
                "encoding name {:?} has no usable characters",
                e.name
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        self.train.validate()
    }

    pub fn load_dataset(&self, base: &Path) -> Result<Dataset> {
        match (&self.dataset, &self.synthetic) {
            (Some(path), None) => load_dataset(&fs::read(base.join(path))?),
            (None, Some(synth)) => generate_synthetic(synth),
            _ => Err(Error::InvalidConfig(
                "exactly one of `dataset` and `synthetic` must be given".into(),
            )),
        }
    }
}

/// File-name-safe form of an encoding name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect::<String>()
        .trim_matches('.')
        .to_string()
}
