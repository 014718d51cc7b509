//! Losses, backpropagation through the SAGE stack, optimizers and the
//! full-batch training loop.

mod backward;
mod loss;
mod optim;

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_data::Dataset;
use crate::label_encoding::{decode_nearest, EncodingTable};
use crate::sage_model::{forward, forward_graph, init_model, SageModel, DEFAULT_HIDDEN_DIM};

pub use backward::{backward, batch_loss, Gradients, LayerGradient, Targets};
pub use loss::{
    cosine_embedding_loss, cosine_loss_grad, sigmoid_binary_cross_entropy, softmax_cross_entropy,
    LossKind,
};
pub use optim::{Optimizer, OptimizerKind};

/// Minimum loss decrease that resets the early-stopping counter.
pub const EARLY_STOP_MIN_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub early_stop_patience: Option<usize>,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::CosineEmbedding,
            epochs: 300,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            seed: 0,
            early_stop_patience: None,
            hidden_dim: DEFAULT_HIDDEN_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden_dim must be positive".into()));
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::InvalidConfig(
                "early_stop_patience must be positive when set".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: SageModel,
    pub loss_kind: LossKind,
}

impl TrainedModel {
    /// Predicted label ids for `node_ids`: nearest table row for cosine
    /// training, highest logit otherwise. A zero output vector decodes to
    /// label 0 (every cosine ties at zero).
    pub fn predict(
        &self,
        ds: &Dataset,
        node_ids: &[usize],
        table: &EncodingTable,
    ) -> Result<Vec<usize>> {
        let (out, _) = forward(&self.model, ds, node_ids)?;
        predict_rows(&out, self.loss_kind, table)
    }
}

/// Decodes each row of `out` to a label id.
pub fn predict_rows(
    out: &Array2<f64>,
    loss_kind: LossKind,
    table: &EncodingTable,
) -> Result<Vec<usize>> {
    if loss_kind.uses_embeddings() {
        out.rows()
            .into_iter()
            .map(|row| {
                let row = row.to_vec();
                if row.iter().all(|&v| v == 0.0) {
                    Ok(0)
                } else {
                    decode_nearest(&row, table)
                }
            })
            .collect()
    } else {
        if out.ncols() != table.len() {
            return Err(Error::DimensionMismatch {
                expected: table.len(),
                found: out.ncols(),
            });
        }
        Ok(out
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }
}

/// Supervision for `node_ids` under `loss_kind`.
pub fn targets_for(
    ds: &Dataset,
    node_ids: &[usize],
    table: &EncodingTable,
    loss_kind: LossKind,
) -> Targets {
    if loss_kind.uses_embeddings() {
        let mut t = Array2::zeros((node_ids.len(), table.dim()));
        for (mut row, &v) in t.rows_mut().into_iter().zip(node_ids) {
            row.assign(&table.row(ds.label_of(v)));
        }
        Targets::Embeddings(t)
    } else {
        Targets::Classes(node_ids.iter().map(|&v| ds.label_of(v)).collect())
    }
}

/// Full-batch training on `train_ids`. Returns the model and the mean loss
/// of every completed epoch (measured before that epoch's update).
pub fn train(
    ds: &Dataset,
    train_ids: &[usize],
    table: &EncodingTable,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, Vec<f64>)> {
    cfg.validate()?;
    if train_ids.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if let Some(&bad) = train_ids.iter().find(|&&v| v >= ds.len()) {
        return Err(Error::UnknownNode(bad));
    }
    if table.len() != ds.vocabulary().len() {
        return Err(Error::DimensionMismatch {
            expected: ds.vocabulary().len(),
            found: table.len(),
        });
    }
    let out_dim = if cfg.loss_kind.uses_embeddings() {
        table.dim()
    } else {
        table.len()
    };
    let mut model = init_model(ds.feature_dim(), cfg.hidden_dim, out_dim, cfg.seed)?;
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, &model)?;
    let targets = targets_for(ds, train_ids, table, cfg.loss_kind);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let cache = match forward_graph(&model, ds.feature_matrix(), ds.adjacency()) {
            Err(Error::NonFinite(_)) => {
                return Err(Error::Divergence {
                    epoch,
                    loss: f64::NAN,
                })
            }
            other => other?,
        };
        let (loss, grads) = backward(&model, ds, train_ids, &targets, cfg.loss_kind, &cache)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        history.push(loss);
        log::debug!("epoch {epoch}: loss {loss:.6}");
        if let Some(patience) = cfg.early_stop_patience {
            if loss < best - EARLY_STOP_MIN_DELTA {
                best = loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    log::info!("early stop at epoch {epoch}");
                    break;
                }
            }
        }
        optimizer.step(&mut model, &grads)?;
    }
    Ok((
        TrainedModel {
            model,
            loss_kind: cfg.loss_kind,
        },
        history,
    ))
}

/// Writes `epoch,mean_loss` rows, epochs counted from 1.
pub fn write_history_csv<W: Write>(history: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "mean_loss"])?;
    for (i, loss) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
