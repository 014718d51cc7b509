use ndarray::{s, Array1, Array2, Axis};

use super::loss::{cosine_loss_into, sigmoid_bce_into, softmax_ce_into, LossKind};
use crate::error::{Error, Result};
use crate::graph_data::Dataset;
use crate::sage_model::{mean_aggregate_adjoint, ForwardCache, SageModel};

/// Per-node supervision, aligned with the `node_ids` passed to [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// One target embedding per node (cosine loss).
    Embeddings(Array2<f64>),
    /// One class index per node (softmax or sigmoid losses).
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Embeddings(m) => m.nrows(),
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub d_weight: Array2<f64>,
    pub d_bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    /// Flattened in [`SageModel::parameter`] order.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.d_weight.iter().chain(l.d_bias.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.d_weight.iter().chain(l.d_bias.iter()).all(|v| v.is_finite()))
    }
}

/// Loss gradient with respect to the final-layer output of every node in
/// the graph, plus the mean loss over `node_ids`.
fn output_gradient(
    output: &Array2<f64>,
    node_ids: &[usize],
    targets: &Targets,
    loss_kind: LossKind,
) -> Result<(f64, Array2<f64>)> {
    let batch = node_ids.len() as f64;
    let mut d_out = Array2::zeros(output.raw_dim());
    let mut g = Array1::zeros(output.ncols());
    let mut total = 0.0;
    for (i, &v) in node_ids.iter().enumerate() {
        let row = output.row(v);
        let loss = match (loss_kind, targets) {
            (LossKind::CosineEmbedding, Targets::Embeddings(t)) => {
                cosine_loss_into(row, t.row(i), g.view_mut())
            }
            (LossKind::SoftmaxCrossEntropy, Targets::Classes(c)) => {
                softmax_ce_into(row, c[i], g.view_mut())
            }
            (LossKind::SigmoidBinaryCrossEntropy, Targets::Classes(c)) => {
                sigmoid_bce_into(row, c[i], g.view_mut())
            }
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "targets do not fit loss {loss_kind:?}"
                )))
            }
        };
        total += loss;
        d_out.row_mut(v).scaled_add(1.0 / batch, &g);
    }
    Ok((total / batch, d_out))
}

fn check_inputs(
    model: &SageModel,
    ds: &Dataset,
    node_ids: &[usize],
    targets: &Targets,
    loss_kind: LossKind,
    cache: &ForwardCache,
) -> Result<()> {
    if node_ids.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if !cache.matches(model) || cache.node_count() != ds.len() {
        return Err(Error::CacheMismatch(format!(
            "cache covers {} nodes with dims {:?}; model dims {:?}, dataset {} nodes",
            cache.node_count(),
            cache.dims(),
            model.dims(),
            ds.len()
        )));
    }
    if let Some(&bad) = node_ids.iter().find(|&&id| id >= ds.len()) {
        return Err(Error::UnknownNode(bad));
    }
    if targets.len() != node_ids.len() {
        return Err(Error::LengthMismatch(node_ids.len(), targets.len()));
    }
    match targets {
        Targets::Embeddings(t) => {
            if t.ncols() != model.out_dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.out_dim(),
                    found: t.ncols(),
                });
            }
            if t.rows().into_iter().any(|r| r.dot(&r) == 0.0) {
                return Err(Error::ZeroVector("target embedding".into()));
            }
        }
        Targets::Classes(c) => {
            if let Some(&bad) = c.iter().find(|&&k| k >= model.out_dim()) {
                return Err(Error::InvalidClass {
                    class: bad,
                    classes: model.out_dim(),
                });
            }
        }
    }
    if loss_kind.uses_embeddings() != matches!(targets, Targets::Embeddings(_)) {
        return Err(Error::InvalidConfig(format!(
            "targets do not fit loss {loss_kind:?}"
        )));
    }
    Ok(())
}

/// Mean loss over `node_ids` (repeats counted) and its gradient with respect
/// to every parameter.
pub fn backward(
    model: &SageModel,
    ds: &Dataset,
    node_ids: &[usize],
    targets: &Targets,
    loss_kind: LossKind,
    cache: &ForwardCache,
) -> Result<(f64, Gradients)> {
    check_inputs(model, ds, node_ids, targets, loss_kind, cache)?;
    let (loss, d_out) = output_gradient(cache.output(), node_ids, targets, loss_kind)?;

    let adjacency = ds.adjacency();
    let layers = model.layers();
    let last = layers.len() - 1;
    let mut grads = Vec::with_capacity(layers.len());
    // gradient w.r.t. the post-activation output of the current layer
    let mut d_h = d_out;
    for k in (0..=last).rev() {
        let layer = &layers[k];
        let mut d_z = d_h;
        if k < last {
            d_z.zip_mut_with(&cache.pre_activations[k], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        let in_dim = layer.in_dim();
        let mut d_weight = Array2::zeros(layer.weight.raw_dim());
        d_weight
            .slice_mut(s![.., ..in_dim])
            .assign(&d_z.t().dot(&cache.inputs[k]));
        d_weight
            .slice_mut(s![.., in_dim..])
            .assign(&d_z.t().dot(&cache.aggregated[k]));
        let d_bias = d_z.sum_axis(Axis(0));
        if k > 0 {
            let w_self = layer.weight.slice(s![.., ..in_dim]);
            let w_neigh = layer.weight.slice(s![.., in_dim..]);
            let mut prev = d_z.dot(&w_self);
            prev += &mean_aggregate_adjoint(&d_z.dot(&w_neigh), adjacency);
            d_h = prev;
        } else {
            d_h = Array2::zeros((0, 0));
        }
        grads.push(LayerGradient { d_weight, d_bias });
    }
    grads.reverse();
    Ok((loss, Gradients { layers: grads }))
}

/// Mean loss only, for finite-difference checks and monitoring.
pub fn batch_loss(
    model: &SageModel,
    ds: &Dataset,
    node_ids: &[usize],
    targets: &Targets,
    loss_kind: LossKind,
    cache: &ForwardCache,
) -> Result<f64> {
    check_inputs(model, ds, node_ids, targets, loss_kind, cache)?;
    output_gradient(cache.output(), node_ids, targets, loss_kind).map(|(l, _)| l)
}
