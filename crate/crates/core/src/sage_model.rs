//! GraphSAGE with mean aggregation, evaluated over the full graph.
//!
//! Layer `k` computes `h_v = act(W · [h_v ; mean_{u∈N(v)} h_u] + b)` with
//! `W` of shape `out × 2·in`. Hidden layers use ReLU and the last layer is
//! linear. An isolated node aggregates to the zero vector.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_data::Dataset;

pub const DEFAULT_HIDDEN_DIM: usize = 1024;
pub const LAYER_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl SageLayer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weight.ncols() == 0 || !weight.ncols().is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!(
                "weight has {} columns; expected 2 x input dim",
                weight.ncols()
            )));
        }
        if weight.nrows() != bias.len() {
            return Err(Error::ShapeMismatch(format!(
                "weight has {} rows but bias has {} entries",
                weight.nrows(),
                bias.len()
            )));
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols() / 2
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn self_weight(&self) -> ArrayView2<'_, f64> {
        self.weight.slice(s![.., ..self.in_dim()])
    }

    fn neighbor_weight(&self) -> ArrayView2<'_, f64> {
        self.weight.slice(s![.., self.in_dim()..])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SageModel {
    layers: Vec<SageLayer>,
    seed: u64,
}

impl SageModel {
    /// Any non-empty stack of layers whose dimensions chain.
    pub fn from_layers(layers: Vec<SageLayer>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("model has no layers".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    k,
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, seed })
    }

    pub fn layers(&self) -> &[SageLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [SageLayer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// `[in, out_1, ..., out_L]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(SageLayer::out_dim))
            .collect()
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    fn locate(&self, mut i: usize) -> (usize, Option<(usize, usize)>, usize) {
        for (k, l) in self.layers.iter().enumerate() {
            if i < l.weight.len() {
                return (k, Some((i / l.weight.ncols(), i % l.weight.ncols())), 0);
            }
            i -= l.weight.len();
            if i < l.bias.len() {
                return (k, None, i);
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter `i` in layer order, each layer's weights row-major followed
    /// by its bias. Panics when `i >= parameter_count()`.
    pub fn parameter(&self, i: usize) -> f64 {
        match self.locate(i) {
            (k, Some(rc), _) => self.layers[k].weight[rc],
            (k, None, j) => self.layers[k].bias[j],
        }
    }

    pub fn set_parameter(&mut self, i: usize, value: f64) {
        match self.locate(i) {
            (k, Some(rc), _) => self.layers[k].weight[rc] = value,
            (k, None, j) => self.layers[k].bias[j] = value,
        }
    }

    pub fn to_checkpoint_json(&self) -> Result<String> {
        let file = Checkpoint {
            dims: self.dims(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            seed: self.seed,
        };
        let mut s = serde_json::to_string(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_checkpoint_json(bytes: &[u8]) -> Result<Self> {
        let file: Checkpoint = serde_json::from_slice(bytes)?;
        if file.dims.len() != file.layers.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} dims for {} layers",
                file.dims.len(),
                file.layers.len()
            )));
        }
        let layers = file
            .layers
            .into_iter()
            .enumerate()
            .map(|(k, rec)| {
                let (rows, cols) = (file.dims[k + 1], 2 * file.dims[k]);
                if rec.weight.len() != rows || rec.weight.iter().any(|r| r.len() != cols) {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {k} weight is not {rows} x {cols}"
                    )));
                }
                let flat: Vec<f64> = rec.weight.into_iter().flatten().collect();
                let weight = Array2::from_shape_vec((rows, cols), flat).expect("shape checked");
                SageLayer::new(weight, Array1::from(rec.bias))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers, file.seed)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    dims: Vec<usize>,
    layers: Vec<LayerRecord>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    #[serde(rename = "W")]
    weight: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    bias: Vec<f64>,
}

/// Three layers `in → hidden → hidden → out`, Glorot-uniform weights and
/// zero biases, deterministic in `seed`.
pub fn init_model(in_dim: usize, hidden_dim: usize, out_dim: usize, seed: u64) -> Result<SageModel> {
    if in_dim == 0 || hidden_dim == 0 || out_dim == 0 {
        return Err(Error::InvalidConfig(format!(
            "model dimensions must be positive: in {in_dim}, hidden {hidden_dim}, out {out_dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [in_dim, hidden_dim, hidden_dim, out_dim];
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (2 * w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(&mut rng));
            SageLayer::new(weight, Array1::zeros(fan_out))
        })
        .collect::<Result<Vec<_>>>()?;
    SageModel::from_layers(layers, seed)
}

/// Intermediate activations of one full-graph forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to layer `k` (`inputs[0]` are the raw features).
    pub(crate) inputs: Vec<Array2<f64>>,
    /// Neighbor means of `inputs[k]`.
    pub(crate) aggregated: Vec<Array2<f64>>,
    pub(crate) pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Final-layer output for every node in the graph.
    pub fn output(&self) -> &Array2<f64> {
        self.pre_activations.last().expect("at least one layer")
    }

    pub fn node_count(&self) -> usize {
        self.inputs[0].nrows()
    }

    /// Post-activation representation after layer `k` (0-based).
    pub fn layer_output(&self, k: usize) -> Array2<f64> {
        if k + 1 == self.pre_activations.len() {
            self.pre_activations[k].clone()
        } else {
            self.inputs[k + 1].clone()
        }
    }

    /// `[in, out_1, ..., out_L]` as seen by this cache.
    pub fn dims(&self) -> Vec<usize> {
        self.inputs
            .iter()
            .map(|h| h.ncols())
            .chain(std::iter::once(self.output().ncols()))
            .collect()
    }

    /// True when every hidden unit has the same ReLU state in both passes.
    pub fn same_activation_pattern(&self, other: &ForwardCache) -> bool {
        let hidden = self.pre_activations.len().saturating_sub(1);
        self.pre_activations.len() == other.pre_activations.len()
            && self.pre_activations[..hidden]
                .iter()
                .zip(&other.pre_activations[..hidden])
                .all(|(a, b)| a.shape() == b.shape() && a.iter().zip(b).all(|(x, y)| (*x > 0.0) == (*y > 0.0)))
    }

    pub(crate) fn matches(&self, model: &SageModel) -> bool {
        self.inputs.len() == model.layers.len()
            && self
                .inputs
                .iter()
                .zip(&model.layers)
                .all(|(h, l)| h.ncols() == l.in_dim())
            && self.output().ncols() == model.out_dim()
    }
}

/// Mean of neighbor rows for every node; zero for isolated nodes.
pub(crate) fn mean_aggregate(h: &Array2<f64>, adjacency: &[Vec<usize>]) -> Array2<f64> {
    let mut out = Array2::zeros(h.raw_dim());
    for (v, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let nbrs = &adjacency[v];
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        for &u in nbrs {
            row.scaled_add(w, &h.row(u));
        }
    }
    out
}

/// Adjoint of [`mean_aggregate`]: routes each node's gradient back to its
/// neighbors.
pub(crate) fn mean_aggregate_adjoint(grad: &Array2<f64>, adjacency: &[Vec<usize>]) -> Array2<f64> {
    let mut out = Array2::zeros(grad.raw_dim());
    for (v, nbrs) in adjacency.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let g = grad.row(v);
        for &u in nbrs {
            out.row_mut(u).scaled_add(w, &g);
        }
    }
    out
}

/// Runs every layer over the whole graph described by `features` and
/// `adjacency`.
pub fn forward_graph(
    model: &SageModel,
    features: &Array2<f64>,
    adjacency: &[Vec<usize>],
) -> Result<ForwardCache> {
    if features.ncols() != model.in_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.in_dim(),
            found: features.ncols(),
        });
    }
    if adjacency.len() != features.nrows() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            found: adjacency.len(),
        });
    }
    let last = model.layers.len() - 1;
    let mut inputs = Vec::with_capacity(model.layers.len());
    let mut aggregated = Vec::with_capacity(model.layers.len());
    let mut pre_activations = Vec::with_capacity(model.layers.len());
    let mut h = features.clone();
    for (k, layer) in model.layers.iter().enumerate() {
        let m = mean_aggregate(&h, adjacency);
        let mut z = h.dot(&layer.self_weight().t());
        z += &m.dot(&layer.neighbor_weight().t());
        z += &layer.bias;
        let next = (k < last).then(|| z.mapv(|v| v.max(0.0)));
        inputs.push(h);
        aggregated.push(m);
        pre_activations.push(z);
        if let Some(next) = next {
            h = next;
        } else {
            break;
        }
    }
    let cache = ForwardCache {
        inputs,
        aggregated,
        pre_activations,
    };
    if cache.output().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward output".into()));
    }
    Ok(cache)
}

/// Full-graph forward pass; returns the output rows for `node_ids` (in that
/// order) together with the cache needed for backpropagation.
pub fn forward(
    model: &SageModel,
    ds: &Dataset,
    node_ids: &[usize],
) -> Result<(Array2<f64>, ForwardCache)> {
    if let Some(&bad) = node_ids.iter().find(|&&id| id >= ds.len()) {
        return Err(Error::UnknownNode(bad));
    }
    let cache = forward_graph(model, ds.feature_matrix(), ds.adjacency())?;
    let rows = cache.output().select(Axis(0), node_ids);
    Ok((rows, cache))
}
