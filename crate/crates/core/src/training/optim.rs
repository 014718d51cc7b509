use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::backward::Gradients;
use crate::error::{Error, Result};
use crate::sage_model::SageModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Sgd,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    weight: Array2<f64>,
    bias: Array1<f64>,
}

/// Optimizer state for one model.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: i32,
    first: Vec<Moments>,
    second: Vec<Moments>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, model: &SageModel) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = kind {
            let ok = (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0;
            if !ok {
                return Err(Error::InvalidConfig(format!(
                    "bad Adam parameters: beta1 {beta1}, beta2 {beta2}, eps {eps}"
                )));
            }
        }
        let zeros = || {
            model
                .layers()
                .iter()
                .map(|l| Moments {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect::<Vec<_>>()
        };
        Ok(Self {
            kind,
            learning_rate,
            step: 0,
            first: zeros(),
            second: zeros(),
        })
    }

    pub fn step(&mut self, model: &mut SageModel, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != model.layers().len()
            || grads
                .layers
                .iter()
                .zip(model.layers())
                .any(|(g, l)| g.d_weight.dim() != l.weight.dim() || g.d_bias.len() != l.bias.len())
        {
            return Err(Error::ShapeMismatch("gradients do not match model".into()));
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, g) in model.layers_mut().iter_mut().zip(&grads.layers) {
                    layer.weight.scaled_add(-lr, &g.d_weight);
                    layer.bias.scaled_add(-lr, &g.d_bias);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                };
                let layers = model.layers_mut().iter_mut();
                for (((layer, g), m), v) in layers
                    .zip(&grads.layers)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    Zip::from(&mut layer.weight)
                        .and(&mut m.weight)
                        .and(&mut v.weight)
                        .and(&g.d_weight)
                        .for_each(update);
                    Zip::from(&mut layer.bias)
                        .and(&mut m.bias)
                        .and(&mut v.bias)
                        .and(&g.d_bias)
                        .for_each(update);
                }
            }
        }
        Ok(())
    }
}
