use ndarray::{ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `1 - cos(e_p, e_t)` against the label's table row.
    CosineEmbedding,
    SoftmaxCrossEntropy,
    /// Independent sigmoid per class with binary cross-entropy, averaged
    /// over classes.
    SigmoidBinaryCrossEntropy,
}

impl LossKind {
    /// Whether targets are table rows rather than class indices.
    pub fn uses_embeddings(self) -> bool {
        matches!(self, LossKind::CosineEmbedding)
    }
}

fn check_pair(e_p: &[f64], e_t: &[f64]) -> Result<(f64, f64)> {
    if e_p.len() != e_t.len() {
        return Err(Error::DimensionMismatch {
            expected: e_t.len(),
            found: e_p.len(),
        });
    }
    let nt = e_t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nt == 0.0 {
        return Err(Error::ZeroVector("target embedding".into()));
    }
    let np = e_p.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((np, nt))
}

/// `L = 1 - e_p·e_t / (|e_p| |e_t|)`. A zero prediction has loss 1.
pub fn cosine_embedding_loss(e_p: &[f64], e_t: &[f64]) -> Result<f64> {
    check_pair(e_p, e_t)?;
    let mut g = vec![0.0; e_p.len()];
    Ok(cosine_loss_into(
        ArrayView1::from(e_p),
        ArrayView1::from(e_t),
        ArrayViewMut1::from(g.as_mut_slice()),
    ))
}

/// `dL/de_p`; the zero vector when `e_p` is zero.
pub fn cosine_loss_grad(e_p: &[f64], e_t: &[f64]) -> Result<Vec<f64>> {
    check_pair(e_p, e_t)?;
    let mut g = vec![0.0; e_p.len()];
    cosine_loss_into(
        ArrayView1::from(e_p),
        ArrayView1::from(e_t),
        ArrayViewMut1::from(g.as_mut_slice()),
    );
    Ok(g)
}

/// Writes the gradient into `grad` and returns the loss. `e_t` must be
/// nonzero.
pub(crate) fn cosine_loss_into(
    e_p: ArrayView1<f64>,
    e_t: ArrayView1<f64>,
    mut grad: ArrayViewMut1<f64>,
) -> f64 {
    let np = e_p.dot(&e_p).sqrt();
    let nt = e_t.dot(&e_t).sqrt();
    if np == 0.0 {
        grad.fill(0.0);
        return 1.0;
    }
    let dot = e_p.dot(&e_t);
    let cos = (dot / (np * nt)).clamp(-1.0, 1.0);
    let a = 1.0 / (np * nt);
    let b = dot / (np * np * np * nt);
    for ((g, &p), &t) in grad.iter_mut().zip(e_p).zip(e_t) {
        *g = -(a * t - b * p);
    }
    1.0 - cos
}

fn check_logits(logits: &[f64], class: usize) -> Result<()> {
    if class >= logits.len() {
        return Err(Error::InvalidClass {
            class,
            classes: logits.len(),
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    Ok(())
}

/// `-log softmax(logits)[class]` and its gradient `softmax - one_hot`.
pub fn softmax_cross_entropy(logits: &[f64], class: usize) -> Result<(f64, Vec<f64>)> {
    check_logits(logits, class)?;
    let mut g = vec![0.0; logits.len()];
    let loss = softmax_ce_into(
        ArrayView1::from(logits),
        class,
        ArrayViewMut1::from(g.as_mut_slice()),
    );
    Ok((loss, g))
}

pub(crate) fn softmax_ce_into(
    logits: ArrayView1<f64>,
    class: usize,
    mut grad: ArrayViewMut1<f64>,
) -> f64 {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lc = logits[class];
    // shift by the true logit so that the small-loss regime keeps precision
    let shift = if lc == m { lc } else { m };
    let mut others = 0.0;
    for (j, (g, &l)) in grad.iter_mut().zip(logits).enumerate() {
        *g = (l - shift).exp();
        if j != class {
            others += *g;
        }
    }
    let total = grad[class] + others;
    grad.mapv_inplace(|e| e / total);
    grad[class] = -others / total;
    if lc == m {
        others.ln_1p()
    } else {
        total.ln() - (lc - m)
    }
}

/// Mean over classes of `BCE(sigmoid(logit_j), [j == class])`.
pub fn sigmoid_binary_cross_entropy(logits: &[f64], class: usize) -> Result<(f64, Vec<f64>)> {
    check_logits(logits, class)?;
    let mut g = vec![0.0; logits.len()];
    let loss = sigmoid_bce_into(
        ArrayView1::from(logits),
        class,
        ArrayViewMut1::from(g.as_mut_slice()),
    );
    Ok((loss, g))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn sigmoid_bce_into(
    logits: ArrayView1<f64>,
    class: usize,
    mut grad: ArrayViewMut1<f64>,
) -> f64 {
    let k = logits.len() as f64;
    let mut loss = 0.0;
    for (j, (g, &l)) in grad.iter_mut().zip(logits).enumerate() {
        if j == class {
            loss += softplus(-l);
            *g = (sigmoid(l) - 1.0) / k;
        } else {
            loss += softplus(l);
            *g = sigmoid(l) / k;
        }
    }
    loss / k
}
