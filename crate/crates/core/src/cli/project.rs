//! Two-dimensional PCA of an embedding table.
//!
//! Scores come from the eigendecomposition of the Gram matrix of the
//! mean-centred rows, which is `labels × labels` however wide the table is.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::label_encoding::{EncodingTable, LabelVocabulary};

/// `(x, y)` per table row on the first two principal components. Each
/// component's sign is fixed so that its largest-magnitude score is
/// positive.
pub fn project_2d(table: &EncodingTable) -> Result<Vec<(f64, f64)>> {
    let n = table.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("projection needs 2 or more rows, got {n}")));
    }
    let v = table.vectors();
    let mean = v.mean_axis(ndarray::Axis(0)).expect("non-empty table");
    let centred = v - &mean;
    let gram = centred.dot(&centred.t());
    let spread: f64 = gram.diag().sum();
    let energy: f64 = v.iter().map(|x| x * x).sum();
    if spread <= 1e-20 * energy {
        return Err(Error::Degenerate("all table rows are identical".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| gram[[i, j]]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let component = |k: usize| -> Vec<f64> {
        let Some(&idx) = order.get(k) else {
            return vec![0.0; n];
        };
        let lambda = eig.eigenvalues[idx].max(0.0);
        let u = eig.eigenvectors.column(idx);
        let mut scores: Vec<f64> = u.iter().map(|x| x * lambda.sqrt()).collect();
        let pivot = scores
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, s)| if s.abs() > best.1.abs() + 1e-12 { (i, s) } else { best });
        if pivot.1 < 0.0 {
            scores.iter_mut().for_each(|s| *s = -*s);
        }
        scores
    };
    let xs = component(0);
    let ys = component(1);
    Ok(xs.into_iter().zip(ys).collect())
}

/// `label,x,y` rows in vocabulary order.
pub fn write_projection_csv<W: Write>(
    vocab: &LabelVocabulary,
    points: &[(f64, f64)],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "x", "y"])?;
    for (label, (x, y)) in vocab.labels().iter().zip(points) {
        w.write_record([label.clone(), x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
