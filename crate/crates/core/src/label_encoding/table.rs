use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::vocabulary::LabelVocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    OneHot,
    Loaded,
    Fetched,
    Compacted,
    SyntheticHierarchical,
}

/// One target vector per vocabulary label, in vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingTable {
    vectors: Array2<f64>,
    norms: Vec<f64>,
    kind: EncodingKind,
}

impl EncodingTable {
    /// Validates that the table is non-empty, finite and has no zero rows.
    pub fn new(vectors: Array2<f64>, kind: EncodingKind) -> Result<Self> {
        if vectors.nrows() == 0 {
            return Err(Error::EmptyVocabulary);
        }
        if vectors.ncols() == 0 {
            return Err(Error::DimTooSmall { dim: 0, needed: 1 });
        }
        let mut norms = Vec::with_capacity(vectors.nrows());
        for (i, row) in vectors.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("row {i} of encoding table")));
            }
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector(format!("row {i} of encoding table")));
            }
            norms.push(norm);
        }
        Ok(Self {
            vectors,
            norms,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn row(&self, label_id: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(label_id)
    }

    /// Serializes to the embedding-table file format, one label per line in
    /// vocabulary order.
    pub fn to_json(&self, vocab: &LabelVocabulary) -> Result<String> {
        if vocab.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: vocab.len(),
            });
        }
        let mut out = String::from("{\n");
        for (i, (label, row)) in vocab.labels().iter().zip(self.vectors.rows()).enumerate() {
            let values: Vec<f64> = row.to_vec();
            out.push_str("  ");
            out.push_str(&serde_json::to_string(label)?);
            out.push_str(": ");
            out.push_str(&serde_json::to_string(&values)?);
            if i + 1 < self.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("}\n");
        Ok(out)
    }
}

pub fn one_hot_table(vocab: &LabelVocabulary) -> Result<EncodingTable> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    EncodingTable::new(Array2::eye(vocab.len()), EncodingKind::OneHot)
}

/// Reads an embedding-table file as an ordered list of `(label, vector)`.
pub fn parse_embedding_file(bytes: &[u8]) -> Result<Vec<(String, Vec<f64>)>> {
    let value: Value = serde_json::from_slice(bytes)?;
    let Value::Object(map) = value else {
        return Err(Error::InvalidConfig(
            "embedding table must be a JSON object of label -> vector".into(),
        ));
    };
    map.into_iter()
        .map(|(label, v)| {
            let vector: Vec<f64> = serde_json::from_value(v).map_err(|e| {
                Error::InvalidConfig(format!("vector for {label:?} is not numeric: {e}"))
            })?;
            Ok((label, vector))
        })
        .collect()
}

/// Builds a table whose rows follow `vocab` order. Extra labels in the file
/// are ignored.
pub fn load_embedding_table(bytes: &[u8], vocab: &LabelVocabulary) -> Result<EncodingTable> {
    let entries = parse_embedding_file(bytes)?;
    let lookup: std::collections::HashMap<&str, &Vec<f64>> =
        entries.iter().map(|(l, v)| (l.as_str(), v)).collect();
    rows_in_vocab_order(vocab, |label| lookup.get(label).map(|v| v.as_slice()))
        .and_then(|m| table_with_labels(m, vocab, EncodingKind::Loaded))
}

/// Reads an embedding-table file, taking the vocabulary from the file itself.
pub fn read_embedding_file(bytes: &[u8]) -> Result<(LabelVocabulary, EncodingTable)> {
    let entries = parse_embedding_file(bytes)?;
    let vocab = LabelVocabulary::new(entries.iter().map(|(l, _)| l.clone()).collect())?;
    let matrix = rows_in_vocab_order(&vocab, |label| {
        entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    })?;
    let table = table_with_labels(matrix, &vocab, EncodingKind::Loaded)?;
    Ok((vocab, table))
}

pub(crate) fn rows_in_vocab_order<'a>(
    vocab: &LabelVocabulary,
    lookup: impl Fn(&str) -> Option<&'a [f64]>,
) -> Result<Array2<f64>> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut dim = None;
    let mut data = Vec::new();
    for label in vocab.labels() {
        let v = lookup(label).ok_or_else(|| Error::MissingLabel(label.clone()))?;
        let expected = *dim.get_or_insert(v.len());
        if v.len() != expected {
            return Err(Error::VectorLengthMismatch {
                label: label.clone(),
                expected,
                found: v.len(),
            });
        }
        data.extend_from_slice(v);
    }
    let dim = dim.unwrap_or(0);
    Ok(Array2::from_shape_vec((vocab.len(), dim), data).expect("row lengths checked"))
}

/// Like [`EncodingTable::new`] but names the offending label in errors.
pub(crate) fn table_with_labels(
    matrix: Array2<f64>,
    vocab: &LabelVocabulary,
    kind: EncodingKind,
) -> Result<EncodingTable> {
    for (label, row) in vocab.labels().iter().zip(matrix.rows()) {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector for {label:?}")));
        }
        if row.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector(format!("vector for {label:?}")));
        }
    }
    EncodingTable::new(matrix, kind)
}

/// Matryoshka-style compaction: keep the first `target_dim` components of
/// every row and rescale to unit L2 norm.
pub fn compact(table: &EncodingTable, target_dim: usize) -> Result<EncodingTable> {
    if target_dim == 0 || target_dim > table.dim() {
        return Err(Error::CompactRange {
            target: target_dim,
            dim: table.dim(),
        });
    }
    let mut out = table
        .vectors
        .slice(ndarray::s![.., ..target_dim])
        .to_owned();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector(format!(
                "first {target_dim} components of row {i} are all zero"
            )));
        }
        row.mapv_inplace(|v| v / norm);
    }
    EncodingTable::new(out, EncodingKind::Compacted)
}

/// Synthetic stand-in for language-model label embeddings with a two-level
/// semantic structure.
///
/// Every label vector is `sqrt(c)·g + sqrt(1-c)·u` where `g` is the unit
/// direction of its generic family, `u` a direction unique to the label, and
/// all directions are mutually orthonormal. Siblings therefore have cosine
/// exactly `c` and labels in different families cosine 0.
pub fn synth_hierarchical_table(
    vocab: &LabelVocabulary,
    dim: usize,
    seed: u64,
    within_group_cos: f64,
) -> Result<EncodingTable> {
    let groups = vocab.groups().ok_or_else(|| {
        Error::InvalidGrouping("vocabulary has no generic-family grouping".into())
    })?;
    if !(within_group_cos > 0.0 && within_group_cos < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "within_group_cos must lie in (0, 1), got {within_group_cos}"
        )));
    }
    let n_groups = vocab.group_count();
    let needed = n_groups + vocab.len();
    if dim < needed {
        return Err(Error::DimTooSmall { dim, needed });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = orthonormal_rows(&mut rng, needed, dim);
    let shared = within_group_cos.sqrt();
    let unique = (1.0 - within_group_cos).sqrt();
    let mut vectors = Array2::zeros((vocab.len(), dim));
    for (i, mut row) in vectors.axis_iter_mut(Axis(0)).enumerate() {
        let g = basis.row(groups[i]);
        let u = basis.row(n_groups + i);
        row.assign(&(&g * shared + &u * unique));
    }
    EncodingTable::new(vectors, EncodingKind::SyntheticHierarchical)
}

/// `count` mutually orthonormal random directions in `dim` dimensions
/// (Gram-Schmidt with one re-orthogonalization pass).
pub(crate) fn orthonormal_rows(rng: &mut impl Rng, count: usize, dim: usize) -> Array2<f64> {
    assert!(count <= dim, "cannot fit {count} orthonormal rows in {dim} dims");
    let mut basis = Array2::<f64>::zeros((count, dim));
    for i in 0..count {
        let mut v: ndarray::Array1<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for j in 0..i {
                let b = basis.row(j);
                let proj = v.dot(&b);
                v.scaled_add(-proj, &b);
            }
        }
        let norm = v.dot(&v).sqrt();
        basis.row_mut(i).assign(&(v / norm));
    }
    basis
}

/// Cosine of the angle between two non-zero vectors, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector("cosine similarity operand".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Label whose target vector is most cosine-similar to `prediction`; ties go
/// to the lowest label index.
pub fn decode_nearest(prediction: &[f64], table: &EncodingTable) -> Result<usize> {
    if prediction.len() != table.dim() {
        return Err(Error::DimensionMismatch {
            expected: table.dim(),
            found: prediction.len(),
        });
    }
    let norm_p = prediction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_p == 0.0 {
        return Err(Error::ZeroVector("prediction".into()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, row) in table.vectors.rows().into_iter().enumerate() {
        let dot: f64 = row.iter().zip(prediction).map(|(a, b)| a * b).sum();
        let cos = dot / (norm_p * table.norms[i]);
        if cos > best.1 {
            best = (i, cos);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn vocab(labels: &[&str]) -> LabelVocabulary {
        LabelVocabulary::new(labels.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn one_hot_rows_are_basis_vectors() {
        let v = vocab(&["Wall", "Column", "Slab"]);
        let t = one_hot_table(&v).unwrap();
        assert_eq!(t.row(1).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(t.kind(), EncodingKind::OneHot);
        let c = cosine_similarity(t.row(0).as_slice().unwrap(), t.row(2).as_slice().unwrap());
        assert_eq!(c.unwrap(), 0.0);
    }

    #[test]
    fn one_hot_for_bim_vocabulary_is_42_dim() {
        let t = one_hot_table(&LabelVocabulary::bim_subtypes()).unwrap();
        assert_eq!(t.dim(), 42);
    }

    #[test]
    fn one_hot_rejects_empty_vocabulary() {
        let v = LabelVocabulary::new(vec![]).unwrap();
        assert!(matches!(one_hot_table(&v), Err(Error::EmptyVocabulary)));
    }

    #[test]
    fn load_orders_rows_by_vocabulary() {
        let v = vocab(&["A", "B"]);
        let t = load_embedding_table(br#"{"B":[0,1],"A":[1,0]}"#, &v).unwrap();
        assert_eq!(t.vectors(), &ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(t.kind(), EncodingKind::Loaded);
    }

    #[test]
    fn load_errors() {
        let v = vocab(&["A", "B"]);
        assert!(matches!(
            load_embedding_table(br#"{"A":[1,0]}"#, &v),
            Err(Error::MissingLabel(l)) if l == "B"
        ));
        assert!(matches!(
            load_embedding_table(br#"{"A":[0,0],"B":[0,1]}"#, &v),
            Err(Error::ZeroVector(_))
        ));
        assert!(matches!(
            load_embedding_table(br#"{"A":[1,0,0],"B":[0,1]}"#, &v),
            Err(Error::VectorLengthMismatch { .. })
        ));
        assert!(matches!(
            load_embedding_table(br#"{"A":[1,0],"B":["x",1]}"#, &v),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn compact_truncates_and_renormalizes() {
        let t = EncodingTable::new(ndarray::arr2(&[[3.0, 4.0, 0.0, 0.0]]), EncodingKind::Loaded)
            .unwrap();
        let c = compact(&t, 2).unwrap();
        assert!(close(c.row(0)[0], 0.6, 1e-15));
        assert!(close(c.row(0)[1], 0.8, 1e-15));
        assert_eq!(c.kind(), EncodingKind::Compacted);
    }

    #[test]
    fn compact_range_and_zero_prefix_errors() {
        let t = EncodingTable::new(ndarray::arr2(&[[0.0, 0.0, 1.0]]), EncodingKind::Loaded)
            .unwrap();
        assert!(matches!(compact(&t, 0), Err(Error::CompactRange { .. })));
        assert!(matches!(compact(&t, 4), Err(Error::CompactRange { .. })));
        assert!(matches!(compact(&t, 2), Err(Error::ZeroVector(_))));
    }

    #[test]
    fn compact_4096_to_1024() {
        let v = LabelVocabulary::bim_subtypes();
        let t = synth_hierarchical_table(&v, 4096, 3, 0.8).unwrap();
        let c = compact(&t, 1024).unwrap();
        assert_eq!(c.dim(), 1024);
        assert_eq!(c.len(), 42);
    }

    #[test]
    fn synth_hierarchical_cosines() {
        let v = LabelVocabulary::bim_subtypes();
        let t = synth_hierarchical_table(&v, 256, 11, 0.8).unwrap();
        let groups = v.groups().unwrap();
        for i in 0..v.len() {
            let ri = t.row(i).to_vec();
            assert!(close(ri.iter().map(|x| x * x).sum::<f64>(), 1.0, 1e-12));
            for j in (i + 1)..v.len() {
                let c = cosine_similarity(&ri, t.row(j).as_slice().unwrap()).unwrap();
                if groups[i] == groups[j] {
                    assert!((0.7..=0.9).contains(&c), "siblings {i},{j}: {c}");
                } else {
                    assert!(c.abs() < 0.1, "cross-family {i},{j}: {c}");
                }
            }
        }
    }

    #[test]
    fn synth_hierarchical_is_deterministic_and_checks_dim() {
        let v = LabelVocabulary::bim_subtypes();
        let a = synth_hierarchical_table(&v, 64, 5, 0.8).unwrap();
        let b = synth_hierarchical_table(&v, 64, 5, 0.8).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            synth_hierarchical_table(&v, 47, 5, 0.8),
            Err(Error::DimTooSmall { dim: 47, needed: 48 })
        ));
        let flat = vocab(&["A", "B"]);
        assert!(matches!(
            synth_hierarchical_table(&flat, 64, 5, 0.8),
            Err(Error::InvalidGrouping(_))
        ));
    }

    #[test]
    fn cosine_examples() {
        assert!(close(cosine_similarity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0, 1e-15));
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector(_))
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn decode_examples() {
        let t = EncodingTable::new(ndarray::arr2(&[[1.0, 0.0], [0.6, 0.8]]), EncodingKind::Loaded)
            .unwrap();
        assert_eq!(decode_nearest(&[0.8, 0.6], &t).unwrap(), 1);
        assert_eq!(decode_nearest(&[1.0, 0.0], &t).unwrap(), 0);
        assert_eq!(decode_nearest(&[0.6, 0.8], &t).unwrap(), 1);

        let onehot = one_hot_table(&vocab(&["A", "B"])).unwrap();
        assert_eq!(decode_nearest(&[0.5, 0.5], &onehot).unwrap(), 0);
        assert!(matches!(
            decode_nearest(&[0.0, 0.0], &onehot),
            Err(Error::ZeroVector(_))
        ));
        assert!(matches!(
            decode_nearest(&[1.0], &onehot),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn read_embedding_file_keeps_file_order() {
        let (v, t) = read_embedding_file(br#"{"Z":[1,0],"A":[0,2]}"#).unwrap();
        assert_eq!(v.labels(), &["Z".to_string(), "A".to_string()]);
        assert_eq!(t.row(1).to_vec(), vec![0.0, 2.0]);
    }
}
