//! Confusion matrices, F1 metrics and the leave-one-project-out driver.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_data::{make_folds, Dataset, FoldSpec};
use crate::label_encoding::{EncodingKind, EncodingTable};
use crate::training::{train, LossKind, TrainConfig, TrainedModel};

/// Rows are true labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_pairs(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch(truth.len(), predicted.len()));
        }
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.add(t, p)?;
        }
        Ok(m)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let classes = self.classes();
        for c in [truth, predicted] {
            if c >= classes {
                return Err(Error::InvalidClass { class: c, classes });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    /// Element-wise sum; both matrices must have the same size.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes() != self.classes() {
            return Err(Error::DimensionMismatch {
                expected: self.classes(),
                found: other.classes(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label_id: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    pub weighted_f1: f64,
    /// Unweighted mean F1 over classes that occur in the truth or the
    /// predictions.
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let n = confusion.total();
        if n == 0 {
            return Err(Error::EmptyTestSet);
        }
        let k = confusion.classes();
        let mut per_class = Vec::with_capacity(k);
        let mut weighted = 0.0;
        let (mut macro_sum, mut macro_n) = (0.0, 0usize);
        for c in 0..k {
            let tp = confusion.count(c, c);
            let support: u64 = confusion.rows()[c].iter().sum();
            let predicted: u64 = (0..k).map(|t| confusion.count(t, c)).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            weighted += support as f64 / n as f64 * f1;
            if support > 0 || predicted > 0 {
                macro_sum += f1;
                macro_n += 1;
            }
            per_class.push(ClassMetrics {
                label_id: c,
                precision,
                recall,
                f1,
                support,
            });
        }
        Ok(Self {
            per_class,
            weighted_f1: weighted,
            macro_f1: macro_sum / macro_n as f64,
            confusion,
        })
    }

    pub fn from_pairs(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        Self::from_confusion(ConfusionMatrix::from_pairs(truth, predicted, classes)?)
    }
}

/// Scores `trained` on `test_ids`, decoding according to its loss kind.
pub fn evaluate(
    trained: &TrainedModel,
    ds: &Dataset,
    test_ids: &[usize],
    table: &EncodingTable,
) -> Result<EvalReport> {
    if test_ids.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let predicted = trained.predict(ds, test_ids, table)?;
    let truth: Vec<usize> = test_ids.iter().map(|&v| ds.label_of(v)).collect();
    EvalReport::from_pairs(&truth, &predicted, ds.vocabulary().len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_index: usize,
    pub test_project: String,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub encoding: String,
    pub encoding_kind: EncodingKind,
    pub dimensions: usize,
    pub loss_kind: LossKind,
    pub labels: Vec<String>,
    pub folds: Vec<FoldResult>,
    /// Per-class F1 averaged over folds, one entry per label.
    pub per_class_mean_f1: Vec<f64>,
    /// Weighted F1 of the confusion matrix pooled over every fold.
    pub weighted_f1: f64,
    /// Plain mean of the per-fold weighted F1 scores.
    pub mean_fold_weighted_f1: f64,
}

impl CrossValReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn pooled_confusion(&self) -> Result<ConfusionMatrix> {
        let mut pooled = ConfusionMatrix::new(self.labels.len());
        for f in &self.folds {
            pooled.merge(&f.report.confusion)?;
        }
        Ok(pooled)
    }
}

fn run_fold(
    ds: &Dataset,
    fold: &FoldSpec,
    table: &EncodingTable,
    cfg: &TrainConfig,
) -> Result<FoldResult> {
    let seed = cfg.seed.wrapping_add(fold.fold_index as u64);
    let fold_cfg = TrainConfig {
        seed,
        ..cfg.clone()
    };
    let (trained, history) = train(ds, &fold.train_node_ids, table, &fold_cfg)?;
    let report = evaluate(&trained, ds, &fold.test_node_ids, table)?;
    Ok(FoldResult {
        fold_index: fold.fold_index,
        test_project: ds.projects()[fold.test_project].clone(),
        train_size: fold.train_node_ids.len(),
        test_size: fold.test_node_ids.len(),
        seed,
        epochs_run: history.len(),
        final_train_loss: history.last().copied().unwrap_or(f64::NAN),
        report,
    })
}

/// Leave-one-project-out cross-validation of one encoding. Fold `k` trains
/// with seed `cfg.seed + k`.
pub fn cross_validate(
    ds: &Dataset,
    encoding: &str,
    table: &EncodingTable,
    cfg: &TrainConfig,
    execution: Execution,
) -> Result<CrossValReport> {
    let folds = make_folds(ds)?;
    let run = |f: &FoldSpec| {
        log::info!("{encoding}: fold {} ({})", f.fold_index, ds.projects()[f.test_project]);
        run_fold(ds, f, table, cfg).map_err(|e| e.in_fold(f.fold_index))
    };
    let mut results = match execution {
        Execution::Sequential => folds.iter().map(run).collect::<Result<Vec<_>>>()?,
        Execution::Parallel => folds.par_iter().map(run).collect::<Result<Vec<_>>>()?,
    };
    results.sort_by_key(|f| f.fold_index);
    summarize(ds, encoding, table, cfg.loss_kind, results)
}

fn summarize(
    ds: &Dataset,
    encoding: &str,
    table: &EncodingTable,
    loss_kind: LossKind,
    folds: Vec<FoldResult>,
) -> Result<CrossValReport> {
    let k = ds.vocabulary().len();
    let n_folds = folds.len() as f64;
    let mut per_class_mean_f1 = vec![0.0; k];
    for f in &folds {
        for m in &f.report.per_class {
            per_class_mean_f1[m.label_id] += m.f1;
        }
    }
    per_class_mean_f1.iter_mut().for_each(|v| *v /= n_folds);
    let mean_fold_weighted_f1 = folds.iter().map(|f| f.report.weighted_f1).sum::<f64>() / n_folds;
    let mut report = CrossValReport {
        encoding: encoding.to_string(),
        encoding_kind: table.kind(),
        dimensions: table.dim(),
        loss_kind,
        labels: ds.vocabulary().labels().to_vec(),
        folds,
        per_class_mean_f1,
        weighted_f1: 0.0,
        mean_fold_weighted_f1,
    };
    report.weighted_f1 = EvalReport::from_confusion(report.pooled_confusion()?)?.weighted_f1;
    Ok(report)
}

/// Per-class mean F1 of two reports over the same vocabulary, as paired
/// samples.
pub fn collect_paired_scores(
    a: &CrossValReport,
    b: &CrossValReport,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.labels != b.labels {
        return Err(Error::VocabularyMismatch(format!(
            "{:?} has {} labels, {:?} has {}",
            a.encoding,
            a.labels.len(),
            b.encoding,
            b.labels.len()
        )));
    }
    Ok((a.per_class_mean_f1.clone(), b.per_class_mean_f1.clone()))
}

/// `encoding,dimensions,weighted_f1`, one row per report.
pub fn write_summary_csv<W: Write>(reports: &[CrossValReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["encoding", "dimensions", "weighted_f1"])?;
    for r in reports {
        w.write_record([
            r.encoding.clone(),
            r.dimensions.to_string(),
            r.weighted_f1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_data::{generate_synthetic, SynthConfig};
    use crate::label_encoding::one_hot_table;

    #[test]
    fn all_correct() {
        let r = EvalReport::from_pairs(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert!(r.per_class.iter().all(|m| m.f1 == 1.0));
        assert_eq!(r.weighted_f1, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn weighted_by_support() {
        let r = EvalReport::from_pairs(&[0, 0, 0, 1], &[0, 0, 0, 2], 3).unwrap();
        assert_eq!(r.per_class[0].f1, 1.0);
        assert_eq!(r.per_class[1].f1, 0.0);
        // class 2 is only predicted, so it counts for macro but not weighted
        assert_eq!(r.weighted_f1, 0.75);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        let r = EvalReport::from_pairs(&[0, 0, 0, 1], &[0, 0, 0, 0], 2).unwrap();
        let fa = 2.0 * 0.75 * 1.0 / 1.75;
        assert!((r.weighted_f1 - 0.75 * fa).abs() < 1e-15);
    }

    #[test]
    fn two_class_example() {
        // supports {A:3, B:1} with per-class f1 {1, 0}
        let mut m = ConfusionMatrix::new(3);
        for _ in 0..3 {
            m.add(0, 0).unwrap();
        }
        m.add(1, 2).unwrap();
        let r = EvalReport::from_confusion(m).unwrap();
        assert_eq!(r.per_class[0].f1, 1.0);
        assert_eq!(r.per_class[1].f1, 0.0);
        assert_eq!(r.weighted_f1, 0.75);
    }

    #[test]
    fn absent_class_has_no_weight() {
        let r = EvalReport::from_pairs(&[0, 1], &[0, 1], 5).unwrap();
        assert_eq!(r.weighted_f1, 1.0);
        assert_eq!(r.per_class[4].support, 0);
        assert_eq!(r.per_class[4].f1, 0.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn empty_and_bad_input() {
        assert!(matches!(EvalReport::from_pairs(&[], &[], 2), Err(Error::EmptyTestSet)));
        assert!(matches!(
            EvalReport::from_pairs(&[0], &[3], 2),
            Err(Error::InvalidClass { class: 3, .. })
        ));
    }

    fn fold_report(f1s: &[f64]) -> FoldResult {
        FoldResult {
            fold_index: 0,
            test_project: "P".into(),
            train_size: 1,
            test_size: 1,
            seed: 0,
            epochs_run: 1,
            final_train_loss: 0.0,
            report: EvalReport {
                per_class: f1s
                    .iter()
                    .enumerate()
                    .map(|(i, &f1)| ClassMetrics {
                        label_id: i,
                        precision: f1,
                        recall: f1,
                        f1,
                        support: 1,
                    })
                    .collect(),
                weighted_f1: 0.0,
                macro_f1: 0.0,
                confusion: ConfusionMatrix::new(f1s.len()),
            },
        }
    }

    fn report(name: &str, labels: &[&str], folds: Vec<FoldResult>) -> CrossValReport {
        let k = labels.len();
        let mut mean = vec![0.0; k];
        for f in &folds {
            for m in &f.report.per_class {
                mean[m.label_id] += m.f1 / folds.len() as f64;
            }
        }
        CrossValReport {
            encoding: name.into(),
            encoding_kind: EncodingKind::OneHot,
            dimensions: k,
            loss_kind: LossKind::SoftmaxCrossEntropy,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            folds,
            per_class_mean_f1: mean,
            weighted_f1: 0.0,
            mean_fold_weighted_f1: 0.0,
        }
    }

    #[test]
    fn paired_scores_average_folds() {
        let a = report("a", &["x", "y"], vec![fold_report(&[0.4, 1.0]), fold_report(&[0.6, 0.0])]);
        let (x, y) = collect_paired_scores(&a, &a).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!(x.iter().zip(&y).all(|(a, b)| a - b == 0.0));
        let other = report("b", &["x", "z"], vec![fold_report(&[0.0, 0.0])]);
        assert!(matches!(
            collect_paired_scores(&a, &other),
            Err(Error::VocabularyMismatch(_))
        ));
    }

    #[test]
    fn summary_csv() {
        let a = report("one-hot", &["x", "y"], vec![fold_report(&[1.0, 1.0])]);
        let mut buf = Vec::new();
        write_summary_csv(&[a], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "encoding,dimensions,weighted_f1\none-hot,2,0\n"
        );
    }

    #[test]
    fn cross_validation_sequential_equals_parallel() {
        let ds = generate_synthetic(&SynthConfig {
            n_projects: 3,
            generic_types: 2,
            subtypes_per_type: 2,
            nodes_per_project: 15,
            feature_dim: 8,
            ..SynthConfig::default()
        })
        .unwrap();
        let table = one_hot_table(ds.vocabulary()).unwrap();
        let cfg = TrainConfig {
            epochs: 10,
            hidden_dim: 8,
            loss_kind: LossKind::SoftmaxCrossEntropy,
            ..TrainConfig::default()
        };
        let a = cross_validate(&ds, "one-hot", &table, &cfg, Execution::Sequential).unwrap();
        let b = cross_validate(&ds, "one-hot", &table, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.folds.len(), 3);
        let tested: usize = a.folds.iter().map(|f| f.test_size).sum();
        assert_eq!(tested, ds.len());
        assert_eq!(a.folds[2].seed, 2);
        assert_eq!(a.pooled_confusion().unwrap().total() as usize, ds.len());
        let back = CrossValReport::from_json(a.to_json().unwrap().as_bytes()).unwrap();
        assert_eq!(back, a);
    }
}
