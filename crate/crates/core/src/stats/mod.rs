//! Normality-gated significance testing on paired samples.
//!
//! Differences `x - y` are first checked with Shapiro–Wilk; when normality
//! holds (`p > alpha`) a paired t-test follows, otherwise a Wilcoxon
//! signed-rank test. All tests are two-sided.

mod shapiro;
mod ttest;
mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use shapiro::shapiro_wilk;
pub use ttest::{paired_t_test, student_t_cdf, student_t_two_sided};
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, WilcoxonOptions, ZeroMethod};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Relative spread below which a sample counts as constant.
const CONSTANT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    ShapiroWilk,
    PairedT,
    Wilcoxon,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::ShapiroWilk => "shapiro_wilk",
            TestKind::PairedT => "paired_t",
            TestKind::Wilcoxon => "wilcoxon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    /// W, t or z depending on `test`.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
}

impl TestResult {
    pub(crate) fn new(test: TestKind, statistic: f64, p_value: f64, n_effective: usize) -> Self {
        Self {
            test,
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            n_effective,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub normality: TestResult,
    pub significance: TestResult,
    pub alpha: f64,
    pub normal_path_taken: bool,
    pub significant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    pub alpha: f64,
    pub wilcoxon: WilcoxonOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            wilcoxon: WilcoxonOptions::default(),
        }
    }
}

pub(crate) fn differences(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("paired sample".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a - b).collect())
}

/// True when the spread of `v` is negligible relative to its magnitude.
pub(crate) fn is_constant(v: &[f64]) -> bool {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let scale = lo.abs().max(hi.abs());
    hi - lo <= CONSTANT_TOLERANCE * scale
}

/// The t-test applies only when normality is not rejected, i.e. `p > alpha`.
pub fn normal_path(normality_p: f64, alpha: f64) -> bool {
    normality_p > alpha
}

pub fn compare_encodings(x: &[f64], y: &[f64], alpha: f64) -> Result<ComparisonResult> {
    compare_encodings_with(
        x,
        y,
        CompareOptions {
            alpha,
            ..CompareOptions::default()
        },
    )
}

/// Runs the gated pipeline. Constant differences cannot be tested for
/// normality; they are reported as non-normal (W = 1, p = 0) and go to the
/// Wilcoxon test, which rejects the all-zero case.
pub fn compare_encodings_with(
    x: &[f64],
    y: &[f64],
    opts: CompareOptions,
) -> Result<ComparisonResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {}",
            opts.alpha
        )));
    }
    let d = differences(x, y)?;
    if d.len() < 3 {
        return Err(Error::SampleSize {
            n: d.len(),
            min: 3,
            max: shapiro::MAX_N,
        });
    }
    let normality = if is_constant(&d) {
        TestResult::new(TestKind::ShapiroWilk, 1.0, 0.0, d.len())
    } else {
        shapiro_wilk(&d)?
    };
    let normal_path_taken = normal_path(normality.p_value, opts.alpha);
    let significance = if normal_path_taken {
        paired_t_test(x, y)?
    } else {
        wilcoxon_signed_rank_with(x, y, opts.wilcoxon)?
    };
    Ok(ComparisonResult {
        normality,
        significance,
        alpha: opts.alpha,
        normal_path_taken,
        significant: significance.p_value <= opts.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    #[test]
    fn alpha_boundary_goes_to_wilcoxon() {
        assert!(!normal_path(0.05, 0.05));
        assert!(normal_path(0.050000001, 0.05));
        assert!(!normal_path(0.01, 0.05));
    }

    #[test]
    fn normal_differences_take_t_path() {
        let mut hits = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..42).map(|_| 0.5).collect();
            let x: Vec<f64> = y
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v + 0.1 * e
                })
                .collect();
            let r = compare_encodings(&x, &y, 0.05).unwrap();
            assert_eq!(r.normal_path_taken, r.normality.p_value > 0.05);
            if r.normal_path_taken {
                assert_eq!(r.significance.test, TestKind::PairedT);
                hits += 1;
            }
        }
        assert!(hits >= 16, "{hits}/20");
    }

    #[test]
    fn skewed_differences_take_wilcoxon_path() {
        let exp = Exp::new(1.0).unwrap();
        let mut hits = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..42).map(|_| exp.sample(&mut rng)).collect();
            let y = vec![1.0; 42];
            let r = compare_encodings(&x, &y, 0.05).unwrap();
            if !r.normal_path_taken {
                assert_eq!(r.significance.test, TestKind::Wilcoxon);
                hits += 1;
            }
        }
        assert!(hits >= 16, "{hits}/20");
    }

    #[test]
    fn constant_shift_is_significant() {
        let y: Vec<f64> = (0..42).map(|i| 0.3 + 0.01 * i as f64).collect();
        let x: Vec<f64> = y.iter().map(|v| v + 0.1).collect();
        let r = compare_encodings(&x, &y, 0.05).unwrap();
        assert!(!r.normal_path_taken);
        assert_eq!(r.significance.test, TestKind::Wilcoxon);
        assert!(r.significant);
        assert!(r.significance.statistic > 0.0);
    }

    #[test]
    fn identical_samples_are_rejected() {
        let x = vec![0.5; 10];
        assert!(matches!(
            compare_encodings(&x, &x, 0.05),
            Err(Error::AllZeroDifferences)
        ));
    }

    #[test]
    fn invariants_hold() {
        let x = [0.8, 0.75, 0.9, 0.6, 0.95, 0.7, 0.85];
        let y = [0.7, 0.8, 0.82, 0.5, 0.9, 0.72, 0.8];
        let r = compare_encodings(&x, &y, 0.05).unwrap();
        assert_eq!(r.significant, r.significance.p_value <= 0.05);
        let shifted_x: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
        let shifted_y: Vec<f64> = y.iter().map(|v| v + 10.0).collect();
        let s = compare_encodings(&shifted_x, &shifted_y, 0.05).unwrap();
        assert_eq!(r.normal_path_taken, s.normal_path_taken);
        assert!((r.significance.p_value - s.significance.p_value).abs() < 1e-9);
    }
}
