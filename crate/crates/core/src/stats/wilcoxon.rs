use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{differences, TestKind, TestResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    /// Discard zero differences before ranking.
    #[default]
    Wilcox,
    /// Rank zeros with the rest, then discard their ranks.
    Pratt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WilcoxonOptions {
    pub zero_method: ZeroMethod,
    pub continuity_correction: bool,
}

/// Midranks (1-based) of `v`, plus the sizes of every tie group.
pub(crate) fn midranks(v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Signed-rank test with default options: zeros dropped, midranks, tie
/// correction, no continuity correction. The statistic is the signed `z`
/// of `W+`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    wilcoxon_signed_rank_with(x, y, WilcoxonOptions::default())
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    opts: WilcoxonOptions,
) -> Result<TestResult> {
    let d = differences(x, y)?;
    let nonzero = d.iter().filter(|&&v| v != 0.0).count();
    if nonzero == 0 {
        return Err(Error::AllZeroDifferences);
    }
    let ranked: Vec<f64> = match opts.zero_method {
        ZeroMethod::Wilcox => d.iter().copied().filter(|&v| v != 0.0).collect(),
        ZeroMethod::Pratt => d.clone(),
    };
    let abs: Vec<f64> = ranked.iter().map(|v| v.abs()).collect();
    let (ranks, _) = midranks(&abs);
    let w_plus: f64 = ranked
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();

    let count = ranked.len() as f64;
    let mut mean = count * (count + 1.0) / 4.0;
    let mut var = count * (count + 1.0) * (2.0 * count + 1.0) / 24.0;
    let kept: Vec<f64> = ranked
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v != 0.0)
        .map(|(_, &r)| r)
        .collect();
    if opts.zero_method == ZeroMethod::Pratt {
        let zeros = (ranked.len() - kept.len()) as f64;
        mean -= zeros * (zeros + 1.0) / 4.0;
        var -= zeros * (zeros + 1.0) * (2.0 * zeros + 1.0) / 24.0;
    }
    let (_, ties) = midranks(&kept);
    var -= ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    if var <= 0.0 {
        return Err(Error::Degenerate("signed-rank variance is zero".into()));
    }
    let mut diff = w_plus - mean;
    if opts.continuity_correction {
        diff = diff.signum() * (diff.abs() - 0.5).max(0.0);
    }
    let z = diff / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("valid parameters");
    let p = (2.0 * normal.sf(z.abs())).min(1.0);
    Ok(TestResult::new(TestKind::Wilcoxon, z, p, nonzero))
}
