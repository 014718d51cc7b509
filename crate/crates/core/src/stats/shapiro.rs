//! Shapiro–Wilk W test using Royston's AS R94 approximations for the
//! coefficients and for the null distribution of W.

use statrs::distribution::{ContinuousCDF, Normal};

use super::{TestKind, TestResult};
use crate::error::{Error, Result};

pub const MIN_N: usize = 3;
pub const MAX_N: usize = 5000;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

/// The first `n / 2` coefficients (for the largest order statistics, in
/// decreasing magnitude); the rest follow by antisymmetry.
pub(crate) fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let normal = std_normal();
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half)
        .map(|i| normal.inverse_cdf((i as f64 - 0.375) / an25))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// W statistic and its upper-tail p-value.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::SampleSize {
            n,
            min: MIN_N,
            max: MAX_N,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample".into()));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let range = s[n - 1] - s[0];
    let scale = s[0].abs().max(s[n - 1].abs());
    if range <= 1e-12 * scale || range == 0.0 {
        return Err(Error::ZeroVariance("all sample values are identical".into()));
    }
    // centre and scale by the range for accuracy
    let mean = s.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = s.iter().map(|v| (v - mean) / range).collect();
    let ssq: f64 = z.iter().map(|v| v * v).sum();
    let a = coefficients(n);
    let num: f64 = a
        .iter()
        .enumerate()
        .map(|(i, ai)| ai * (z[n - 1 - i] - z[i]))
        .sum();
    let w = (num * num / ssq).min(1.0);

    let p = if n == 3 {
        let w = w.max(0.75);
        let pi6 = 6.0 / std::f64::consts::PI;
        (pi6 * (w.sqrt().asin() - (0.75f64).sqrt().asin())).clamp(0.0, 1.0)
    } else {
        let an = n as f64;
        let w1 = (1.0 - w).ln();
        let (y, mu, sigma) = if n <= 11 {
            let gamma = poly(&G, an);
            if w1 >= gamma {
                return Ok(TestResult::new(TestKind::ShapiroWilk, w, 0.0, n));
            }
            (-(gamma - w1).ln(), poly(&C3, an), poly(&C4, an).exp())
        } else {
            let ln_n = an.ln();
            (w1, poly(&C5, ln_n), poly(&C6, ln_n).exp())
        };
        std_normal().sf((y - mu) / sigma)
    };
    Ok(TestResult::new(TestKind::ShapiroWilk, w, p, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(x: &[f64], w: f64, p: f64) {
        let r = shapiro_wilk(x).unwrap();
        assert!((r.statistic - w).abs() < 1e-6, "W {} vs {w}", r.statistic);
        assert!((r.p_value - p).abs() < 1e-6, "p {} vs {p}", r.p_value);
        assert_eq!(r.n_effective, x.len());
    }

    #[test]
    fn classic_weights_sample() {
        check(
            &[148., 154., 158., 160., 161., 162., 166., 170., 182., 195., 236.],
            0.7888146948631716,
            0.006703814061898823,
        );
    }

    #[test]
    fn three_points() {
        check(&[1.0, 2.0, 4.0], 0.9642857142857142, 0.6368868450289689);
    }

    #[test]
    fn seven_points() {
        check(
            &[2.1, 3.3, 1.2, 5.5, 4.1, 3.8, 2.9],
            0.992353898039441,
            0.9967794714524612,
        );
    }

    #[test]
    fn squares_of_one_to_twenty() {
        let x: Vec<f64> = (1..=20).map(|i| (i * i) as f64).collect();
        check(&x, 0.9061306286053874, 0.053809589128654696);
    }

    #[test]
    fn twenty_five_points() {
        check(
            &[
                0.5, 1.1, -0.3, 2.2, 0.9, -1.4, 0.1, 0.7, 1.8, -0.6, 0.3, 1.2, -0.2, 0.4, 2.9, -0.9,
                0.0, 0.8, 1.5, -1.1, 0.6, 0.2, -0.4, 1.0, 3.5,
            ],
            0.9692209757586665,
            0.625378364959004,
        );
    }

    #[test]
    fn reference_values_across_branches() {
        check(&[1.7112, 3.8005, 1.3108, 2.5157], 0.9406377098328002, 0.658219052178537);
        check(
            &[2.8288, 4.6174, 2.7084, 1.2236, 2.9738],
            0.927347987091208,
            0.5784006056714439,
        );
        check(
            &[1.4771, 0.7766, 2.2304, 0.2136, 1.133, 0.387],
            0.9553612183176706,
            0.7833721925093425,
        );
        check(
            &[
                3.1141, 0.8792, 2.7747, 2.4734, 1.4135, 2.157, 3.5258, 0.9501, 0.2808, 2.4451,
                4.1719, 2.6149,
            ],
            0.9695401819421179,
            0.9059277844356669,
        );
        check(
            &[
                3.2299, 2.5915, 0.2677, 1.3638, 1.1617, 2.1496, 2.565, 2.3867, 3.499, 1.4472,
                3.8794, 0.3488, 2.342, 0.6756, 0.5108, 3.9756, 1.3058, 2.002, 5.8817, 1.0291,
                4.6501, 0.8771, 1.6453, 0.8869, 2.0966, 1.3965, 1.1145, 1.4326, 4.0512, 6.1383,
                1.1392, 4.0265, 0.8156, 2.5609, 1.3412, 1.927, 1.6953, 1.1812, 0.1498, 2.9198,
                2.533, 4.0229,
            ],
            0.9196581257541692,
            0.00589468543289155,
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(Error::SampleSize { n: 2, .. })));
        assert!(matches!(shapiro_wilk(&[3.0; 10]), Err(Error::ZeroVariance(_))));
        assert!(matches!(
            shapiro_wilk(&[1.0, f64::NAN, 2.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn location_and_scale_invariant() {
        let x = [2.1, 3.3, 1.2, 5.5, 4.1, 3.8, 2.9, 0.4];
        let a = shapiro_wilk(&x).unwrap();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 100.0).collect();
        let b = shapiro_wilk(&y).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
        assert!((a.p_value - b.p_value).abs() < 1e-12);
    }

    #[test]
    fn coefficients_are_normalised() {
        for n in [4, 5, 6, 11, 12, 42, 500] {
            let a = coefficients(n);
            let ss: f64 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
            assert!((ss - 1.0).abs() < 1e-9, "n={n}: {ss}");
            assert!(a.windows(2).all(|w| w[0] > w[1]));
        }
    }
}
