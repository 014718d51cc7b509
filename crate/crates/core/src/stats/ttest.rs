use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{differences, is_constant, TestKind, TestResult};
use crate::error::{Error, Result};

/// `P(T <= t)` for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .cdf(t)
}

/// Two-sided tail probability `P(|T| >= |t|)`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Paired t-test on `d = x - y`, two-sided.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TestResult> {
    let d = differences(x, y)?;
    let n = d.len();
    if n < 2 {
        return Err(Error::SampleSize {
            n,
            min: 2,
            max: usize::MAX,
        });
    }
    if is_constant(&d) {
        return Err(Error::ZeroVariance("paired differences are constant".into()));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let t = mean / (var / nf).sqrt();
    let p = student_t_two_sided(t, nf - 1.0);
    Ok(TestResult::new(TestKind::PairedT, t, p, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_closed_forms() {
        for &t in &[-30.0, -2.5, -0.7, 0.0, 0.3, 1.0, 4.2, 100.0] {
            let df1 = 0.5 + f64::atan(t) / std::f64::consts::PI;
            let df2 = 0.5 + t / (2.0 * (t * t + 2.0).sqrt());
            assert!((student_t_cdf(t, 1.0) - df1).abs() < 1e-10, "df1 t={t}");
            assert!((student_t_cdf(t, 2.0) - df2).abs() < 1e-10, "df2 t={t}");
        }
    }

    #[test]
    fn two_sided_reference_values() {
        let cases = [
            (2.5, 5.0, 0.054490099342376204),
            (1.3, 17.0, 0.21095181388752698),
            (0.4, 40.0, 0.6912846931290735),
        ];
        for (t, df, p) in cases {
            assert!((student_t_two_sided(t, df) - p).abs() < 1e-10);
            assert!((student_t_two_sided(-t, df) - p).abs() < 1e-10);
        }
    }

    #[test]
    fn hand_example() {
        let r = paired_t_test(&[2., 4., 6.], &[1., 2., 3.]).unwrap();
        assert!((r.statistic - 12f64.sqrt()).abs() < 1e-12);
        // df = 2 closed form
        let t = r.statistic;
        let p = 2.0 * (1.0 - (0.5 + t / (2.0 * (t * t + 2.0).sqrt())));
        assert!((r.p_value - p).abs() < 1e-12);
        assert!((r.p_value - 0.07417990022744853).abs() < 1e-10);
    }

    #[test]
    fn swap_negates_t() {
        let x = [1.0, 2.5, 2.0, 4.0];
        let y = [0.5, 2.0, 2.6, 3.0];
        let a = paired_t_test(&x, &y).unwrap();
        let b = paired_t_test(&y, &x).unwrap();
        assert_eq!(a.statistic, -b.statistic);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            paired_t_test(&[1.1, 2.2, 3.3], &[1.0, 2.1, 3.2]),
            Err(Error::ZeroVariance(_))
        ));
        assert!(matches!(
            paired_t_test(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch(2, 1))
        ));
        assert!(matches!(paired_t_test(&[1.0], &[0.0]), Err(Error::SampleSize { .. })));
    }
}
