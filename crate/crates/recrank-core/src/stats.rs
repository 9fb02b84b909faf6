//! Small statistics helpers shared by sampling checks and evaluation.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Chi-square goodness-of-fit p-value for observed counts against
/// expected probabilities. Categories with zero expected mass must have
/// zero observed counts (they are skipped).
pub fn chi_square_gof_pvalue(observed: &[u64], probabilities: &[f64]) -> f64 {
    assert_eq!(observed.len(), probabilities.len());
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut dof: i64 = -1;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if p <= 0.0 {
            assert_eq!(o, 0, "observed mass in a zero-probability category");
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        dof += 1;
    }
    if dof <= 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("dof > 0");
    1.0 - dist.cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts_fit_uniform() {
        let p = chi_square_gof_pvalue(&[100, 100, 100, 100], &[0.25; 4]);
        assert!(p > 0.99);
    }

    #[test]
    fn skewed_counts_reject_uniform() {
        let p = chi_square_gof_pvalue(&[400, 0, 0, 0], &[0.25; 4]);
        assert!(p < 1e-6);
    }
}
