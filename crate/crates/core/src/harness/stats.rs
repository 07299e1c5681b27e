//! Replication statistics: Gaussian and chi-square confidence intervals
//! with Bonferroni correction.

use crate::error::{Error, Result};
use crate::numeric::special::{chi2_quantile, normal_quantile};
use crate::numeric::mean_var;

/// Per-test level 1 - (1 - level)/m for m simultaneous intervals.
pub fn bonferroni(level: f64, m: usize) -> f64 {
    assert!(m >= 1 && level > 0.0 && level < 1.0);
    1.0 - (1.0 - level) / m as f64
}

/// Gaussian confidence interval for the mean with the sample standard error.
pub fn ci_mean_gaussian(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    check_args(samples, level)?;
    let n = samples.len() as f64;
    let (mean, var) = mean_var(samples);
    let z = normal_quantile((1.0 + level) / 2.0);
    let half = z * (var / n).sqrt();
    Ok((mean - half, mean + half))
}

/// Chi-square confidence interval for the variance from the unbiased
/// sample variance: [(n-1) s^2 / q_hi, (n-1) s^2 / q_lo].
pub fn ci_variance_chi2(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    check_args(samples, level)?;
    let n = samples.len();
    let (_, var) = mean_var(samples);
    let dof = n - 1;
    let q_hi = chi2_quantile((1.0 + level) / 2.0, dof);
    let q_lo = chi2_quantile((1.0 - level) / 2.0, dof);
    let scaled = dof as f64 * var;
    Ok((scaled / q_hi, scaled / q_lo))
}

fn check_args(samples: &[f64], level: f64) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::InvalidCount(samples.len(), 2));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::OutOfDomain("level", level));
    }
    Ok(())
}
