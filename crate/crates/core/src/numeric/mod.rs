//! Shared numeric machinery: special functions, Gauss-Legendre rules,
//! and small dense linear algebra.

pub mod linalg;
pub mod quadrule;
pub mod special;

/// Kahan-compensated sum; used where many small terms accumulate.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Mean and unbiased variance of a sample.
pub fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    assert!(n >= 1, "mean_var needs at least one sample");
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(samples.iter().map(|&x| (x - mean) * (x - mean)));
    (mean, ss / (n - 1) as f64)
}
