//! Orthogonal polynomial evaluation: Gegenbauer, Jacobi, Chebyshev.

use crate::error::{Error, Result};

/// Gegenbauer polynomial C_l^lambda(t) by the three-term recurrence.
///
/// Requires lambda > 0; the circle case lambda = 0 is handled separately via
/// Chebyshev polynomials (see [`chebyshev_t`]).
pub fn gegenbauer_eval(l: usize, lambda: f64, t: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::OutOfDomain("lambda", lambda));
    }
    if t.abs() > 1.0 + 1e-12 {
        return Err(Error::OutOfDomain("t", t));
    }
    let t = t.clamp(-1.0, 1.0);
    if l == 0 {
        return Ok(1.0);
    }
    let mut c0 = 1.0;
    let mut c1 = 2.0 * lambda * t;
    for n in 2..=l {
        let nf = n as f64;
        let c2 = (2.0 * t * (nf + lambda - 1.0) * c1 - (nf + 2.0 * lambda - 2.0) * c0) / nf;
        c0 = c1;
        c1 = c2;
    }
    Ok(c1)
}

/// Chebyshev polynomial of the first kind T_l(t), recurrence form.
pub fn chebyshev_t(l: usize, t: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let mut c0 = 1.0;
    let mut c1 = t;
    for _ in 2..=l {
        let c2 = 2.0 * t * c1 - c0;
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// Jacobi polynomial P_l^{(a,b)}(t) by the three-term recurrence.
pub fn jacobi_eval(l: usize, a: f64, b: f64, t: f64) -> Result<f64> {
    if a <= -1.0 {
        return Err(Error::OutOfDomain("a", a));
    }
    if b <= -1.0 {
        return Err(Error::OutOfDomain("b", b));
    }
    if l == 0 {
        return Ok(1.0);
    }
    let mut p0 = 1.0;
    let mut p1 = (a + 1.0) + (a + b + 2.0) * (t - 1.0) / 2.0;
    for n in 2..=l {
        let n = n as f64;
        let c = 2.0 * n + a + b;
        let a1 = 2.0 * n * (n + a + b) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * t + a * a - b * b);
        let a3 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * c;
        let p2 = (a2 * p1 - a3 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    Ok(p1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::binomial_real;
    use rand::Rng;

    #[test]
    fn gegenbauer_degree_zero_and_explicit_degree_two() {
        for t in [-1.0, -0.3, 0.0, 0.9, 1.0] {
            assert_eq!(gegenbauer_eval(0, 0.5, t).unwrap(), 1.0);
        }
        // Explicit degree-2 form: 2 lambda (lambda + 1) t^2 - lambda.
        for &(lambda, t) in &[(1.0, 1.0), (0.5, 0.4), (2.5, -0.7)] {
            let explicit = 2.0 * lambda * (lambda + 1.0) * t * t - lambda;
            let rec = gegenbauer_eval(2, lambda, t).unwrap();
            assert!((rec - explicit).abs() < 1e-13, "lambda={lambda} t={t}");
        }
        assert!((gegenbauer_eval(2, 1.0, 1.0).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gegenbauer_parity() {
        let mut rng = crate::rng::Seed::new(31).phase(0);
        for l in 0..8 {
            for _ in 0..20 {
                let t = rng.gen::<f64>() * 2.0 - 1.0;
                let plus = gegenbauer_eval(l, 0.5, t).unwrap();
                let minus = gegenbauer_eval(l, 0.5, -t).unwrap();
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                assert!((plus - sign * minus).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gegenbauer_rejects_bad_arguments() {
        assert!(gegenbauer_eval(2, 0.0, 0.5).is_err());
        assert!(gegenbauer_eval(2, 1.0, 1.1).is_err());
    }

    #[test]
    fn jacobi_low_degrees_match_textbook_forms() {
        let mut rng = crate::rng::Seed::new(32).phase(0);
        for _ in 0..30 {
            let a = rng.gen::<f64>() * 2.0;
            let b = rng.gen::<f64>() * 2.0 - 0.9;
            let t = rng.gen::<f64>() * 2.0 - 1.0;
            assert_eq!(jacobi_eval(0, a, b, t).unwrap(), 1.0);
            let p1 = (a + 1.0) + (a + b + 2.0) * (t - 1.0) / 2.0;
            assert!((jacobi_eval(1, a, b, t).unwrap() - p1).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobi_endpoint_identity() {
        // P_L^{(a,b)}(1) = binom(L + a, L), evaluated by direct product.
        for l in 0..=6 {
            for &(a, b) in &[(1.0, 0.0), (0.5, -0.5), (2.0, 1.5)] {
                let lhs = jacobi_eval(l, a, b, 1.0).unwrap();
                let rhs = binomial_real(l as f64 + a, l);
                assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0), "l={l} a={a}");
            }
        }
    }

    #[test]
    fn chebyshev_matches_cosine_form() {
        for l in 0..10 {
            for k in 0..20 {
                let angle = 0.31 * k as f64;
                let lhs = chebyshev_t(l, angle.cos());
                let rhs = (l as f64 * angle).cos();
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }
}
