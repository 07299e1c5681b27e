//! Special functions: log-Gamma, regularized incomplete gamma and its
//! inverse, Gaussian and chi-square quantiles.

/// Natural log of the Gamma function, Lanczos approximation (g = 7, n = 9).
///
/// Relative accuracy around 1e-14 on the positive real axis.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Binomial coefficient with real upper argument, via log-Gamma.
pub fn binomial_real(top: f64, k: usize) -> f64 {
    let k = k as f64;
    (ln_gamma(top + 1.0) - ln_gamma(k + 1.0) - ln_gamma(top - k + 1.0)).exp()
}

/// Regularized lower incomplete gamma P(a, x).
///
/// Series expansion for x < a + 1, Lentz continued fraction otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_p domain: a > 0, x >= 0");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Inverse of P(a, .): returns x with P(a, x) = p, to about 1e-12.
pub fn inv_gamma_p(a: f64, p: f64) -> f64 {
    assert!((0.0..1.0).contains(&p), "inv_gamma_p needs p in [0,1)");
    if p == 0.0 {
        return 0.0;
    }
    // Wilson-Hilferty start, then Newton safeguarded by bisection.
    let z = normal_quantile(p);
    let t = 1.0 - 2.0 / (9.0 * a) + z * (2.0 / (9.0 * a)).sqrt();
    let mut x = (a * t * t * t).max(1e-10 * a);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..300 {
        let f = gamma_p(a, x) - p;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        // pdf of the Gamma(a,1) distribution.
        let dens = (-x + (a - 1.0) * x.ln() - ln_gamma(a)).exp();
        let mut step = if dens > 0.0 { f / dens } else { 0.0 };
        let mut next = x - step;
        // Keep upward excursions geometric while the bracket is one-sided.
        if hi.is_infinite() {
            next = next.min(4.0 * x + 1.0);
        }
        if !(next > lo && (hi.is_infinite() || next < hi)) || step == 0.0 {
            next = if hi.is_infinite() { 4.0 * x + 1.0 } else { 0.5 * (lo + hi) };
        }
        step = x - next;
        x = next;
        if step.abs() <= 1e-14 * x.abs() {
            break;
        }
    }
    x
}

/// Standard normal quantile (Wichura's AS 241, double precision).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile needs p in (0,1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly7(&A_NQ, r) / poly7(&B_NQ, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly7(&C_NQ, r) / poly7(&D_NQ, r)
    } else {
        r -= 5.0;
        poly7(&E_NQ, r) / poly7(&F_NQ, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn poly7(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

const A_NQ: [f64; 8] = [
    3.387_132_872_796_366_5e0,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B_NQ: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545_5e3,
];
const C_NQ: [f64; 8] = [
    1.423_437_110_749_683_5e0,
    4.630_337_846_156_545e0,
    5.769_497_221_460_691e0,
    3.647_848_324_763_204_5e0,
    1.270_458_252_452_368_4e0,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D_NQ: [f64; 8] = [
    1.0,
    2.053_191_626_637_759e0,
    1.676_384_830_183_803_8e0,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E_NQ: [f64; 8] = [
    6.657_904_643_501_103e0,
    5.463_784_911_164_114e0,
    1.784_826_539_917_291_3e0,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F_NQ: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

/// Chi-square quantile with `k` degrees of freedom.
pub fn chi2_quantile(p: f64, k: usize) -> f64 {
    assert!(k >= 1, "chi2_quantile needs k >= 1");
    2.0 * inv_gamma_p(k as f64 / 2.0, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quadrule::GaussLegendre;

    #[test]
    fn ln_gamma_spot_values() {
        // Gamma(1) = Gamma(2) = 1, Gamma(1/2) = sqrt(pi), Gamma(5) = 24.
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24.0_f64.ln()).abs() < 1e-12);
        // Recurrence Gamma(x+1) = x Gamma(x) across a range.
        for i in 1..60 {
            let x = 0.3 + 0.37 * i as f64;
            let lhs = ln_gamma(x + 1.0);
            let rhs = x.ln() + ln_gamma(x);
            assert!((lhs - rhs).abs() < 1e-11, "recurrence failed at x={x}");
        }
    }

    #[test]
    fn gamma_p_matches_quadrature_of_density() {
        // Independent oracle: integrate the Gamma(a,1) density on [0, x]
        // with Gauss-Legendre panels, after t = y^2 to defuse the endpoint
        // singularity at small a.
        let gl = GaussLegendre::new(64);
        for &(a, x) in &[(0.5f64, 0.3f64), (1.0, 1.0), (2.5, 4.0), (7.0, 3.0), (7.0, 12.0)] {
            let integrand =
                |y: f64| 2.0 * (-y * y + (2.0 * a - 1.0) * y.ln() - ln_gamma(a)).exp();
            let mut acc = 0.0;
            let panels = 40;
            let top = x.sqrt();
            for j in 0..panels {
                let lo = top * j as f64 / panels as f64;
                let hi = top * (j + 1) as f64 / panels as f64;
                acc += gl.integrate(lo, hi, integrand);
            }
            let err = (gamma_p(a, x) - acc).abs();
            assert!(err < 1e-12, "a={a} x={x} err={err:e}");
        }
    }

    #[test]
    fn inv_gamma_p_round_trips() {
        for &a in &[0.5, 1.0, 2.0, 4.5, 30.0, 99.5] {
            for &p in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.975, 0.9999] {
                let x = inv_gamma_p(a, p);
                assert!(
                    (gamma_p(a, x) - p).abs() < 1e-10,
                    "a={a} p={p} x={x} residual={}",
                    (gamma_p(a, x) - p).abs()
                );
            }
        }
    }

    #[test]
    fn normal_quantile_spot_values() {
        // 1.959963984540054 is the classical two-sided 95% point.
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!(normal_quantile(0.5).abs() < 1e-15);
        assert!((normal_quantile(0.975) + normal_quantile(0.025)).abs() < 1e-12);
    }

    #[test]
    fn normal_quantile_matches_quadrature_cdf() {
        // Integrate the standard normal pdf from 0 to z and compare with p - 1/2.
        let gl = GaussLegendre::new(64);
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for &p in &[0.55, 0.8, 0.95, 0.999] {
            let z = normal_quantile(p);
            let mass: f64 = (0..20).map(|j| {
                let lo = z * j as f64 / 20.0;
                let hi = z * (j + 1) as f64 / 20.0;
                gl.integrate(lo, hi, pdf)
            }).sum();
            assert!((mass - (p - 0.5)).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn chi2_quantile_agrees_with_normal_at_one_dof() {
        // chi2_1 quantile(q) = z_{(1+q)/2}^2.
        for &q in &[0.5, 0.9, 0.95, 0.969, 0.99] {
            let z = normal_quantile((1.0 + q) / 2.0);
            let c = chi2_quantile(q, 1);
            assert!((c - z * z).abs() < 1e-9, "q={q}: {c} vs {}", z * z);
        }
    }
}
