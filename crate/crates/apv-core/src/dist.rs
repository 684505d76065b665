//! Probability-distribution primitives: log-gamma, regularized incomplete
//! gamma and beta functions, and the CDFs built on them (standard normal,
//! chi-square, Student t, Fisher F).
//!
//! Everything is implemented in-repo via series and continued-fraction
//! expansions; target absolute error is 1e-10 or better across the tested
//! ranges.

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// Distribution selector for [`dist_cdf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistSpec {
    StandardNormal,
    ChiSquare { df: f64 },
    StudentT { df: f64 },
    FisherF { df1: f64, df2: f64 },
}

/// P(X <= x) for the selected distribution.
pub fn dist_cdf(spec: DistSpec, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite cdf argument {x}")));
    }
    match spec {
        DistSpec::StandardNormal => Ok(normal_cdf(x)),
        DistSpec::ChiSquare { df } => {
            check_df("df", df)?;
            Ok(chi_square_cdf(x, df))
        }
        DistSpec::StudentT { df } => {
            check_df("df", df)?;
            Ok(student_t_cdf(x, df))
        }
        DistSpec::FisherF { df1, df2 } => {
            check_df("df1", df1)?;
            check_df("df2", df2)?;
            Ok(fisher_f_cdf(x, df1, df2))
        }
    }
}

fn check_df(name: &str, df: f64) -> Result<()> {
    if !df.is_finite() || df <= 0.0 {
        return Err(Error::Domain(format!("{name} must be positive, got {df}")));
    }
    Ok(())
}

/// ln Γ(z) for z > 0, via the Lanczos approximation.
pub fn ln_gamma(z: f64) -> f64 {
    debug_assert!(z > 0.0, "ln_gamma defined here only for z > 0");
    const C: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut sum = 1.000000000190015;
    for (i, &c) in C.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * sum / z).ln()
}

/// Series expansion for the regularized lower incomplete gamma P(a, x).
/// Converges quickly for x < a + 1.
fn inc_gamma_series(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let gln = ln_gamma(a);
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - gln).exp()
}

/// Continued fraction for the regularized upper incomplete gamma Q(a, x).
/// Converges quickly for x >= a + 1.
fn inc_gamma_cf(a: f64, x: f64) -> f64 {
    let gln = ln_gamma(a);
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
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
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - gln).exp() * h
}

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
pub fn inc_gamma_lower(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        inc_gamma_series(a, x)
    } else {
        1.0 - inc_gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn inc_gamma_upper(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - inc_gamma_series(a, x)
    } else {
        inc_gamma_cf(a, x)
    }
}

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0 && (0.0..=1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // Symmetry relation keeps the continued fraction in its fast-converging
    // region.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - inc_beta(1.0 - x, b, a);
    }
    let lbeta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let front = (a * x.ln() + b * (1.0 - x).ln() - lbeta).exp();

    let mut f = 1.0;
    let mut c = 1.0;
    let mut d = 0.0;
    for m in 0..MAX_ITER {
        let mf = m as f64;
        // Odd step.
        let aa = -(a + mf) * (a + b + mf) * x / ((a + 2.0 * mf) * (a + 2.0 * mf + 1.0));
        let mut delta = lentz_step(aa, &mut d, &mut c);
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
        // Even step.
        let bb = (mf + 1.0) * (b - mf - 1.0) * x / ((a + 2.0 * mf + 1.0) * (a + 2.0 * mf + 2.0));
        delta = lentz_step(bb, &mut d, &mut c);
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    front / (f * a)
}

fn lentz_step(val: f64, d: &mut f64, c: &mut f64) -> f64 {
    *d = 1.0 + val * *d;
    if d.abs() < TINY {
        *d = TINY;
    }
    *d = 1.0 / *d;
    *c = 1.0 + val / *c;
    if c.abs() < TINY {
        *c = TINY;
    }
    *c * *d
}

/// Standard normal CDF, expressed through the regularized incomplete gamma:
/// Phi(x) = 0.5 + 0.5 P(1/2, x^2/2) for x >= 0 and 0.5 Q(1/2, x^2/2) below.
pub fn normal_cdf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    // Beyond |x| = 40 the tail mass is below the subnormal range; short-
    // circuit so extreme z statistics cannot reach inf/NaN arithmetic.
    if x >= 40.0 {
        return 1.0;
    }
    if x <= -40.0 {
        return 0.0;
    }
    let half_sq = 0.5 * x * x;
    if x > 0.0 {
        0.5 + 0.5 * inc_gamma_lower(0.5, half_sq)
    } else {
        0.5 * inc_gamma_upper(0.5, half_sq)
    }
}

/// Chi-square CDF with df degrees of freedom.
pub fn chi_square_cdf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    inc_gamma_lower(0.5 * df, 0.5 * x)
}

/// Chi-square survival function P(X > x); sharper than `1 - cdf` in the tail.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    inc_gamma_upper(0.5 * df, 0.5 * x)
}

/// Student t CDF with df degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let x = df / (df + t * t);
    let p = 0.5 * inc_beta(x, 0.5 * df, 0.5);
    if t > 0.0 {
        1.0 - p
    } else {
        p
    }
}

/// Fisher F CDF with (df1, df2) degrees of freedom.
pub fn fisher_f_cdf(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f.is_infinite() {
        return 1.0;
    }
    inc_beta(df1 * f / (df1 * f + df2), 0.5 * df1, 0.5 * df2)
}

/// Inverse of the standard normal CDF (Acklam's rational approximation with
/// one Newton refinement; |error| well below 1e-12 away from the extreme
/// tails).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::Domain(format!("probability out of range: {p}")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    if p == 0.5 {
        return Ok(0.0);
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut z = if p > P_LOW && p < 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = if p < P_LOW {
            (-2.0 * p.ln()).sqrt()
        } else {
            (-2.0 * (-p).ln_1p()).sqrt()
        };
        let x = ((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5];
        let x = x / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
        if p < P_LOW {
            x
        } else {
            -x
        }
    };

    // One Newton step against the series-based CDF.
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 1e-100 {
        z -= (normal_cdf(z) - p) / pdf;
    }
    Ok(z)
}

/// P(B <= k) for B ~ Binomial(n, 1/2), via the incomplete beta identity.
pub fn binomial_half_cdf(k: usize, n: usize) -> f64 {
    if k >= n {
        return 1.0;
    }
    inc_beta(0.5, (n - k) as f64, k as f64 + 1.0)
}
