//! APV arithmetic and the descriptive-statistics block reported per data set:
//! mean, standard deviation, coefficient of variation, median, moment-based
//! skewness and excess kurtosis, and the Jarque-Bera normality test.

use serde::Serialize;

use crate::dist::chi_square_sf;
use crate::error::{Error, Result};

/// Price per unit of area, in USD/cm^2.
///
/// All three arguments must be strictly positive.
pub fn apv(real_price: f64, height_cm: f64, width_cm: f64) -> Result<f64> {
    for (name, v) in [
        ("real_price", real_price),
        ("height_cm", height_cm),
        ("width_cm", width_cm),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(real_price / (height_cm * width_cm))
}

/// Descriptive-statistics block for one sample of APV values.
///
/// Conventions: `sd` uses the n-1 sample denominator; skewness and excess
/// kurtosis are moment-based (1/n central moments), g1 = m3/m2^1.5 and
/// g2 = m4/m2^2 - 3; the Jarque-Bera statistic is (n/6)(g1^2 + g2^2/4) with
/// g2 already excess, and its p-value comes from chi-square with 2 df.
/// `sd`, `cv` and the JB block need n >= 2 and are `None` below that;
/// a zero-variance sample sets `degenerate` and leaves g1/g2/JB undefined.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub cv: Option<f64>,
    pub median: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub jb: Option<f64>,
    pub jb_p: Option<f64>,
    pub degenerate: bool,
}

/// Compute the full descriptive block for a sample. Errors on an empty
/// sample or non-finite values.
pub fn describe(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite sample value {bad}")));
    }
    let n = values.len();
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let median = median_of(values);

    if n < 2 {
        return Ok(SummaryStats {
            n,
            mean,
            sd: None,
            cv: None,
            median,
            skewness: None,
            excess_kurtosis: None,
            jb: None,
            jb_p: None,
            degenerate: false,
        });
    }

    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let sum_sq = m2;
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;

    let sd = (sum_sq / (nf - 1.0)).sqrt();
    let cv = if mean != 0.0 { Some(sd / mean) } else { None };

    if m2 <= 0.0 {
        // All values equal: spread statistics degenerate.
        return Ok(SummaryStats {
            n,
            mean,
            sd: Some(0.0),
            cv: if mean != 0.0 { Some(0.0) } else { None },
            median,
            skewness: None,
            excess_kurtosis: None,
            jb: None,
            jb_p: None,
            degenerate: true,
        });
    }

    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let jb = jarque_bera(n, g1, g2);
    let jb_p = chi_square_sf(jb, 2.0);

    Ok(SummaryStats {
        n,
        mean,
        sd: Some(sd),
        cv,
        median,
        skewness: Some(g1),
        excess_kurtosis: Some(g2),
        jb: Some(jb),
        jb_p: Some(jb_p),
        degenerate: false,
    })
}

/// Jarque-Bera statistic from sample size, skewness and EXCESS kurtosis.
pub fn jarque_bera(n: usize, skewness: f64, excess_kurtosis: f64) -> f64 {
    (n as f64 / 6.0) * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0)
}

/// Sample median: midpoint of the two central order statistics for even n.
pub fn median_of(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}
