//! Hedonic pricing model: design-matrix construction over painting
//! characteristics and sale-year dummies, a stable least-squares fit with
//! the usual diagnostics, White's heteroscedasticity test, and the two
//! return estimators derived from the fit (representative prices evaluated
//! at yearly mean characteristics, and time-dummy market returns).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dist::{chi_square_sf, fisher_f_cdf, student_t_cdf};
use crate::error::{Error, Result};
use crate::ingest::{AdjustedSale, ArtistRecord, SubjectFlag};
use crate::linalg::{independent_columns, lstsq, Lstsq, Matrix, RANK_REL_TOL};
use crate::returns::{annual_avg_apv, return_series, AnnualLevel, ReturnSeries};

/// Polynomial degrees for the geometry regressors; `None` switches a term
/// off, `Some(d)` adds powers 1..=d.
#[derive(Debug, Clone, Serialize)]
pub struct GeometrySpec {
    pub area: Option<u32>,
    pub height: Option<u32>,
    pub width: Option<u32>,
    pub aspect_ratio: Option<u32>,
    pub diagonal: Option<u32>,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        // diagonal^2 would be exactly height^2 + width^2, so the diagonal
        // term defaults to degree 1 to keep the default design full rank.
        GeometrySpec {
            area: Some(2),
            height: Some(2),
            width: Some(2),
            aspect_ratio: Some(2),
            diagonal: Some(1),
        }
    }
}

/// Regression design: response is ln(real premium price); regressors are an
/// intercept, age-at-execution powers, geometry powers, medium and subject
/// dummies, optional painter dummies, and sale-year dummies with one
/// reference year omitted.
#[derive(Debug, Clone, Serialize)]
pub struct DesignSpec {
    pub age_degree: Option<u32>,
    pub geometry: GeometrySpec,
    pub canvas_dummy: bool,
    pub subject_dummies: Vec<SubjectFlag>,
    pub painter_dummies: bool,
    /// `None` picks the earliest sale year in the data.
    pub reference_year: Option<i32>,
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec {
            age_degree: Some(4),
            geometry: GeometrySpec::default(),
            canvas_dummy: true,
            subject_dummies: SubjectFlag::ALL.to_vec(),
            painter_dummies: false,
            reference_year: None,
        }
    }
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        let degrees = [
            ("age", self.age_degree),
            ("area", self.geometry.area),
            ("height", self.geometry.height),
            ("width", self.geometry.width),
            ("aspect_ratio", self.geometry.aspect_ratio),
            ("diagonal", self.geometry.diagonal),
        ];
        for (name, d) in degrees {
            if d == Some(0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} degree must be >= 1 when the term is active"
                )));
            }
        }
        Ok(())
    }
}

/// A sale excluded from the design, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct ExcludedRow {
    pub sale_id: String,
    pub reason: String,
}

/// Everything the fit and the return estimators need to know about the
/// design beyond the raw matrix.
#[derive(Debug, Clone, Serialize)]
pub struct DesignInfo {
    pub dummy_cols: Vec<bool>,
    pub year_cols: BTreeMap<i32, usize>,
    pub reference_year: i32,
    pub row_years: Vec<i32>,
}

/// Built design: matrix, response, labels, and bookkeeping.
pub struct DesignMatrix {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub labels: Vec<String>,
    pub info: DesignInfo,
    pub excluded: Vec<ExcludedRow>,
}

/// Assemble the design matrix from adjusted sales.
///
/// Rows lacking an execution year (or an artist birth year) are excluded
/// with a diagnostic when age terms are active. At least two distinct sale
/// years must remain.
pub fn build_design_matrix(
    sales: &[AdjustedSale],
    artists: &BTreeMap<String, ArtistRecord>,
    spec: &DesignSpec,
) -> Result<DesignMatrix> {
    spec.validate()?;

    let mut rows: Vec<&AdjustedSale> = Vec::with_capacity(sales.len());
    let mut excluded = Vec::new();
    for sale in sales {
        if spec.age_degree.is_some() {
            if sale.record.execution_year.is_none() {
                excluded.push(ExcludedRow {
                    sale_id: sale.record.sale_id.clone(),
                    reason: "missing execution year".into(),
                });
                continue;
            }
            if !artists.contains_key(sale.artist_id()) {
                excluded.push(ExcludedRow {
                    sale_id: sale.record.sale_id.clone(),
                    reason: format!("unknown artist '{}'", sale.artist_id()),
                });
                continue;
            }
        }
        rows.push(sale);
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData(
            "no usable rows for the design matrix".into(),
        ));
    }

    let mut years: Vec<i32> = rows.iter().map(|s| s.sale_year()).collect();
    years.sort_unstable();
    years.dedup();
    if years.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "design needs >= 2 distinct sale years, got {}",
            years.len()
        )));
    }
    let reference_year = match spec.reference_year {
        Some(y) if years.contains(&y) => y,
        Some(y) => {
            return Err(Error::InvalidConfig(format!(
                "reference year {y} has no sales"
            )))
        }
        None => years[0],
    };

    let mut painters: Vec<String> = rows.iter().map(|s| s.artist_id().to_string()).collect();
    painters.sort_unstable();
    painters.dedup();
    if spec.painter_dummies && painters.len() < 2 {
        return Err(Error::InvalidConfig(
            "painter dummies need at least two artists".into(),
        ));
    }

    let n = rows.len();
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut labels: Vec<String> = vec!["intercept".into()];
    let mut dummy_cols = vec![false];

    let push_powers = |columns: &mut Vec<Vec<f64>>,
                           labels: &mut Vec<String>,
                           dummy_cols: &mut Vec<bool>,
                           name: &str,
                           degree: u32,
                           raw: Vec<f64>| {
        for d in 1..=degree {
            columns.push(raw.iter().map(|v| v.powi(d as i32)).collect());
            labels.push(if d == 1 {
                name.to_string()
            } else {
                format!("{name}^{d}")
            });
            dummy_cols.push(false);
        }
    };

    if let Some(d) = spec.age_degree {
        let ages: Vec<f64> = rows
            .iter()
            .map(|s| {
                let birth = artists[s.artist_id()].birth_year;
                (s.record.execution_year.unwrap() - birth) as f64
            })
            .collect();
        push_powers(&mut columns, &mut labels, &mut dummy_cols, "age", d, ages);
    }
    type GeometryTerm = (&'static str, Option<u32>, fn(&AdjustedSale) -> f64);
    let geometry: [GeometryTerm; 5] = [
        ("area", spec.geometry.area, |s| s.area_cm2),
        ("height", spec.geometry.height, |s| s.record.height_cm),
        ("width", spec.geometry.width, |s| s.record.width_cm),
        ("aspect_ratio", spec.geometry.aspect_ratio, |s| {
            s.record.height_cm / s.record.width_cm
        }),
        ("diagonal", spec.geometry.diagonal, |s| {
            (s.record.height_cm * s.record.height_cm + s.record.width_cm * s.record.width_cm)
                .sqrt()
        }),
    ];
    for (name, degree, f) in geometry {
        if let Some(d) = degree {
            let raw: Vec<f64> = rows.iter().map(|s| f(s)).collect();
            push_powers(&mut columns, &mut labels, &mut dummy_cols, name, d, raw);
        }
    }
    if spec.canvas_dummy {
        columns.push(
            rows.iter()
                .map(|s| if s.record.is_canvas { 1.0 } else { 0.0 })
                .collect(),
        );
        labels.push("canvas".into());
        dummy_cols.push(true);
    }
    for flag in &spec.subject_dummies {
        columns.push(
            rows.iter()
                .map(|s| if flag.get(&s.record.subject_flags) { 1.0 } else { 0.0 })
                .collect(),
        );
        labels.push(format!("subject_{}", flag.name()));
        dummy_cols.push(true);
    }
    if spec.painter_dummies {
        for painter in painters.iter().skip(1) {
            columns.push(
                rows.iter()
                    .map(|s| if s.artist_id() == painter { 1.0 } else { 0.0 })
                    .collect(),
            );
            labels.push(format!("painter_{painter}"));
            dummy_cols.push(true);
        }
    }
    let mut year_cols = BTreeMap::new();
    for &year in years.iter().filter(|&&y| y != reference_year) {
        year_cols.insert(year, columns.len());
        columns.push(
            rows.iter()
                .map(|s| if s.sale_year() == year { 1.0 } else { 0.0 })
                .collect(),
        );
        labels.push(format!("year_{year}"));
        dummy_cols.push(true);
    }

    let y: Vec<f64> = rows.iter().map(|s| s.real_premium_price.ln()).collect();
    let row_years: Vec<i32> = rows.iter().map(|s| s.sale_year()).collect();

    Ok(DesignMatrix {
        x: Matrix::from_columns(&columns),
        y,
        labels,
        info: DesignInfo {
            dummy_cols,
            year_cols,
            reference_year,
            row_years,
        },
        excluded,
    })
}

/// Least-squares fit with the standard diagnostics. Column 0 is expected to
/// be the intercept; R-squared is computed about the response mean.
#[derive(Debug, Clone, Serialize)]
pub struct OlsFit {
    pub labels: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t_p: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_stat: f64,
    pub f_df: (usize, usize),
    pub f_p: f64,
    pub n: usize,
    pub k: usize,
    pub sigma2: f64,
    #[serde(skip)]
    pub x: Matrix,
    #[serde(skip)]
    pub y: Vec<f64>,
}

/// Fit by orthogonalization (never normal equations); the design must have
/// strictly more rows than columns and full column rank.
pub fn ols_fit(x: &Matrix, y: &[f64], labels: &[String]) -> Result<OlsFit> {
    let (n, cols) = (x.rows(), x.cols());
    assert_eq!(labels.len(), cols, "label/column mismatch");
    if n <= cols {
        return Err(Error::Underdetermined { rows: n, cols });
    }
    let solution = match lstsq(x, y, RANK_REL_TOL) {
        Lstsq::Solved(s) => s,
        Lstsq::RankDeficient { dependent, .. } => {
            return Err(Error::RankDeficient {
                columns: dependent.iter().map(|&j| labels[j].clone()).collect(),
            })
        }
    };

    let fitted = x.mul_vec(&solution.coef);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    if sst <= 0.0 {
        return Err(Error::InsufficientData(
            "response has zero variance".into(),
        ));
    }

    let k = cols - 1;
    let df2 = n - cols;
    let r2 = 1.0 - sse / sst;
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (df2 as f64);
    let sigma2 = sse / df2 as f64;

    let (f_stat, f_p) = if k == 0 {
        (f64::NAN, f64::NAN)
    } else if 1.0 - r2 <= 0.0 {
        // Exact fit: the ratio degenerates.
        (f64::INFINITY, 0.0)
    } else {
        let f = (r2 / k as f64) / ((1.0 - r2) / df2 as f64);
        (f, 1.0 - fisher_f_cdf(f, k as f64, df2 as f64))
    };

    let mut se = Vec::with_capacity(cols);
    let mut t_p = Vec::with_capacity(cols);
    for j in 0..cols {
        let s = (sigma2 * solution.xtx_inv_diag[j]).sqrt();
        se.push(s);
        let p = if s > 0.0 {
            let t = solution.coef[j] / s;
            2.0 * (1.0 - student_t_cdf(t.abs(), df2 as f64))
        } else if solution.coef[j] == 0.0 {
            1.0
        } else {
            0.0
        };
        t_p.push(p);
    }

    Ok(OlsFit {
        labels: labels.to_vec(),
        coef: solution.coef,
        se,
        t_p,
        residuals,
        fitted,
        r2,
        adj_r2,
        f_stat,
        f_df: (k, df2),
        f_p,
        n,
        k,
        sigma2,
        x: x.clone(),
        y: y.to_vec(),
    })
}

/// A fitted hedonic model: the OLS fit plus the design bookkeeping the
/// return estimators need.
pub struct HedonicFit {
    pub fit: OlsFit,
    pub info: DesignInfo,
}

/// Build and fit in one step.
pub fn fit_hedonic(design: &DesignMatrix) -> Result<HedonicFit> {
    Ok(HedonicFit {
        fit: ols_fit(&design.x, &design.y, &design.labels)?,
        info: design.info.clone(),
    })
}

/// White's heteroscedasticity test result.
#[derive(Debug, Clone, Serialize)]
pub struct WhiteTestResult {
    /// n times the auxiliary R-squared.
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Auxiliary regressors actually used (intercept not counted).
    pub aux_regressors: usize,
    /// Auxiliary columns dropped to restore full rank.
    pub dropped: Vec<String>,
}

/// White test on a hedonic fit (dummy columns contribute no squares).
pub fn white_test(fit: &HedonicFit) -> Result<WhiteTestResult> {
    white_test_columns(&fit.fit, &fit.info.dummy_cols)
}

/// White test on any OLS fit whose column 0 is the intercept. `dummy_cols`
/// marks 0/1 columns, which would duplicate themselves when squared.
pub fn white_test_columns(fit: &OlsFit, dummy_cols: &[bool]) -> Result<WhiteTestResult> {
    let x = &fit.x;
    let cols = x.cols();
    assert_eq!(dummy_cols.len(), cols, "dummy flag/column mismatch");
    let n = x.rows();

    // Auxiliary design: intercept, regressors, squares of non-dummies,
    // and all pairwise cross products.
    let mut aux: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut aux_labels: Vec<String> = vec!["intercept".into()];
    for j in 1..cols {
        aux.push(x.col(j).to_vec());
        aux_labels.push(fit.labels[j].clone());
    }
    for (j, &is_dummy) in dummy_cols.iter().enumerate().skip(1) {
        if !is_dummy {
            aux.push(x.col(j).iter().map(|v| v * v).collect());
            aux_labels.push(format!("{}^2", fit.labels[j]));
        }
    }
    for i in 1..cols {
        for j in i + 1..cols {
            let product: Vec<f64> = x
                .col(i)
                .iter()
                .zip(x.col(j))
                .map(|(a, b)| a * b)
                .collect();
            // Mutually exclusive dummies (two year dummies, say) multiply
            // to an identically zero column; skip those structural zeros
            // rather than counting them as auxiliary regressors.
            if product.iter().all(|&v| v == 0.0) {
                continue;
            }
            aux.push(product);
            aux_labels.push(format!("{}*{}", fit.labels[i], fit.labels[j]));
        }
    }

    if n < aux.len() + 2 {
        return Err(Error::InsufficientData(format!(
            "white test needs >= {} rows, has {n}",
            aux.len() + 2
        )));
    }

    // Reduce to a maximal independent set if the auxiliary design is
    // collinear (typical when dummies from one one-hot set meet).
    let aux_matrix = Matrix::from_columns(&aux);
    let keep = independent_columns(&aux_matrix, RANK_REL_TOL);
    let dropped: Vec<String> = (0..aux.len())
        .filter(|j| !keep.contains(j))
        .map(|j| aux_labels[j].clone())
        .collect();
    let kept_cols: Vec<Vec<f64>> = keep.iter().map(|&j| aux_matrix.col(j).to_vec()).collect();
    let reduced = Matrix::from_columns(&kept_cols);

    let response: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
    let mean_r = response.iter().sum::<f64>() / n as f64;
    let sst: f64 = response.iter().map(|v| (v - mean_r).powi(2)).sum();
    // Constant squared residuals, or residuals that are zero to solver
    // precision (an exact fit): nothing to explain.
    let y_scale = fit.y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if sst <= 0.0 || mean_r <= y_scale * 1e-24 {
        return Ok(WhiteTestResult {
            statistic: 0.0,
            df: keep.len().saturating_sub(1),
            p_value: 1.0,
            aux_regressors: keep.len().saturating_sub(1),
            dropped,
        });
    }

    let solution = match lstsq(&reduced, &response, RANK_REL_TOL) {
        Lstsq::Solved(s) => s,
        Lstsq::RankDeficient { dependent, .. } => {
            return Err(Error::RankDeficient {
                columns: dependent
                    .iter()
                    .map(|&j| aux_labels[keep[j]].clone())
                    .collect(),
            })
        }
    };
    let fitted = reduced.mul_vec(&solution.coef);
    let sse: f64 = response
        .iter()
        .zip(&fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let r2_aux = (1.0 - sse / sst).max(0.0);
    let df = keep.len() - 1;
    let statistic = n as f64 * r2_aux;
    Ok(WhiteTestResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as f64),
        aux_regressors: df,
        dropped,
    })
}

/// Column means of the design over each sale year's rows, with the row
/// count. Year dummies average to 1 for the year's own dummy and 0 for the
/// others, so the mean vector is the representative painting of that year.
pub fn yearly_mean_characteristics(fit: &HedonicFit) -> BTreeMap<i32, (Vec<f64>, usize)> {
    let x = &fit.fit.x;
    let mut out: BTreeMap<i32, (Vec<f64>, usize)> = BTreeMap::new();
    for (row, &year) in fit.info.row_years.iter().enumerate() {
        let entry = out.entry(year).or_insert_with(|| (vec![0.0; x.cols()], 0));
        for j in 0..x.cols() {
            entry.0[j] += x.get(row, j);
        }
        entry.1 += 1;
    }
    for (sums, count) in out.values_mut() {
        for v in sums.iter_mut() {
            *v /= *count as f64;
        }
    }
    out
}

/// Total-return estimator: the fitted model evaluated at each year's mean
/// characteristics gives a representative price P_i = exp(x_bar_i' beta);
/// returns follow the same consecutive-year gap policy as APV returns.
pub fn representative_returns(
    fit: &HedonicFit,
    yearly_means: &BTreeMap<i32, (Vec<f64>, usize)>,
) -> Result<ReturnSeries> {
    let levels: Vec<AnnualLevel> = yearly_means
        .iter()
        .map(|(&year, (mean_x, n))| {
            let log_p: f64 = mean_x
                .iter()
                .zip(&fit.fit.coef)
                .map(|(a, b)| a * b)
                .sum();
            AnnualLevel {
                year,
                level: log_p.exp(),
                n_sales: *n,
            }
        })
        .collect();
    return_series(&levels)
}

/// Market-return estimator from the time-dummy coefficients alone:
/// return i -> i+1 = exp(delta_{i+1} - delta_i) - 1, with the reference
/// year's delta fixed at zero.
pub fn time_dummy_returns(fit: &HedonicFit) -> Result<ReturnSeries> {
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for &y in &fit.info.row_years {
        *counts.entry(y).or_insert(0) += 1;
    }
    let levels: Vec<AnnualLevel> = counts
        .iter()
        .map(|(&year, &n)| {
            let delta = if year == fit.info.reference_year {
                0.0
            } else {
                fit.fit.coef[fit.info.year_cols[&year]]
            };
            AnnualLevel {
                year,
                level: delta.exp(),
                n_sales: n,
            }
        })
        .collect();
    return_series(&levels)
}

/// Side-by-side comparison of an APV return series against an HPM-based one.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_overlap: usize,
    pub correlation: f64,
    pub apv_avg_return: Option<f64>,
    pub apv_sd_return: Option<f64>,
    pub hpm_avg_return: Option<f64>,
    pub hpm_sd_return: Option<f64>,
}

/// Pearson correlation over the year pairs both series cover (at least
/// three required), plus each series' own average and standard deviation.
pub fn validate_against_apv(
    apv_returns: &ReturnSeries,
    hpm_returns: &ReturnSeries,
) -> Result<ValidationReport> {
    let hpm_by_pair: BTreeMap<(i32, i32), f64> = hpm_returns
        .returns
        .iter()
        .map(|r| ((r.from_year, r.to_year), r.value))
        .collect();
    let mut pairs = Vec::new();
    for r in &apv_returns.returns {
        if let Some(&h) = hpm_by_pair.get(&(r.from_year, r.to_year)) {
            pairs.push((r.value, h));
        }
    }
    if pairs.len() < 3 {
        return Err(Error::InsufficientOverlap {
            needed: 3,
            got: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (a, b) in &pairs {
        cov += (a - mean_a) * (b - mean_b);
        var_a += (a - mean_a).powi(2);
        var_b += (b - mean_b).powi(2);
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(Error::Domain(
            "zero return variance; correlation undefined".into(),
        ));
    }
    Ok(ValidationReport {
        n_overlap: pairs.len(),
        correlation: cov / (var_a.sqrt() * var_b.sqrt()),
        apv_avg_return: apv_returns.summary.avg_return,
        apv_sd_return: apv_returns.summary.sd_return,
        hpm_avg_return: hpm_returns.summary.avg_return,
        hpm_sd_return: hpm_returns.summary.sd_return,
    })
}

/// APV returns recomputed from the same sales that back a hedonic fit; a
/// convenience for side-by-side validation.
pub fn apv_returns_for(sales: &[AdjustedSale]) -> Result<ReturnSeries> {
    return_series(&annual_avg_apv(sales))
}
