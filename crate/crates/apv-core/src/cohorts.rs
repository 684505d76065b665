//! Cohort comparisons (orientation, subject dummies) and life-cycle curves
//! of median APV by the artist's age when the painting was executed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{AdjustedSale, ArtistRecord, SubjectFlag};
use crate::median::{
    median_diff_test_with, MedianSeEstimator, MedianTestResult, SignificanceThresholds,
};
use crate::stats::median_of;

/// Minimum sales on each side before a cohort comparison is tested; below
/// it the row is reported NA.
pub const MIN_COHORT_SIDE: usize = 10;

/// A yes/no cohort comparison row. `test` is `None` (NA) when either side
/// has fewer than [`MIN_COHORT_SIDE`] sales.
#[derive(Debug, Clone, Serialize)]
pub struct CohortComparison {
    pub cohort: String,
    pub yes_count: usize,
    pub yes_median: Option<f64>,
    pub no_count: usize,
    pub no_median: Option<f64>,
    pub test: Option<MedianTestResult>,
}

impl CohortComparison {
    pub fn is_na(&self) -> bool {
        self.test.is_none()
    }
}

/// Orientation partition: portrait means height > width, landscape means
/// width > height, and square paintings are excluded.
#[derive(Debug, Clone, Default)]
pub struct OrientationSplit {
    pub portrait: Vec<AdjustedSale>,
    pub landscape: Vec<AdjustedSale>,
    pub excluded_square: Vec<AdjustedSale>,
}

pub fn orientation_split(sales: &[AdjustedSale]) -> OrientationSplit {
    let mut split = OrientationSplit::default();
    for sale in sales {
        let r = &sale.record;
        if r.height_cm > r.width_cm {
            split.portrait.push(sale.clone());
        } else if r.width_cm > r.height_cm {
            split.landscape.push(sale.clone());
        } else {
            split.excluded_square.push(sale.clone());
        }
    }
    split
}

/// Portrait-versus-landscape comparison row (diff = portrait - landscape).
pub fn orientation_comparison(
    sales: &[AdjustedSale],
    estimator: &dyn MedianSeEstimator,
    thresholds: &SignificanceThresholds,
) -> Result<CohortComparison> {
    let split = orientation_split(sales);
    let yes: Vec<f64> = split.portrait.iter().map(|s| s.apv).collect();
    let no: Vec<f64> = split.landscape.iter().map(|s| s.apv).collect();
    compare_sides("portrait_vs_landscape", &yes, &no, estimator, thresholds)
}

/// Flag-versus-no-flag comparison (diff = yes - no).
pub fn subject_comparison(
    sales: &[AdjustedSale],
    flag: SubjectFlag,
    estimator: &dyn MedianSeEstimator,
    thresholds: &SignificanceThresholds,
) -> Result<CohortComparison> {
    let mut yes = Vec::new();
    let mut no = Vec::new();
    for sale in sales {
        if flag.get(&sale.record.subject_flags) {
            yes.push(sale.apv);
        } else {
            no.push(sale.apv);
        }
    }
    compare_sides(flag.name(), &yes, &no, estimator, thresholds)
}

fn compare_sides(
    cohort: &str,
    yes: &[f64],
    no: &[f64],
    estimator: &dyn MedianSeEstimator,
    thresholds: &SignificanceThresholds,
) -> Result<CohortComparison> {
    let maybe_median = |v: &[f64]| if v.is_empty() { None } else { Some(median_of(v)) };
    let test = if yes.len() < MIN_COHORT_SIDE || no.len() < MIN_COHORT_SIDE {
        None
    } else {
        Some(median_diff_test_with(yes, no, estimator, thresholds)?)
    };
    Ok(CohortComparison {
        cohort: cohort.to_string(),
        yes_count: yes.len(),
        yes_median: maybe_median(yes),
        no_count: no.len(),
        no_median: maybe_median(no),
        test,
    })
}

/// One point of a life-cycle curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LifecyclePoint {
    pub age: i32,
    pub median_apv: f64,
    pub n: usize,
}

/// Median APV as a function of age at execution.
#[derive(Debug, Clone, Serialize)]
pub struct LifecycleCurve {
    pub artist_id: String,
    /// Strictly increasing ages; every point has n >= min_count.
    pub points: Vec<LifecyclePoint>,
    pub min_count: usize,
    pub window: usize,
    /// Sales skipped because they carry no execution year.
    pub excluded_missing_execution: usize,
}

/// Build the curve: age = execution_year - birth_year, per-age median APV,
/// ages with fewer than `min_count` sales dropped, then an optional centered
/// moving median over `window` consecutive retained points (window = 1 means
/// no smoothing; at the ends the window is truncated to what exists).
pub fn lifecycle_curve(
    sales: &[AdjustedSale],
    artist: &ArtistRecord,
    min_count: usize,
    window: usize,
) -> Result<LifecycleCurve> {
    if window.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "smoothing window must be odd, got {window}"
        )));
    }
    let mut by_age: std::collections::BTreeMap<i32, Vec<f64>> = std::collections::BTreeMap::new();
    let mut missing = 0usize;
    for sale in sales {
        match sale.record.execution_year {
            Some(y) => by_age
                .entry(y - artist.birth_year)
                .or_default()
                .push(sale.apv),
            None => missing += 1,
        }
    }
    if by_age.is_empty() {
        return Err(Error::EmptyCurve);
    }

    let raw: Vec<LifecyclePoint> = by_age
        .iter()
        .filter(|(_, v)| v.len() >= min_count.max(1))
        .map(|(&age, v)| LifecyclePoint {
            age,
            median_apv: median_of(v),
            n: v.len(),
        })
        .collect();

    let points = if window <= 1 {
        raw
    } else {
        let half = window / 2;
        raw.iter()
            .enumerate()
            .map(|(i, p)| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(raw.len());
                let neighborhood: Vec<f64> =
                    raw[lo..hi].iter().map(|q| q.median_apv).collect();
                LifecyclePoint {
                    age: p.age,
                    median_apv: median_of(&neighborhood),
                    n: p.n,
                }
            })
            .collect()
    };

    Ok(LifecycleCurve {
        artist_id: artist.artist_id.clone(),
        points,
        min_count,
        window,
        excluded_missing_execution: missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{SaleRecord, SubjectFlags, YearMonth};
    use crate::median::McKeanSchrader;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn adjusted(
        id: usize,
        apv: f64,
        h: f64,
        w: f64,
        execution_year: Option<i32>,
        flags: SubjectFlags,
    ) -> AdjustedSale {
        let area = h * w;
        AdjustedSale {
            record: SaleRecord {
                sale_id: format!("s{id}"),
                artist_id: "artist".into(),
                painting_id: None,
                title: String::new(),
                sale_date: YearMonth::new(1990, 6).unwrap(),
                execution_year,
                hammer_price: None,
                premium_price: Some(apv * area),
                height_cm: h,
                width_cm: w,
                is_canvas: true,
                subject_flags: flags,
                auction_house: String::new(),
            },
            real_premium_price: apv * area,
            area_cm2: area,
            apv,
        }
    }

    fn artist(birth_year: i32) -> ArtistRecord {
        ArtistRecord {
            artist_id: "artist".into(),
            name: "Artist".into(),
            birth_year,
            death_year: None,
        }
    }

    #[test]
    fn orientation_definitions() {
        let sales = vec![
            adjusted(0, 10.0, 50.0, 40.0, None, SubjectFlags::default()),
            adjusted(1, 10.0, 40.0, 50.0, None, SubjectFlags::default()),
            adjusted(2, 10.0, 50.0, 50.0, None, SubjectFlags::default()),
        ];
        let split = orientation_split(&sales);
        assert_eq!(split.portrait.len(), 1);
        assert_eq!(split.portrait[0].record.sale_id, "s0");
        assert_eq!(split.landscape.len(), 1);
        assert_eq!(split.landscape[0].record.sale_id, "s1");
        assert_eq!(split.excluded_square.len(), 1);
        assert_eq!(split.excluded_square[0].record.sale_id, "s2");
    }

    #[test]
    fn orientation_split_is_a_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sales: Vec<AdjustedSale> = (0..200)
            .map(|i| {
                let h = rng.gen_range(1..20) as f64 * 10.0;
                let w = rng.gen_range(1..20) as f64 * 10.0;
                adjusted(i, 10.0, h, w, None, SubjectFlags::default())
            })
            .collect();
        let split = orientation_split(&sales);
        let total = split.portrait.len() + split.landscape.len() + split.excluded_square.len();
        assert_eq!(total, sales.len());
        let mut ids: Vec<&str> = split
            .portrait
            .iter()
            .chain(&split.landscape)
            .chain(&split.excluded_square)
            .map(|s| s.record.sale_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), sales.len());
    }

    fn flagged(still_life: bool) -> SubjectFlags {
        SubjectFlags {
            still_life,
            ..SubjectFlags::default()
        }
    }

    #[test]
    fn small_side_reports_na() {
        let mut sales: Vec<AdjustedSale> = (0..9)
            .map(|i| adjusted(i, 100.0 + i as f64, 50.0, 40.0, None, flagged(true)))
            .collect();
        sales.extend(
            (9..309).map(|i| adjusted(i, 50.0 + (i % 40) as f64, 50.0, 40.0, None, flagged(false))),
        );
        let row = subject_comparison(
            &sales,
            SubjectFlag::StillLife,
            &McKeanSchrader,
            &SignificanceThresholds::default(),
        )
        .unwrap();
        assert_eq!(row.yes_count, 9);
        assert_eq!(row.no_count, 300);
        assert!(row.is_na());
    }

    #[test]
    fn identical_sides_give_zero_diff() {
        let mut sales = Vec::new();
        for i in 0..20 {
            let apv = 10.0 + (i % 10) as f64;
            sales.push(adjusted(i, apv, 50.0, 40.0, None, flagged(true)));
            sales.push(adjusted(100 + i, apv, 50.0, 40.0, None, flagged(false)));
        }
        let row = subject_comparison(
            &sales,
            SubjectFlag::StillLife,
            &McKeanSchrader,
            &SignificanceThresholds::default(),
        )
        .unwrap();
        let test = row.test.unwrap();
        assert_eq!(test.diff, 0.0);
        assert_eq!(test.p_two_sided, 1.0);
    }

    #[test]
    fn shifted_side_detected_with_inverted_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base: Vec<f64> = (0..200).map(|_| 50.0 + rng.gen::<f64>() * 100.0).collect();
        let mut sales = Vec::new();
        for (i, &v) in base.iter().enumerate() {
            sales.push(adjusted(i, v + 100.0, 50.0, 40.0, None, flagged(true)));
            sales.push(adjusted(1000 + i, v, 50.0, 40.0, None, flagged(false)));
        }
        let row = subject_comparison(
            &sales,
            SubjectFlag::StillLife,
            &McKeanSchrader,
            &SignificanceThresholds::default(),
        )
        .unwrap();
        let test = row.test.as_ref().unwrap();
        assert!((test.diff - 100.0).abs() < 1e-9, "diff = {}", test.diff);
        assert!(test.p_two_sided < 0.01);

        // Inverting the flag negates the difference.
        let mut inverted = sales.clone();
        for s in &mut inverted {
            s.record.subject_flags.still_life = !s.record.subject_flags.still_life;
        }
        let inv = subject_comparison(
            &inverted,
            SubjectFlag::StillLife,
            &McKeanSchrader,
            &SignificanceThresholds::default(),
        )
        .unwrap();
        assert_eq!(inv.test.unwrap().diff, -test.diff);
    }

    #[test]
    fn age_is_execution_minus_birth() {
        let sales = vec![adjusted(0, 100.0, 50.0, 40.0, Some(1876), SubjectFlags::default())];
        let curve = lifecycle_curve(&sales, &artist(1841), 1, 1).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].age, 35);
    }

    #[test]
    fn single_age_median() {
        let sales = vec![
            adjusted(0, 100.0, 50.0, 40.0, Some(1900), SubjectFlags::default()),
            adjusted(1, 200.0, 50.0, 40.0, Some(1900), SubjectFlags::default()),
            adjusted(2, 300.0, 50.0, 40.0, Some(1900), SubjectFlags::default()),
        ];
        let curve = lifecycle_curve(&sales, &artist(1860), 1, 1).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].median_apv, 200.0);
        assert_eq!(curve.points[0].n, 3);
    }

    #[test]
    fn missing_execution_years_counted_and_empty_curve_errors() {
        let sales = vec![adjusted(0, 100.0, 50.0, 40.0, None, SubjectFlags::default())];
        assert!(matches!(
            lifecycle_curve(&sales, &artist(1860), 1, 1),
            Err(Error::EmptyCurve)
        ));

        let mixed = vec![
            adjusted(0, 100.0, 50.0, 40.0, None, SubjectFlags::default()),
            adjusted(1, 100.0, 50.0, 40.0, Some(1900), SubjectFlags::default()),
        ];
        let curve = lifecycle_curve(&mixed, &artist(1860), 1, 1).unwrap();
        assert_eq!(curve.excluded_missing_execution, 1);
    }

    #[test]
    fn min_count_drops_sparse_ages_and_curve_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut sales = Vec::new();
        let mut id = 0;
        for age in 25..45 {
            let n = rng.gen_range(1..12);
            for _ in 0..n {
                sales.push(adjusted(
                    id,
                    rng.gen::<f64>() * 500.0,
                    50.0,
                    40.0,
                    Some(1860 + age),
                    SubjectFlags::default(),
                ));
                id += 1;
            }
        }
        let curve = lifecycle_curve(&sales, &artist(1860), 5, 1).unwrap();
        for p in &curve.points {
            assert!(p.n >= 5);
            // Sort-based oracle per age.
            let mut apvs: Vec<f64> = sales
                .iter()
                .filter(|s| s.record.execution_year == Some(1860 + p.age))
                .map(|s| s.apv)
                .collect();
            apvs.sort_by(f64::total_cmp);
            let mid = apvs.len() / 2;
            let want = if apvs.len() % 2 == 1 {
                apvs[mid]
            } else {
                0.5 * (apvs[mid - 1] + apvs[mid])
            };
            assert_eq!(p.median_apv, want);
        }
        // Ages strictly increasing.
        for w in curve.points.windows(2) {
            assert!(w[0].age < w[1].age);
        }
    }

    #[test]
    fn curve_invariant_under_input_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut sales: Vec<AdjustedSale> = (0..120)
            .map(|i| {
                adjusted(
                    i,
                    rng.gen::<f64>() * 300.0,
                    50.0,
                    40.0,
                    Some(1880 + (i % 8) as i32),
                    SubjectFlags::default(),
                )
            })
            .collect();
        let a = lifecycle_curve(&sales, &artist(1850), 5, 3).unwrap();
        sales.reverse();
        let b = lifecycle_curve(&sales, &artist(1850), 5, 3).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.age, y.age);
            assert_eq!(x.median_apv, y.median_apv);
        }
    }

    #[test]
    fn unimodal_process_peaks_where_constructed() {
        // Noisy APV hump centered at age 40.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut sales = Vec::new();
        let mut id = 0;
        for age in 20..60 {
            for _ in 0..9 {
                let level = 500.0 - 0.9 * ((age - 40) * (age - 40)) as f64;
                let noise = (rng.gen::<f64>() - 0.5) * 60.0;
                sales.push(adjusted(
                    id,
                    (level + noise).max(1.0),
                    50.0,
                    40.0,
                    Some(1800 + age),
                    SubjectFlags::default(),
                ));
                id += 1;
            }
        }
        let window = 3;
        let curve = lifecycle_curve(&sales, &artist(1800), 5, window).unwrap();
        let peak = curve
            .points
            .iter()
            .max_by(|a, b| a.median_apv.total_cmp(&b.median_apv))
            .unwrap();
        assert!(
            (peak.age - 40).unsigned_abs() as usize <= window,
            "peak at {}",
            peak.age
        );
    }
}
