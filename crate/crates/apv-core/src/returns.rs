//! Return-series construction from annual average APV levels, repeat-sales
//! subset diagnostics, and the rolling thresholded APV index.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{AdjustedSale, YearMonth};
use crate::median::{
    median_diff_test_with, MedianSeEstimator, MedianTestResult, SignificanceThresholds, MIN_GROUP,
};
use crate::stats::median_of;

/// One calendar-year level: arithmetic mean APV over that year's sales.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnnualLevel {
    pub year: i32,
    pub level: f64,
    pub n_sales: usize,
}

/// Year-to-year return between two consecutive present years.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReturnEntry {
    pub from_year: i32,
    pub to_year: i32,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReturnSummary {
    /// Arithmetic mean of the available year-to-year returns.
    pub avg_return: Option<f64>,
    /// Sample (n-1) standard deviation of those returns.
    pub sd_return: Option<f64>,
    /// final level / initial level - 1, across the whole span.
    pub cumulative_return: f64,
    pub initial_level: f64,
    pub final_level: f64,
}

/// Levels, the returns between consecutive present years, and summary
/// figures. Missing years produce no return entry and are listed in `gaps`
/// as the (from, to) pairs that were skipped.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnSeries {
    pub levels: Vec<AnnualLevel>,
    pub returns: Vec<ReturnEntry>,
    pub gaps: Vec<(i32, i32)>,
    pub summary: ReturnSummary,
}

/// Mean APV per calendar year, ascending; years without sales are absent.
pub fn annual_avg_apv(sales: &[AdjustedSale]) -> Vec<AnnualLevel> {
    let mut by_year: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for sale in sales {
        let e = by_year.entry(sale.sale_year()).or_insert((0.0, 0));
        e.0 += sale.apv;
        e.1 += 1;
    }
    by_year
        .into_iter()
        .map(|(year, (sum, n))| AnnualLevel {
            year,
            level: sum / n as f64,
            n_sales: n,
        })
        .collect()
}

/// Build the return series from annual levels (at least two required).
pub fn return_series(levels: &[AnnualLevel]) -> Result<ReturnSeries> {
    if levels.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "return series needs >= 2 annual levels, got {}",
            levels.len()
        )));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by_key(|l| l.year);

    let mut returns = Vec::new();
    let mut gaps = Vec::new();
    for w in sorted.windows(2) {
        if w[1].year == w[0].year + 1 {
            returns.push(ReturnEntry {
                from_year: w[0].year,
                to_year: w[1].year,
                value: w[1].level / w[0].level - 1.0,
            });
        } else {
            gaps.push((w[0].year, w[1].year));
        }
    }

    let (avg_return, sd_return) = summarize(&returns);
    let initial_level = sorted.first().unwrap().level;
    let final_level = sorted.last().unwrap().level;
    Ok(ReturnSeries {
        summary: ReturnSummary {
            avg_return,
            sd_return,
            cumulative_return: final_level / initial_level - 1.0,
            initial_level,
            final_level,
        },
        levels: sorted,
        returns,
        gaps,
    })
}

fn summarize(returns: &[ReturnEntry]) -> (Option<f64>, Option<f64>) {
    if returns.is_empty() {
        return (None, None);
    }
    let n = returns.len() as f64;
    let avg = returns.iter().map(|r| r.value).sum::<f64>() / n;
    let sd = if returns.len() >= 2 {
        Some(
            (returns.iter().map(|r| (r.value - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt(),
        )
    } else {
        None
    };
    (Some(avg), sd)
}

// ---------------------------------------------------------------------------
// Repeat sales
// ---------------------------------------------------------------------------

/// Strategy that maps a sale to the identity of the painting it sold.
pub trait RepeatMatcher {
    fn key(&self, sale: &AdjustedSale) -> String;
}

/// Uses the explicit painting id when present, otherwise a normalized
/// (artist, title, height, width) composite. Title normalization is
/// case-folding plus whitespace collapse.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultMatcher;

impl RepeatMatcher for DefaultMatcher {
    fn key(&self, sale: &AdjustedSale) -> String {
        let r = &sale.record;
        match &r.painting_id {
            Some(pid) => format!("pid:{}:{pid}", r.artist_id),
            None => {
                let title: String = r
                    .title
                    .to_lowercase()
                    .split_whitespace()
                    .collect::<Vec<_>>()
                    .join(" ");
                format!(
                    "key:{}:{title}:{:016x}:{:016x}",
                    r.artist_id,
                    r.height_cm.to_bits(),
                    r.width_cm.to_bits()
                )
            }
        }
    }
}

/// Per-artist all-sales versus repeat-sales comparison row.
#[derive(Debug, Clone, Serialize)]
pub struct RepeatSalesRow {
    pub artist_id: String,
    pub all_n: usize,
    pub all_median: f64,
    pub all_avg_return: Option<f64>,
    pub repeat_n: usize,
    pub repeat_median: Option<f64>,
    pub repeat_avg_return: Option<f64>,
    /// All-sales median minus repeat-sales median; `None` when a side is
    /// too small to test.
    pub test: Option<MedianTestResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepeatSalesReport {
    pub rows: Vec<RepeatSalesRow>,
    /// Set when the data contains no painting sold twice.
    pub no_repeats: bool,
}

/// Extract the repeat-sales subset (every sale of any painting observed at
/// least twice) and compare it per artist against the full data.
pub fn repeat_sales_subset(
    sales: &[AdjustedSale],
    matcher: &dyn RepeatMatcher,
    estimator: &dyn MedianSeEstimator,
    thresholds: &SignificanceThresholds,
) -> Result<(Vec<AdjustedSale>, RepeatSalesReport)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for sale in sales {
        *counts.entry(matcher.key(sale)).or_insert(0) += 1;
    }
    let subset: Vec<AdjustedSale> = sales
        .iter()
        .filter(|s| counts[&matcher.key(s)] >= 2)
        .cloned()
        .collect();

    let artists: BTreeSet<String> = sales.iter().map(|s| s.artist_id().to_string()).collect();
    let mut rows = Vec::new();
    for artist in artists {
        let all: Vec<AdjustedSale> = sales
            .iter()
            .filter(|s| s.artist_id() == artist)
            .cloned()
            .collect();
        let repeats: Vec<AdjustedSale> = subset
            .iter()
            .filter(|s| s.artist_id() == artist)
            .cloned()
            .collect();
        let all_apv: Vec<f64> = all.iter().map(|s| s.apv).collect();
        let repeat_apv: Vec<f64> = repeats.iter().map(|s| s.apv).collect();

        let avg_ret = |group: &[AdjustedSale]| -> Option<f64> {
            return_series(&annual_avg_apv(group))
                .ok()
                .and_then(|s| s.summary.avg_return)
        };
        let test = if all_apv.len() >= MIN_GROUP && repeat_apv.len() >= MIN_GROUP {
            Some(median_diff_test_with(
                &all_apv,
                &repeat_apv,
                estimator,
                thresholds,
            )?)
        } else {
            None
        };
        rows.push(RepeatSalesRow {
            artist_id: artist,
            all_n: all.len(),
            all_median: median_of(&all_apv),
            all_avg_return: avg_ret(&all),
            repeat_n: repeats.len(),
            repeat_median: if repeat_apv.is_empty() {
                None
            } else {
                Some(median_of(&repeat_apv))
            },
            repeat_avg_return: avg_ret(&repeats),
            test,
        });
    }
    let no_repeats = subset.is_empty();
    Ok((subset, RepeatSalesReport { rows, no_repeats }))
}

// ---------------------------------------------------------------------------
// Rolling index
// ---------------------------------------------------------------------------

/// Rule defining the rolling index: trailing window length, strict real
/// price floor, and an optional artist universe.
#[derive(Debug, Clone, Serialize)]
pub struct IndexRule {
    pub window_months: u32,
    pub min_price: f64,
    pub universe: Option<BTreeSet<String>>,
}

impl Default for IndexRule {
    fn default() -> Self {
        IndexRule {
            window_months: 12,
            min_price: 50_000.0,
            universe: None,
        }
    }
}

/// One index point; `level` is `None` when no sale qualifies in the window.
#[derive(Debug, Clone, Serialize)]
pub struct IndexPoint {
    pub month: YearMonth,
    pub level: Option<f64>,
    pub n_contributing: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexSeries {
    pub rule: IndexRule,
    pub points: Vec<IndexPoint>,
}

/// Rolling thresholded mean-APV index.
///
/// For each month m, the level is the arithmetic mean APV over qualifying
/// sales in the trailing window (m - window, m]. A sale qualifies when its
/// real premium price strictly exceeds `min_price` and, if a universe is
/// set, its artist belongs to it. Points run from the earliest qualifying
/// sale month to the latest one plus window - 1, so every sale's full
/// influence window is reported.
pub fn apv_index(sales: &[AdjustedSale], rule: &IndexRule) -> Result<IndexSeries> {
    if rule.window_months < 1 {
        return Err(Error::InvalidConfig(
            "index window must be at least one month".into(),
        ));
    }
    let qualifying: Vec<&AdjustedSale> = sales
        .iter()
        .filter(|s| s.real_premium_price > rule.min_price)
        .filter(|s| {
            rule.universe
                .as_ref()
                .is_none_or(|u| u.contains(s.artist_id()))
        })
        .collect();
    if qualifying.is_empty() {
        return Ok(IndexSeries {
            rule: rule.clone(),
            points: Vec::new(),
        });
    }

    let first = qualifying
        .iter()
        .map(|s| s.record.sale_date.index())
        .min()
        .unwrap();
    let last = qualifying
        .iter()
        .map(|s| s.record.sale_date.index())
        .max()
        .unwrap();
    let window = rule.window_months as i64;
    let span_end = last + window - 1;

    // Per-month totals over [first, span_end], then a sliding window sum.
    let span = (span_end - first + 1) as usize;
    let mut sums = vec![0.0; span];
    let mut counts = vec![0usize; span];
    for s in &qualifying {
        let i = (s.record.sale_date.index() - first) as usize;
        sums[i] += s.apv;
        counts[i] += 1;
    }

    let mut points = Vec::with_capacity(span);
    for (i, m) in (first..=span_end).enumerate() {
        let lo = i.saturating_sub(window as usize - 1);
        let (mut sum, mut n) = (0.0, 0usize);
        for k in lo..=i {
            sum += sums[k];
            n += counts[k];
        }
        points.push(IndexPoint {
            month: YearMonth::from_index(m),
            level: if n > 0 { Some(sum / n as f64) } else { None },
            n_contributing: n,
        });
    }
    Ok(IndexSeries {
        rule: rule.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{SaleRecord, SubjectFlags};
    use crate::median::McKeanSchrader;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sale_at(
        id: usize,
        artist: &str,
        date: (i32, u8),
        apv: f64,
        price: f64,
        painting: Option<&str>,
    ) -> AdjustedSale {
        let area = price / apv;
        AdjustedSale {
            record: SaleRecord {
                sale_id: format!("s{id}"),
                artist_id: artist.into(),
                painting_id: painting.map(str::to_string),
                title: format!("work {}", painting.unwrap_or("x")),
                sale_date: YearMonth::new(date.0, date.1).unwrap(),
                execution_year: None,
                hammer_price: None,
                premium_price: Some(price),
                height_cm: area.sqrt(),
                width_cm: area.sqrt(),
                is_canvas: true,
                subject_flags: SubjectFlags::default(),
                auction_house: String::new(),
            },
            real_premium_price: price,
            area_cm2: area,
            apv,
        }
    }

    #[test]
    fn annual_mean_and_missing_years() {
        let sales = vec![
            sale_at(0, "a", (1990, 3), 100.0, 50_000.0, None),
            sale_at(1, "a", (1990, 9), 300.0, 50_000.0, None),
            sale_at(2, "a", (1992, 1), 50.0, 50_000.0, None),
        ];
        let levels = annual_avg_apv(&sales);
        assert_eq!(levels.len(), 2);
        assert_eq!(levels[0].year, 1990);
        assert_eq!(levels[0].level, 200.0);
        assert_eq!(levels[0].n_sales, 2);
        assert_eq!(levels[1].year, 1992);
        assert_eq!(levels[1].level, 50.0);
    }

    fn level(year: i32, v: f64) -> AnnualLevel {
        AnnualLevel {
            year,
            level: v,
            n_sales: 1,
        }
    }

    #[test]
    fn simple_return_formula() {
        let series = return_series(&[level(1990, 200.0), level(1991, 250.0)]).unwrap();
        assert_eq!(series.returns.len(), 1);
        assert!((series.returns[0].value - 0.25).abs() < 1e-15);
        assert!((series.summary.cumulative_return - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reference_cumulative_pairs() {
        // 360 -> 533 and 227 -> 645, frozen reference pairs.
        let s = return_series(&[level(1985, 360.0), level(2012, 533.0)]).unwrap();
        assert!((s.summary.cumulative_return - 0.4806).abs() < 1e-4);
        let s = return_series(&[level(1985, 227.0), level(2012, 645.0)]).unwrap();
        assert!((s.summary.cumulative_return - 1.8414).abs() < 1e-4);
    }

    #[test]
    fn gaps_produce_no_returns() {
        let series = return_series(&[
            level(1990, 100.0),
            level(1991, 110.0),
            level(1994, 150.0),
            level(1995, 120.0),
        ])
        .unwrap();
        assert_eq!(series.returns.len(), 2);
        assert_eq!(series.gaps, vec![(1991, 1994)]);
        assert_eq!(series.summary.initial_level, 100.0);
        assert_eq!(series.summary.final_level, 120.0);
    }

    #[test]
    fn insufficient_levels_error() {
        assert!(matches!(
            return_series(&[level(1990, 100.0)]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn cumulative_identity_on_gap_free_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut levels = Vec::new();
        let mut v = 100.0;
        for (i, year) in (1980..2010).enumerate() {
            levels.push(level(year, v));
            v *= 1.0 + (rng.gen::<f64>() - 0.4) * 0.3;
            let _ = i;
        }
        let series = return_series(&levels).unwrap();
        assert!(series.gaps.is_empty());
        let chained: f64 = series.returns.iter().map(|r| 1.0 + r.value).product::<f64>() - 1.0;
        let direct = series.summary.cumulative_return;
        assert!(
            (chained - direct).abs() <= 1e-12 * direct.abs().max(1.0),
            "chained {chained} direct {direct}"
        );
    }

    #[test]
    fn price_scaling_leaves_returns_unchanged() {
        let sales: Vec<AdjustedSale> = (0..40)
            .map(|i| {
                sale_at(
                    i,
                    "a",
                    (1990 + (i % 5) as i32, 6),
                    100.0 + i as f64 * 7.0,
                    60_000.0,
                    None,
                )
            })
            .collect();
        let base = return_series(&annual_avg_apv(&sales)).unwrap();
        let scaled_sales: Vec<AdjustedSale> = sales
            .iter()
            .map(|s| {
                let mut c = s.clone();
                c.apv *= 3.0;
                c.real_premium_price *= 3.0;
                c
            })
            .collect();
        let scaled = return_series(&annual_avg_apv(&scaled_sales)).unwrap();
        for (a, b) in base.returns.iter().zip(&scaled.returns) {
            assert!((a.value - b.value).abs() <= 1e-12 * a.value.abs().max(1.0));
        }
        for (a, b) in base.levels.iter().zip(&scaled.levels) {
            assert!((b.level - 3.0 * a.level).abs() <= 1e-12 * (3.0 * a.level).abs());
        }
    }

    #[test]
    fn repeat_subset_membership() {
        let sales = vec![
            sale_at(0, "a", (1990, 5), 100.0, 60_000.0, Some("p1")),
            sale_at(1, "a", (1995, 5), 150.0, 90_000.0, Some("p1")),
            sale_at(2, "a", (1992, 5), 120.0, 70_000.0, Some("p2")),
        ];
        let (subset, report) = repeat_sales_subset(
            &sales,
            &DefaultMatcher,
            &McKeanSchrader,
            &SignificanceThresholds::default(),
        )
        .unwrap();
        assert_eq!(subset.len(), 2);
        assert!(subset.iter().all(|s| s.record.painting_id.as_deref() == Some("p1")));
        assert!(!report.no_repeats);
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].all_n, 3);
        assert_eq!(report.rows[0].repeat_n, 2);
    }

    #[test]
    fn no_repeats_flagged() {
        let sales = vec![
            sale_at(0, "a", (1990, 5), 100.0, 60_000.0, Some("p1")),
            sale_at(1, "a", (1995, 5), 150.0, 90_000.0, Some("p2")),
        ];
        let (subset, report) = repeat_sales_subset(
            &sales,
            &DefaultMatcher,
            &McKeanSchrader,
            &SignificanceThresholds::default(),
        )
        .unwrap();
        assert!(subset.is_empty());
        assert!(report.no_repeats);
    }

    #[test]
    fn composite_key_matches_normalized_title() {
        let mut a = sale_at(0, "a", (1990, 5), 100.0, 60_000.0, None);
        let mut b = sale_at(1, "a", (1995, 5), 150.0, 60_000.0, None);
        a.record.title = "Le  Jardin".into();
        b.record.title = "le jardin".into();
        b.record.height_cm = a.record.height_cm;
        b.record.width_cm = a.record.width_cm;
        let (subset, _) = repeat_sales_subset(
            &[a, b],
            &DefaultMatcher,
            &McKeanSchrader,
            &SignificanceThresholds::default(),
        )
        .unwrap();
        assert_eq!(subset.len(), 2);
    }

    #[test]
    fn subset_is_closed_over_paintings() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut sales = Vec::new();
        for i in 0..60 {
            let painting = format!("p{}", rng.gen_range(0..25));
            sales.push(sale_at(
                i,
                "a",
                (1985 + rng.gen_range(0..20), 6),
                rng.gen_range(50.0..500.0),
                60_000.0,
                Some(&painting),
            ));
        }
        let (subset, _) = repeat_sales_subset(
            &sales,
            &DefaultMatcher,
            &McKeanSchrader,
            &SignificanceThresholds::default(),
        )
        .unwrap();
        let mut total_per_painting: BTreeMap<String, usize> = BTreeMap::new();
        for s in &sales {
            *total_per_painting
                .entry(s.record.painting_id.clone().unwrap())
                .or_insert(0) += 1;
        }
        let mut subset_per_painting: BTreeMap<String, usize> = BTreeMap::new();
        for s in &subset {
            *subset_per_painting
                .entry(s.record.painting_id.clone().unwrap())
                .or_insert(0) += 1;
        }
        for (p, &n) in &subset_per_painting {
            assert_eq!(n, total_per_painting[p], "painting {p} not closed");
            assert!(n >= 2);
        }
    }

    #[test]
    fn index_mean_and_strict_threshold() {
        let rule = IndexRule {
            window_months: 12,
            min_price: 50_000.0,
            universe: None,
        };
        let sales = vec![
            sale_at(0, "a", (2000, 3), 100.0, 60_000.0, None),
            sale_at(1, "a", (2000, 7), 200.0, 70_000.0, None),
            // Exactly at the floor: excluded under the strict rule.
            sale_at(2, "a", (2000, 8), 900.0, 50_000.0, None),
        ];
        let series = apv_index(&sales, &rule).unwrap();
        let at = |y: i32, m: u8| {
            series
                .points
                .iter()
                .find(|p| p.month == YearMonth::new(y, m).unwrap())
                .unwrap()
        };
        assert_eq!(at(2000, 7).level, Some(150.0));
        assert_eq!(at(2000, 8).level, Some(150.0));
        assert_eq!(at(2000, 3).level, Some(100.0));
    }

    #[test]
    fn single_sale_spans_full_window() {
        let rule = IndexRule {
            window_months: 12,
            min_price: 0.0,
            universe: None,
        };
        let sales = vec![sale_at(0, "a", (2001, 4), 77.0, 10_000.0, None)];
        let series = apv_index(&sales, &rule).unwrap();
        assert_eq!(series.points.len(), 12);
        assert!(series.points.iter().all(|p| p.level == Some(77.0)));
        assert_eq!(series.points[0].month, YearMonth::new(2001, 4).unwrap());
        assert_eq!(series.points[11].month, YearMonth::new(2002, 3).unwrap());
    }

    #[test]
    fn gap_months_marked() {
        let rule = IndexRule {
            window_months: 2,
            min_price: 0.0,
            universe: None,
        };
        let sales = vec![
            sale_at(0, "a", (2000, 1), 10.0, 1000.0, None),
            sale_at(1, "a", (2000, 6), 20.0, 1000.0, None),
        ];
        let series = apv_index(&sales, &rule).unwrap();
        let at = |m: u8| &series.points[(m - 1) as usize];
        assert_eq!(at(1).level, Some(10.0));
        assert_eq!(at(2).level, Some(10.0));
        assert_eq!(at(3).level, None);
        assert_eq!(at(3).n_contributing, 0);
        assert_eq!(at(6).level, Some(20.0));
        assert_eq!(at(7).level, Some(20.0));
    }

    #[test]
    fn universe_filter_applies() {
        let rule = IndexRule {
            window_months: 3,
            min_price: 0.0,
            universe: Some(["a".to_string()].into_iter().collect()),
        };
        let sales = vec![
            sale_at(0, "a", (2000, 1), 10.0, 1000.0, None),
            sale_at(1, "b", (2000, 1), 99.0, 1000.0, None),
        ];
        let series = apv_index(&sales, &rule).unwrap();
        assert_eq!(series.points[0].level, Some(10.0));
    }

    #[test]
    fn index_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let sales: Vec<AdjustedSale> = (0..300)
            .map(|i| {
                sale_at(
                    i,
                    if i % 3 == 0 { "a" } else { "b" },
                    (1995 + rng.gen_range(0..8), rng.gen_range(1..13)),
                    rng.gen_range(1.0..900.0),
                    rng.gen_range(20_000.0..200_000.0),
                    None,
                )
            })
            .collect();
        let rule = IndexRule {
            window_months: 12,
            min_price: 50_000.0,
            universe: None,
        };
        let series = apv_index(&sales, &rule).unwrap();
        for p in &series.points {
            // Oracle: filter-and-average straight off the raw list.
            let m = p.month.index();
            let in_window: Vec<f64> = sales
                .iter()
                .filter(|s| s.real_premium_price > rule.min_price)
                .filter(|s| {
                    let d = s.record.sale_date.index();
                    d > m - 12 && d <= m
                })
                .map(|s| s.apv)
                .collect();
            match p.level {
                None => assert!(in_window.is_empty()),
                Some(level) => {
                    let want = in_window.iter().sum::<f64>() / in_window.len() as f64;
                    assert!((level - want).abs() < 1e-12 * want.abs().max(1.0));
                    assert_eq!(p.n_contributing, in_window.len());
                }
            }
        }
    }
}
