//! Subcommand implementations: each loads the shared pipeline (parse,
//! deflate, filter), runs one analysis, and emits CSV + JSON (+ plot-data)
//! artifacts through the [`Emitter`].

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Map, Value};

use apv_core::cohorts::{
    lifecycle_curve, orientation_comparison, subject_comparison, CohortComparison, LifecycleCurve,
};
use apv_core::hedonic::{
    build_design_matrix, fit_hedonic, representative_returns, time_dummy_returns,
    validate_against_apv, white_test, yearly_mean_characteristics, DesignSpec, HedonicFit,
    ValidationReport, WhiteTestResult,
};
use apv_core::ingest::{
    apply_filters, parse_artists_csv, parse_cpi_csv, parse_sales_csv, to_real_premium,
    AdjustedSale, ArtistRecord, CpiTable, DropReason, RowDiagnostic, SalesSchema,
};
use apv_core::median::{pairwise_median_matrix_with, MedianSeEstimator, MedianTestResult};
use apv_core::returns::{
    annual_avg_apv, apv_index, repeat_sales_subset, return_series, DefaultMatcher, ReturnSeries,
};
use apv_core::stats::describe;
use apv_core::SignificanceThresholds;

use crate::config::RunConfig;
use crate::report::{fmt6, fmt_opt, json_num, json_opt, Emitter};

/// Data and settings shared by every subcommand.
pub struct Pipeline {
    pub config: RunConfig,
    pub sales: Vec<AdjustedSale>,
    pub dropped: Vec<(AdjustedSale, DropReason)>,
    pub diagnostics: Vec<RowDiagnostic>,
    pub artists: BTreeMap<String, ArtistRecord>,
    pub thresholds: SignificanceThresholds,
    pub estimator: Box<dyn MedianSeEstimator>,
}

impl Pipeline {
    pub fn load(config: RunConfig) -> Result<Pipeline> {
        let open = |path: &Path| -> Result<File> {
            File::open(path).with_context(|| format!("cannot open {}", path.display()))
        };
        let (records, diagnostics) =
            parse_sales_csv(open(&config.paths.sales)?, &SalesSchema::default())?;
        let cpi_entries = parse_cpi_csv(open(&config.paths.cpi)?)?;
        let cpi = CpiTable::new(config.base_month()?, cpi_entries)?;
        let artists = parse_artists_csv(open(&config.paths.artists)?)?;
        let schedule = config.premium_schedule()?;

        let mut adjusted = Vec::with_capacity(records.len());
        for record in &records {
            adjusted.push(to_real_premium(record, &cpi, &schedule)?);
        }
        let (sales, dropped) = apply_filters(adjusted, &config.filter_config()?);
        if sales.is_empty() {
            bail!("no sales remain after filtering");
        }
        let thresholds = config.thresholds()?;
        let estimator = config.estimator()?;
        Ok(Pipeline {
            config,
            sales,
            dropped,
            diagnostics,
            artists,
            thresholds,
            estimator,
        })
    }

    /// Distinct artist ids among kept sales, sorted.
    pub fn artist_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sales
            .iter()
            .map(|s| s.artist_id().to_string())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn sales_of(&self, artist: &str) -> Vec<AdjustedSale> {
        self.sales
            .iter()
            .filter(|s| s.artist_id() == artist)
            .cloned()
            .collect()
    }

    /// Kept sales, or one artist's when a filter is given (errors if empty).
    pub fn select(&self, artist: Option<&str>) -> Result<Vec<AdjustedSale>> {
        match artist {
            None => Ok(self.sales.clone()),
            Some(id) => {
                let subset = self.sales_of(id);
                if subset.is_empty() {
                    bail!("no kept sales for artist '{id}'");
                }
                Ok(subset)
            }
        }
    }

    /// Ingest/filter tallies attached to every JSON report.
    pub fn run_block(&self) -> Value {
        let reason_count = |r: DropReason| self.dropped.iter().filter(|(_, d)| *d == r).count();
        json!({
            "n_rows_kept": self.sales.len(),
            "n_row_diagnostics": self.diagnostics.len(),
            "n_dropped_price": reason_count(DropReason::PriceBelowMinimum),
            "n_dropped_apv": reason_count(DropReason::ApvBelowMinimum),
            "n_dropped_window": reason_count(DropReason::OutsideWindow),
        })
    }

    fn born_died(&self, artist: &str) -> (String, String) {
        match self.artists.get(artist) {
            Some(a) => (
                a.birth_year.to_string(),
                a.death_year.map_or_else(|| "NA".into(), |d| d.to_string()),
            ),
            None => ("NA".into(), "NA".into()),
        }
    }
}

fn test_columns(test: &Option<MedianTestResult>) -> [String; 3] {
    match test {
        Some(t) => [
            fmt6(t.diff),
            fmt6(t.p_two_sided),
            t.code.symbol().to_string(),
        ],
        None => ["NA".into(), "NA".into(), "NA".into()],
    }
}

fn test_json(test: &Option<MedianTestResult>) -> Value {
    match test {
        None => Value::Null,
        Some(t) => json!({
            "median_a": json_num(t.median_a),
            "median_b": json_num(t.median_b),
            "diff": json_num(t.diff),
            "se_diff": json_num(t.se_diff),
            "z": json_num(t.z),
            "p_two_sided": json_num(t.p_two_sided),
            "code": t.code.symbol(),
        }),
    }
}

// ---------------------------------------------------------------------------
// describe
// ---------------------------------------------------------------------------

pub fn cmd_describe(p: &Pipeline, em: &mut Emitter, artist: Option<&str>) -> Result<()> {
    let mut rows = Vec::new();
    let mut blocks = Map::new();

    let mut emit_group = |label: &str, sales: &[AdjustedSale], p: &Pipeline| -> Result<()> {
        let apvs: Vec<f64> = sales.iter().map(|s| s.apv).collect();
        let stats = describe(&apvs)?;
        let first = sales.iter().map(|s| s.record.sale_date).min().unwrap();
        let last = sales.iter().map(|s| s.record.sale_date).max().unwrap();
        let (born, died) = p.born_died(label);
        rows.push(vec![
            label.to_string(),
            born,
            died,
            stats.n.to_string(),
            first.to_string(),
            last.to_string(),
            fmt6(stats.mean),
            fmt_opt(stats.sd),
            fmt_opt(stats.cv),
            fmt6(stats.median),
            fmt_opt(stats.skewness),
            fmt_opt(stats.excess_kurtosis),
            fmt_opt(stats.jb),
            fmt_opt(stats.jb_p),
        ]);
        blocks.insert(
            label.to_string(),
            json!({
                "n": stats.n,
                "period": format!("{first}..{last}"),
                "avg_apv": json_num(stats.mean),
                "sd_apv": json_opt(stats.sd),
                "cv": json_opt(stats.cv),
                "median_apv": json_num(stats.median),
                "skewness": json_opt(stats.skewness),
                "excess_kurtosis": json_opt(stats.excess_kurtosis),
                "jarque_bera": json_opt(stats.jb),
                "jb_p": json_opt(stats.jb_p),
                "degenerate": stats.degenerate,
            }),
        );
        Ok(())
    };

    match artist {
        Some(id) => emit_group(id, &p.select(Some(id))?, p)?,
        None => {
            emit_group("all", &p.sales, p)?;
            for id in p.artist_ids() {
                emit_group(&id, &p.sales_of(&id), p)?;
            }
        }
    }

    em.csv(
        "describe.csv",
        &[
            "artist",
            "born",
            "died",
            "n_sales",
            "period_start",
            "period_end",
            "avg_apv",
            "sd_apv",
            "cv",
            "median_apv",
            "skewness",
            "excess_kurtosis",
            "jarque_bera",
            "jb_p",
        ],
        &rows,
    )?;
    em.json(
        "describe.json",
        json!({ "run": p.run_block(), "summaries": Value::Object(blocks) }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// compare-artists
// ---------------------------------------------------------------------------

pub fn cmd_compare_artists(p: &Pipeline, em: &mut Emitter) -> Result<()> {
    let mut groups = BTreeMap::new();
    for id in p.artist_ids() {
        groups.insert(id.clone(), p.sales_of(&id).iter().map(|s| s.apv).collect());
    }
    let matrix = pairwise_median_matrix_with(&groups, p.estimator.as_ref(), &p.thresholds)?;

    // Matrix table layout: diagonal medians, coded lower triangle.
    let mut header: Vec<&str> = vec!["artist"];
    header.extend(matrix.labels.iter().map(String::as_str));
    let mut rows = Vec::new();
    for (i, label) in matrix.labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        for j in 0..matrix.labels.len() {
            row.push(if j < i {
                let cell = matrix.cell(i, j).unwrap();
                match cell.code {
                    apv_core::SignificanceCode::NotSignificant => "NS".to_string(),
                    code => format!("{}{}", fmt6(cell.diff), code.symbol()),
                }
            } else if j == i {
                fmt6(matrix.medians[i])
            } else {
                String::new()
            });
        }
        rows.push(row);
    }
    em.csv("compare_artists.csv", &header, &rows)?;

    let cells: Vec<Value> = (0..matrix.labels.len())
        .flat_map(|i| {
            let matrix = &matrix;
            (0..i).map(move |j| {
                json!({
                    "row": matrix.labels[i],
                    "column": matrix.labels[j],
                    "test": test_json(&Some(matrix.cell(i, j).unwrap().clone())),
                })
            })
        })
        .collect();
    em.json(
        "compare_artists.json",
        json!({
            "run": p.run_block(),
            "labels": matrix.labels,
            "medians": matrix.medians.iter().map(|&m| json_num(m)).collect::<Vec<_>>(),
            "cells": cells,
            "excluded": matrix
                .excluded
                .iter()
                .map(|(l, r)| json!({ "label": l, "reason": r }))
                .collect::<Vec<_>>(),
        }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// cohorts
// ---------------------------------------------------------------------------

pub fn cmd_cohorts(p: &Pipeline, em: &mut Emitter, artist: Option<&str>) -> Result<()> {
    let ids = match artist {
        Some(id) => {
            p.select(Some(id))?;
            vec![id.to_string()]
        }
        None => p.artist_ids(),
    };

    let comparison_row = |id: &str, c: &CohortComparison| -> Vec<String> {
        let [diff, pval, code] = test_columns(&c.test);
        vec![
            id.to_string(),
            c.yes_count.to_string(),
            fmt_opt(c.yes_median),
            c.no_count.to_string(),
            fmt_opt(c.no_median),
            diff,
            pval,
            code,
        ]
    };
    let comparison_json = |c: &CohortComparison| -> Value {
        json!({
            "cohort": c.cohort,
            "yes_count": c.yes_count,
            "yes_median": json_opt(c.yes_median),
            "no_count": c.no_count,
            "no_median": json_opt(c.no_median),
            "na": c.is_na(),
            "test": test_json(&c.test),
        })
    };

    let mut orientation_rows = Vec::new();
    let mut subject_rows: BTreeMap<&str, Vec<Vec<String>>> = BTreeMap::new();
    let mut blocks = Map::new();
    for id in &ids {
        let sales = p.sales_of(id);
        let orientation = orientation_comparison(&sales, p.estimator.as_ref(), &p.thresholds)?;
        orientation_rows.push(comparison_row(id, &orientation));
        let mut artist_block = Map::new();
        artist_block.insert("orientation".into(), comparison_json(&orientation));
        for flag in apv_core::SubjectFlag::ALL {
            let cmp = subject_comparison(&sales, flag, p.estimator.as_ref(), &p.thresholds)?;
            subject_rows
                .entry(flag.name())
                .or_default()
                .push(comparison_row(id, &cmp));
            artist_block.insert(flag.name().into(), comparison_json(&cmp));
        }
        blocks.insert(id.clone(), Value::Object(artist_block));
    }

    em.csv(
        "cohorts_orientation.csv",
        &[
            "artist",
            "portrait_n",
            "portrait_median",
            "landscape_n",
            "landscape_median",
            "diff",
            "p_value",
            "code",
        ],
        &orientation_rows,
    )?;
    for (flag, rows) in subject_rows {
        em.csv(
            &format!("cohorts_subject_{flag}.csv"),
            &[
                "artist",
                "yes_n",
                "yes_median",
                "no_n",
                "no_median",
                "diff",
                "p_value",
                "code",
            ],
            &rows,
        )?;
    }
    em.json(
        "cohorts.json",
        json!({ "run": p.run_block(), "artists": Value::Object(blocks) }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// lifecycle
// ---------------------------------------------------------------------------

pub fn cmd_lifecycle(
    p: &Pipeline,
    em: &mut Emitter,
    artist: Option<&str>,
    min_count: usize,
    window: usize,
) -> Result<()> {
    let ids = match artist {
        Some(id) => vec![id.to_string()],
        None => p.artist_ids(),
    };
    let mut curves: Vec<LifecycleCurve> = Vec::new();
    let mut skipped = Vec::new();
    for id in &ids {
        let Some(artist_record) = p.artists.get(id) else {
            skipped.push(json!({ "artist": id, "reason": "no artist record" }));
            continue;
        };
        let sales = p.sales_of(id);
        if sales.is_empty() {
            skipped.push(json!({ "artist": id, "reason": "no kept sales" }));
            continue;
        }
        match lifecycle_curve(&sales, artist_record, min_count, window) {
            Ok(curve) => curves.push(curve),
            Err(e) => skipped.push(json!({ "artist": id, "reason": e.to_string() })),
        }
    }
    if curves.is_empty() && artist.is_some() {
        bail!("no life-cycle curve for the requested artist");
    }

    let mut blocks = Map::new();
    for curve in &curves {
        let rows: Vec<Vec<String>> = curve
            .points
            .iter()
            .map(|pt| {
                vec![
                    pt.age.to_string(),
                    fmt6(pt.median_apv),
                    pt.n.to_string(),
                ]
            })
            .collect();
        em.csv(
            &format!("lifecycle_{}.csv", curve.artist_id),
            &["age", "median_apv", "n"],
            &rows,
        )?;
        blocks.insert(
            curve.artist_id.clone(),
            json!({
                "min_count": curve.min_count,
                "window": curve.window,
                "excluded_missing_execution": curve.excluded_missing_execution,
                "points": curve
                    .points
                    .iter()
                    .map(|pt| json!({ "age": pt.age, "median_apv": json_num(pt.median_apv), "n": pt.n }))
                    .collect::<Vec<_>>(),
            }),
        );
    }
    em.json(
        "lifecycle.json",
        json!({ "run": p.run_block(), "curves": Value::Object(blocks), "skipped": skipped }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// returns
// ---------------------------------------------------------------------------

fn return_series_json(series: &ReturnSeries) -> Value {
    json!({
        "levels": series
            .levels
            .iter()
            .map(|l| json!({ "year": l.year, "level": json_num(l.level), "n_sales": l.n_sales }))
            .collect::<Vec<_>>(),
        "returns": series
            .returns
            .iter()
            .map(|r| json!({ "from": r.from_year, "to": r.to_year, "value": json_num(r.value) }))
            .collect::<Vec<_>>(),
        "gaps": series.gaps,
        "summary": {
            "avg_return": json_opt(series.summary.avg_return),
            "sd_return": json_opt(series.summary.sd_return),
            "cumulative_return": json_num(series.summary.cumulative_return),
            "initial_level": json_num(series.summary.initial_level),
            "final_level": json_num(series.summary.final_level),
        },
    })
}

pub fn cmd_returns(p: &Pipeline, em: &mut Emitter, artist: Option<&str>) -> Result<()> {
    let mut targets: Vec<(String, Vec<AdjustedSale>)> = Vec::new();
    match artist {
        Some(id) => targets.push((id.to_string(), p.select(Some(id))?)),
        None => {
            targets.push(("all".to_string(), p.sales.clone()));
            for id in p.artist_ids() {
                let sales = p.sales_of(&id);
                targets.push((id, sales));
            }
        }
    }

    let mut rows = Vec::new();
    let mut blocks = Map::new();
    for (label, sales) in &targets {
        let levels = annual_avg_apv(sales);
        let level_rows: Vec<Vec<String>> = levels
            .iter()
            .map(|l| vec![l.year.to_string(), fmt6(l.level), l.n_sales.to_string()])
            .collect();
        em.csv(
            &format!("returns_levels_{label}.csv"),
            &["year", "avg_apv", "n_sales"],
            &level_rows,
        )?;

        match return_series(&levels) {
            Ok(series) => {
                rows.push(vec![
                    label.clone(),
                    series.levels.len().to_string(),
                    fmt_opt(series.summary.avg_return),
                    fmt_opt(series.summary.sd_return),
                    fmt6(series.summary.cumulative_return),
                    fmt6(series.summary.initial_level),
                    fmt6(series.summary.final_level),
                    series.levels.first().unwrap().year.to_string(),
                    series.levels.last().unwrap().year.to_string(),
                    series.gaps.len().to_string(),
                ]);
                blocks.insert(label.clone(), return_series_json(&series));
            }
            Err(e) => {
                rows.push(vec![
                    label.clone(),
                    levels.len().to_string(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                ]);
                blocks.insert(label.clone(), json!({ "error": e.to_string() }));
            }
        }
    }

    em.csv(
        "returns.csv",
        &[
            "group",
            "n_years",
            "avg_return",
            "sd_return",
            "cumulative_return",
            "initial_level",
            "final_level",
            "initial_year",
            "final_year",
            "n_gaps",
        ],
        &rows,
    )?;
    em.json(
        "returns.json",
        json!({ "run": p.run_block(), "series": Value::Object(blocks) }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// repeat-sales
// ---------------------------------------------------------------------------

pub fn cmd_repeat_sales(p: &Pipeline, em: &mut Emitter) -> Result<()> {
    let (subset, report) = repeat_sales_subset(
        &p.sales,
        &DefaultMatcher,
        p.estimator.as_ref(),
        &p.thresholds,
    )?;

    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    for row in &report.rows {
        let [diff, pval, code] = test_columns(&row.test);
        rows.push(vec![
            row.artist_id.clone(),
            row.all_n.to_string(),
            fmt6(row.all_median),
            fmt_opt(row.all_avg_return),
            row.repeat_n.to_string(),
            fmt_opt(row.repeat_median),
            fmt_opt(row.repeat_avg_return),
            diff,
            pval,
            code,
        ]);
        blocks.push(json!({
            "artist": row.artist_id,
            "all": {
                "n": row.all_n,
                "median_apv": json_num(row.all_median),
                "avg_return": json_opt(row.all_avg_return),
            },
            "repeat": {
                "n": row.repeat_n,
                "median_apv": json_opt(row.repeat_median),
                "avg_return": json_opt(row.repeat_avg_return),
            },
            "test": test_json(&row.test),
        }));
    }
    em.csv(
        "repeat_sales.csv",
        &[
            "artist",
            "all_n",
            "all_median",
            "all_avg_return",
            "repeat_n",
            "repeat_median",
            "repeat_avg_return",
            "diff",
            "p_value",
            "code",
        ],
        &rows,
    )?;
    em.json(
        "repeat_sales.json",
        json!({
            "run": p.run_block(),
            "no_repeats": report.no_repeats,
            "subset_size": subset.len(),
            "rows": blocks,
        }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// hpm
// ---------------------------------------------------------------------------

/// Parse `--degrees` overrides like "age=4,area=2,height=0" (0 disables).
pub fn apply_degree_overrides(spec: &mut DesignSpec, arg: &str) -> Result<()> {
    for pair in arg.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("bad --degrees entry '{pair}' (want key=value)"))?;
        let degree: u32 = value
            .trim()
            .parse()
            .with_context(|| format!("bad degree '{value}' for '{key}'"))?;
        let slot = match key.trim() {
            "age" => &mut spec.age_degree,
            "area" => &mut spec.geometry.area,
            "height" => &mut spec.geometry.height,
            "width" => &mut spec.geometry.width,
            "aspect_ratio" => &mut spec.geometry.aspect_ratio,
            "diagonal" => &mut spec.geometry.diagonal,
            other => bail!("unknown --degrees key '{other}'"),
        };
        *slot = if degree == 0 { None } else { Some(degree) };
    }
    Ok(())
}

fn white_json(white: &WhiteTestResult) -> Value {
    json!({
        "statistic": json_num(white.statistic),
        "df": white.df,
        "p_value": json_num(white.p_value),
        "aux_regressors": white.aux_regressors,
        "dropped": white.dropped,
    })
}

fn validation_json(v: &ValidationReport) -> Value {
    json!({
        "n_overlap": v.n_overlap,
        "correlation": json_num(v.correlation),
        "apv_avg_return": json_opt(v.apv_avg_return),
        "apv_sd_return": json_opt(v.apv_sd_return),
        "hpm_avg_return": json_opt(v.hpm_avg_return),
        "hpm_sd_return": json_opt(v.hpm_sd_return),
    })
}

pub fn cmd_hpm(
    p: &Pipeline,
    em: &mut Emitter,
    artist: Option<&str>,
    degrees: Option<&str>,
    reference_year: Option<i32>,
) -> Result<()> {
    let sales = p.select(artist)?;
    let mut distinct: Vec<&str> = sales.iter().map(|s| s.artist_id()).collect();
    distinct.sort_unstable();
    distinct.dedup();

    let mut spec = p.config.design_spec(distinct.len())?;
    if let Some(arg) = degrees {
        apply_degree_overrides(&mut spec, arg)?;
    }
    if reference_year.is_some() {
        spec.reference_year = reference_year;
    }

    let design = build_design_matrix(&sales, &p.artists, &spec)?;
    let fit: HedonicFit = fit_hedonic(&design)?;
    let white = white_test(&fit)?;
    let market = time_dummy_returns(&fit)?;
    let representative = representative_returns(&fit, &yearly_mean_characteristics(&fit))?;
    let apv_series = return_series(&annual_avg_apv(&sales))?;
    let total_validation = validate_against_apv(&apv_series, &representative)?;
    let market_validation = validate_against_apv(&apv_series, &market)?;

    let coef_rows: Vec<Vec<String>> = fit
        .fit
        .labels
        .iter()
        .enumerate()
        .map(|(j, label)| {
            vec![
                label.clone(),
                fmt6(fit.fit.coef[j]),
                fmt6(fit.fit.se[j]),
                fmt6(fit.fit.t_p[j]),
            ]
        })
        .collect();
    em.csv(
        "hpm_coefficients.csv",
        &["term", "coefficient", "std_error", "t_p_value"],
        &coef_rows,
    )?;

    // Plot data: the three return series aligned on year pairs.
    let mut by_pair: BTreeMap<(i32, i32), [Option<f64>; 3]> = BTreeMap::new();
    for (slot, series) in [(0, &apv_series), (1, &representative), (2, &market)] {
        for r in &series.returns {
            by_pair.entry((r.from_year, r.to_year)).or_default()[slot] = Some(r.value);
        }
    }
    let return_rows: Vec<Vec<String>> = by_pair
        .iter()
        .map(|(&(from, to), values)| {
            vec![
                from.to_string(),
                to.to_string(),
                fmt_opt(values[0]),
                fmt_opt(values[1]),
                fmt_opt(values[2]),
            ]
        })
        .collect();
    em.csv(
        "hpm_returns.csv",
        &[
            "from_year",
            "to_year",
            "apv_return",
            "representative_return",
            "market_return",
        ],
        &return_rows,
    )?;

    em.json(
        "hpm.json",
        json!({
            "run": p.run_block(),
            "sample": {
                "artists": distinct,
                "n_rows": fit.fit.n,
                "n_excluded": design.excluded.len(),
                "excluded": design
                    .excluded
                    .iter()
                    .map(|e| json!({ "sale_id": e.sale_id, "reason": e.reason }))
                    .collect::<Vec<_>>(),
                "reference_year": fit.info.reference_year,
            },
            "fit": {
                "n": fit.fit.n,
                "k": fit.fit.k,
                "r2": json_num(fit.fit.r2),
                "adj_r2": json_num(fit.fit.adj_r2),
                "f_stat": json_num(fit.fit.f_stat),
                "f_df": [fit.fit.f_df.0, fit.fit.f_df.1],
                "f_p": json_num(fit.fit.f_p),
                "sigma2": json_num(fit.fit.sigma2),
            },
            "white_test": white_json(&white),
            "apv_returns": return_series_json(&apv_series),
            "representative_returns": return_series_json(&representative),
            "market_returns": return_series_json(&market),
            "validation_total": validation_json(&total_validation),
            "validation_market": validation_json(&market_validation),
        }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// index
// ---------------------------------------------------------------------------

pub fn cmd_index(p: &Pipeline, em: &mut Emitter) -> Result<()> {
    let rule = p.config.index_rule();
    let series = apv_index(&p.sales, &rule)?;
    let rows: Vec<Vec<String>> = series
        .points
        .iter()
        .map(|pt| {
            vec![
                pt.month.to_string(),
                fmt_opt(pt.level),
                pt.n_contributing.to_string(),
            ]
        })
        .collect();
    em.csv("index.csv", &["month", "level", "n_contributing"], &rows)?;
    em.json(
        "index.json",
        json!({
            "run": p.run_block(),
            "rule": {
                "window_months": rule.window_months,
                "min_price": json_num(rule.min_price),
                "universe": rule.universe,
            },
            "points": series
                .points
                .iter()
                .map(|pt| json!({
                    "month": pt.month.to_string(),
                    "level": json_opt(pt.level),
                    "n_contributing": pt.n_contributing,
                }))
                .collect::<Vec<_>>(),
        }),
    )?;
    Ok(())
}
