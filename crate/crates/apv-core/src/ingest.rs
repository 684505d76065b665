//! Sale/CPI/artist ingestion: CSV parsing with row-level diagnostics,
//! nominal-to-real price conversion, hammer-to-premium equivalence, and the
//! eligibility filters applied before any analysis.
//!
//! Price normalization happens in two steps: a sale's nominal premium price
//! (or its hammer price grossed up through a [`PremiumSchedule`]) is
//! deflated to base-month dollars with a monthly CPI table, then the APV is
//! that real price divided by the painting's area in cm^2.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::stats::apv;

// ---------------------------------------------------------------------------
// Calendar month
// ---------------------------------------------------------------------------

/// A calendar year + month, the granularity of sale dates and CPI levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Domain(format!("month out of range: {month}")));
        }
        Ok(YearMonth { year, month })
    }

    /// Months since year 0, for window arithmetic.
    pub fn index(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_index(idx: i64) -> Self {
        YearMonth {
            year: idx.div_euclid(12) as i32,
            month: (idx.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn next(self) -> Self {
        Self::from_index(self.index() + 1)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Parses "YYYY-MM".
    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Domain(format!("bad year-month '{s}'")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| Error::Domain(format!("bad year in '{s}'")))?;
        let month: u8 = m
            .parse()
            .map_err(|_| Error::Domain(format!("bad month in '{s}'")))?;
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Domain records
// ---------------------------------------------------------------------------

/// Subject dummies carried by every sale row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SubjectFlags {
    pub still_life: bool,
    pub landscape_subject: bool,
    pub people: bool,
    pub nude: bool,
    pub flowers: bool,
}

/// Selector for one of the subject dummies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectFlag {
    StillLife,
    LandscapeSubject,
    People,
    Nude,
    Flowers,
}

impl SubjectFlag {
    pub const ALL: [SubjectFlag; 5] = [
        SubjectFlag::StillLife,
        SubjectFlag::LandscapeSubject,
        SubjectFlag::People,
        SubjectFlag::Nude,
        SubjectFlag::Flowers,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubjectFlag::StillLife => "still_life",
            SubjectFlag::LandscapeSubject => "landscape_subject",
            SubjectFlag::People => "people",
            SubjectFlag::Nude => "nude",
            SubjectFlag::Flowers => "flowers",
        }
    }

    pub fn get(self, flags: &SubjectFlags) -> bool {
        match self {
            SubjectFlag::StillLife => flags.still_life,
            SubjectFlag::LandscapeSubject => flags.landscape_subject,
            SubjectFlag::People => flags.people,
            SubjectFlag::Nude => flags.nude,
            SubjectFlag::Flowers => flags.flowers,
        }
    }
}

impl FromStr for SubjectFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SubjectFlag::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown subject flag '{s}'")))
    }
}

/// One auction sale as parsed, prices still nominal.
#[derive(Debug, Clone, Serialize)]
pub struct SaleRecord {
    pub sale_id: String,
    pub artist_id: String,
    pub painting_id: Option<String>,
    pub title: String,
    pub sale_date: YearMonth,
    pub execution_year: Option<i32>,
    pub hammer_price: Option<f64>,
    pub premium_price: Option<f64>,
    pub height_cm: f64,
    pub width_cm: f64,
    pub is_canvas: bool,
    pub subject_flags: SubjectFlags,
    pub auction_house: String,
}

impl SaleRecord {
    /// Row-level invariants enforced at parse time.
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.height_cm) || !positive(self.width_cm) {
            return Err(Error::Domain("nonpositive dimension".into()));
        }
        let has_price = |p: Option<f64>| p.is_some_and(|v| v > 0.0);
        match (self.hammer_price, self.premium_price) {
            (None, None) => return Err(Error::Domain("no price".into())),
            (h, p) if !has_price(h) && !has_price(p) => {
                return Err(Error::Domain("nonpositive price".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Artist identity and life span.
#[derive(Debug, Clone, Serialize)]
pub struct ArtistRecord {
    pub artist_id: String,
    pub name: String,
    pub birth_year: i32,
    pub death_year: Option<i32>,
}

/// Monthly CPI levels plus the base month all prices are expressed in.
#[derive(Debug, Clone)]
pub struct CpiTable {
    base_month: YearMonth,
    entries: BTreeMap<YearMonth, f64>,
}

impl CpiTable {
    /// Validates positivity, presence of the base month, and contiguity of
    /// the covered month range.
    pub fn new(base_month: YearMonth, entries: BTreeMap<YearMonth, f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("empty cpi table".into()));
        }
        for (m, level) in &entries {
            if !level.is_finite() || *level <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "cpi level for {m} must be positive, got {level}"
                )));
            }
        }
        if !entries.contains_key(&base_month) {
            return Err(Error::InvalidConfig(format!(
                "cpi table missing base month {base_month}"
            )));
        }
        let first = *entries.keys().next().unwrap();
        let last = *entries.keys().next_back().unwrap();
        let span = (last.index() - first.index() + 1) as usize;
        if span != entries.len() {
            return Err(Error::InvalidConfig(format!(
                "cpi table has gaps between {first} and {last}"
            )));
        }
        Ok(CpiTable {
            base_month,
            entries,
        })
    }

    pub fn base_month(&self) -> YearMonth {
        self.base_month
    }

    pub fn level(&self, month: YearMonth) -> Option<f64> {
        self.entries.get(&month).copied()
    }

    /// Multiplier taking a nominal price in `month` to base-month dollars.
    pub fn deflator(&self, month: YearMonth) -> Result<f64> {
        let level = self
            .level(month)
            .ok_or_else(|| Error::CpiCoverage(month.to_string()))?;
        Ok(self.level(self.base_month).unwrap() / level)
    }
}

/// One tier of the buyer's-premium schedule: `rate` applies to hammer
/// prices up to and including `bound`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PremiumTier {
    pub bound: f64,
    pub rate: f64,
}

/// Tiered hammer-to-premium conversion. The default is a flat 20% premium on
/// the whole hammer price.
#[derive(Debug, Clone, Serialize)]
pub struct PremiumSchedule {
    tiers: Vec<PremiumTier>,
}

impl Default for PremiumSchedule {
    fn default() -> Self {
        PremiumSchedule {
            tiers: vec![PremiumTier {
                bound: f64::INFINITY,
                rate: 0.20,
            }],
        }
    }
}

impl PremiumSchedule {
    /// Bounds must be strictly increasing with the last one infinite; rates
    /// must lie in [0, 1).
    pub fn new(tiers: Vec<PremiumTier>) -> Result<Self> {
        if tiers.is_empty() {
            return Err(Error::InvalidConfig("empty premium schedule".into()));
        }
        for w in tiers.windows(2) {
            if w[0].bound >= w[1].bound || w[0].bound.is_nan() || w[1].bound.is_nan() {
                return Err(Error::InvalidConfig(
                    "premium tier bounds must be strictly increasing".into(),
                ));
            }
        }
        if tiers.last().unwrap().bound != f64::INFINITY {
            return Err(Error::InvalidConfig(
                "last premium tier bound must be infinite".into(),
            ));
        }
        for t in &tiers {
            if !(0.0..1.0).contains(&t.rate) {
                return Err(Error::InvalidConfig(format!(
                    "premium rate out of [0, 1): {}",
                    t.rate
                )));
            }
        }
        Ok(PremiumSchedule { tiers })
    }

    pub fn rate_for(&self, hammer: f64) -> f64 {
        self.tiers
            .iter()
            .find(|t| hammer <= t.bound)
            .map(|t| t.rate)
            .unwrap_or_else(|| self.tiers.last().unwrap().rate)
    }

    /// Equivalent premium price for a hammer price.
    pub fn premium_price(&self, hammer: f64) -> f64 {
        hammer * (1.0 + self.rate_for(hammer))
    }
}

/// A sale after deflation: real premium price in base-month dollars, area,
/// and the APV itself.
#[derive(Debug, Clone, Serialize)]
pub struct AdjustedSale {
    pub record: SaleRecord,
    pub real_premium_price: f64,
    pub area_cm2: f64,
    pub apv: f64,
}

impl AdjustedSale {
    pub fn artist_id(&self) -> &str {
        &self.record.artist_id
    }

    pub fn sale_year(&self) -> i32 {
        self.record.sale_date.year
    }
}

/// Eligibility thresholds. Both price and APV bounds are inclusive and apply
/// to REAL (base-month) values; `None` window ends are unbounded.
#[derive(Debug, Clone, Serialize)]
pub struct FilterConfig {
    pub min_price: f64,
    pub min_apv: f64,
    pub window_start: Option<YearMonth>,
    pub window_end: Option<YearMonth>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_price: 10_000.0,
            min_apv: 1.0,
            window_start: None,
            window_end: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.min_price.is_finite() || self.min_price <= 0.0 {
            return Err(Error::InvalidConfig("min_price must be positive".into()));
        }
        if !self.min_apv.is_finite() || self.min_apv <= 0.0 {
            return Err(Error::InvalidConfig("min_apv must be positive".into()));
        }
        if let (Some(s), Some(e)) = (self.window_start, self.window_end) {
            if s > e {
                return Err(Error::InvalidConfig(format!(
                    "window start {s} after end {e}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, month: YearMonth) -> bool {
        self.window_start.is_none_or(|s| month >= s)
            && self.window_end.is_none_or(|e| month <= e)
    }
}

// ---------------------------------------------------------------------------
// CSV parsing
// ---------------------------------------------------------------------------

/// Logical-field to header-name mapping for the sales CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SalesSchema {
    pub sale_id: String,
    pub artist_id: String,
    pub painting_id: String,
    pub title: String,
    pub sale_year: String,
    pub sale_month: String,
    pub execution_year: String,
    pub hammer_price: String,
    pub premium_price: String,
    pub height_cm: String,
    pub width_cm: String,
    pub is_canvas: String,
    pub still_life: String,
    pub landscape_subject: String,
    pub people: String,
    pub nude: String,
    pub flowers: String,
    pub auction_house: String,
}

impl Default for SalesSchema {
    fn default() -> Self {
        SalesSchema {
            sale_id: "sale_id".into(),
            artist_id: "artist_id".into(),
            painting_id: "painting_id".into(),
            title: "title".into(),
            sale_year: "sale_year".into(),
            sale_month: "sale_month".into(),
            execution_year: "execution_year".into(),
            hammer_price: "hammer_price_usd".into(),
            premium_price: "premium_price_usd".into(),
            height_cm: "height_cm".into(),
            width_cm: "width_cm".into(),
            is_canvas: "is_canvas".into(),
            still_life: "still_life".into(),
            landscape_subject: "landscape_subject".into(),
            people: "people".into(),
            nude: "nude".into(),
            flowers: "flowers".into(),
            auction_house: "auction_house".into(),
        }
    }
}

/// One rejected row: 1-based line number in the source plus the reason.
#[derive(Debug, Clone, Serialize)]
pub struct RowDiagnostic {
    pub line: u64,
    pub reason: String,
}

struct ColumnIndex {
    idx: BTreeMap<&'static str, usize>,
}

impl ColumnIndex {
    fn get<'r>(&self, record: &'r csv::StringRecord, field: &str) -> &'r str {
        record.get(self.idx[field]).unwrap_or("").trim()
    }
}

fn resolve_columns(headers: &csv::StringRecord, schema: &SalesSchema) -> Result<ColumnIndex> {
    let mut idx = BTreeMap::new();
    let pairs: [(&'static str, &String); 18] = [
        ("sale_id", &schema.sale_id),
        ("artist_id", &schema.artist_id),
        ("painting_id", &schema.painting_id),
        ("title", &schema.title),
        ("sale_year", &schema.sale_year),
        ("sale_month", &schema.sale_month),
        ("execution_year", &schema.execution_year),
        ("hammer_price", &schema.hammer_price),
        ("premium_price", &schema.premium_price),
        ("height_cm", &schema.height_cm),
        ("width_cm", &schema.width_cm),
        ("is_canvas", &schema.is_canvas),
        ("still_life", &schema.still_life),
        ("landscape_subject", &schema.landscape_subject),
        ("people", &schema.people),
        ("nude", &schema.nude),
        ("flowers", &schema.flowers),
        ("auction_house", &schema.auction_house),
    ];
    for (field, name) in pairs {
        let pos = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        idx.insert(field, pos);
    }
    Ok(ColumnIndex { idx })
}

fn parse_opt_f64(raw: &str, field: &str) -> std::result::Result<Option<f64>, String> {
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("unparseable {field} '{raw}'")),
    }
}

fn parse_opt_i32(raw: &str, field: &str) -> std::result::Result<Option<i32>, String> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<i32>()
        .map(Some)
        .map_err(|_| format!("unparseable {field} '{raw}'"))
}

/// Empty means absent (false); otherwise 1/0, true/false, yes/no.
fn parse_bool(raw: &str, field: &str) -> std::result::Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" => Ok(false),
        "1" | "true" | "yes" => Ok(true),
        other => Err(format!("unparseable {field} '{other}'")),
    }
}

/// Parse the sales CSV. Well-formed rows become [`SaleRecord`]s; malformed
/// rows are reported as diagnostics and never abort the parse. A missing
/// mandatory header column or an unreadable stream is fatal.
pub fn parse_sales_csv<R: Read>(
    source: R,
    schema: &SalesSchema,
) -> Result<(Vec<SaleRecord>, Vec<RowDiagnostic>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let cols = resolve_columns(reader.headers()?, schema)?;

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_sale_row(&row, &cols) {
            Ok(rec) => records.push(rec),
            Err(reason) => diagnostics.push(RowDiagnostic { line, reason }),
        }
    }
    Ok((records, diagnostics))
}

fn parse_sale_row(
    row: &csv::StringRecord,
    cols: &ColumnIndex,
) -> std::result::Result<SaleRecord, String> {
    let get = |f: &str| cols.get(row, f);

    let sale_id = get("sale_id").to_string();
    if sale_id.is_empty() {
        return Err("missing sale_id".into());
    }
    let artist_id = get("artist_id").to_string();
    if artist_id.is_empty() {
        return Err("missing artist_id".into());
    }
    let sale_year: i32 = get("sale_year")
        .parse()
        .map_err(|_| format!("unparseable sale_year '{}'", get("sale_year")))?;
    let sale_month: u8 = get("sale_month")
        .parse()
        .map_err(|_| format!("unparseable sale_month '{}'", get("sale_month")))?;
    let sale_date =
        YearMonth::new(sale_year, sale_month).map_err(|_| format!("bad month {sale_month}"))?;

    let height_cm = parse_opt_f64(get("height_cm"), "height_cm")?
        .ok_or_else(|| "missing height_cm".to_string())?;
    let width_cm = parse_opt_f64(get("width_cm"), "width_cm")?
        .ok_or_else(|| "missing width_cm".to_string())?;

    let painting_id = match get("painting_id") {
        "" => None,
        s => Some(s.to_string()),
    };

    let record = SaleRecord {
        sale_id,
        artist_id,
        painting_id,
        title: get("title").to_string(),
        sale_date,
        execution_year: parse_opt_i32(get("execution_year"), "execution_year")?,
        hammer_price: parse_opt_f64(get("hammer_price"), "hammer_price")?,
        premium_price: parse_opt_f64(get("premium_price"), "premium_price")?,
        height_cm,
        width_cm,
        is_canvas: parse_bool(get("is_canvas"), "is_canvas")?,
        subject_flags: SubjectFlags {
            still_life: parse_bool(get("still_life"), "still_life")?,
            landscape_subject: parse_bool(get("landscape_subject"), "landscape_subject")?,
            people: parse_bool(get("people"), "people")?,
            nude: parse_bool(get("nude"), "nude")?,
            flowers: parse_bool(get("flowers"), "flowers")?,
        },
        auction_house: get("auction_house").to_string(),
    };
    record.validate().map_err(|e| match e {
        Error::Domain(msg) => msg,
        other => other.to_string(),
    })?;
    Ok(record)
}

/// Parse the CPI CSV (columns year, month, cpi_level) into month -> level.
pub fn parse_cpi_csv<R: Read>(source: R) -> Result<BTreeMap<YearMonth, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let pos = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (yi, mi, li) = (pos("year")?, pos("month")?, pos("cpi_level")?);

    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let year: i32 = field(yi)
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad cpi year '{}'", field(yi))))?;
        let month: u8 = field(mi)
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad cpi month '{}'", field(mi))))?;
        let level: f64 = field(li)
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad cpi level '{}'", field(li))))?;
        out.insert(YearMonth::new(year, month)?, level);
    }
    Ok(out)
}

/// Parse the artists CSV (columns artist_id, name, birth_year, death_year).
pub fn parse_artists_csv<R: Read>(source: R) -> Result<BTreeMap<String, ArtistRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let pos = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (ii, ni, bi, di) = (
        pos("artist_id")?,
        pos("name")?,
        pos("birth_year")?,
        pos("death_year")?,
    );

    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let artist_id = field(ii);
        let birth_year: i32 = field(bi)
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad birth_year '{}'", field(bi))))?;
        let death_year = match field(di).as_str() {
            "" => None,
            s => Some(s.parse::<i32>().map_err(|_| {
                Error::InvalidConfig(format!("bad death_year '{s}'"))
            })?),
        };
        if let Some(d) = death_year {
            if d < birth_year {
                return Err(Error::InvalidConfig(format!(
                    "artist {artist_id}: death year {d} before birth year {birth_year}"
                )));
            }
        }
        out.insert(
            artist_id.clone(),
            ArtistRecord {
                artist_id,
                name: field(ni),
                birth_year,
                death_year,
            },
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Normalization and filtering
// ---------------------------------------------------------------------------

/// Deflate one sale to base-month dollars and compute its APV.
///
/// A present premium price is used verbatim; otherwise the hammer price is
/// grossed up through the schedule.
pub fn to_real_premium(
    record: &SaleRecord,
    cpi: &CpiTable,
    schedule: &PremiumSchedule,
) -> Result<AdjustedSale> {
    record.validate()?;
    let nominal_premium = match record.premium_price {
        Some(p) => p,
        None => schedule.premium_price(record.hammer_price.unwrap()),
    };
    let real_premium_price = nominal_premium * cpi.deflator(record.sale_date)?;
    let area_cm2 = record.height_cm * record.width_cm;
    let apv = apv(real_premium_price, record.height_cm, record.width_cm)?;
    Ok(AdjustedSale {
        record: record.clone(),
        real_premium_price,
        area_cm2,
        apv,
    })
}

/// Why a sale was dropped; only the first violated rule is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    PriceBelowMinimum,
    ApvBelowMinimum,
    OutsideWindow,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::PriceBelowMinimum => "price below minimum",
            DropReason::ApvBelowMinimum => "APV below minimum",
            DropReason::OutsideWindow => "outside date window",
        })
    }
}

/// Partition deflated sales into kept and dropped. Rules are checked in
/// order: price floor, APV floor, date window; boundaries are inclusive.
pub fn apply_filters(
    sales: Vec<AdjustedSale>,
    cfg: &FilterConfig,
) -> (Vec<AdjustedSale>, Vec<(AdjustedSale, DropReason)>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for sale in sales {
        if sale.real_premium_price < cfg.min_price {
            dropped.push((sale, DropReason::PriceBelowMinimum));
        } else if sale.apv < cfg.min_apv {
            dropped.push((sale, DropReason::ApvBelowMinimum));
        } else if !cfg.contains(sale.record.sale_date) {
            dropped.push((sale, DropReason::OutsideWindow));
        } else {
            kept.push(sale);
        }
    }
    (kept, dropped)
}
