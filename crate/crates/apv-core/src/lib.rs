//! Analytics for the price-per-area (APV) metric over auction-sale records.
//!
//! The pipeline starts from raw sale rows: prices are deflated to base-month
//! dollars and normalized by painting area ([`ingest`]), then summarized
//! ([`stats`]), compared across artists and cohorts with distribution-free
//! median tests ([`median`], [`cohorts`]), turned into annual return series
//! and rolling indices ([`returns`]), and cross-checked against hedonic
//! regression estimates ([`hedonic`]). Probability primitives live in
//! [`dist`]; the least-squares machinery in [`linalg`].

pub mod cohorts;
pub mod dist;
pub mod error;
pub mod hedonic;
pub mod ingest;
pub mod linalg;
pub mod median;
pub mod returns;
pub mod stats;

pub use error::{Error, Result};
pub use ingest::{
    AdjustedSale, ArtistRecord, CpiTable, FilterConfig, PremiumSchedule, PremiumTier, SaleRecord,
    SubjectFlag, SubjectFlags, YearMonth,
};
pub use median::{ComparisonMatrix, MedianTestResult, SignificanceCode, SignificanceThresholds};
pub use returns::{IndexRule, IndexSeries, ReturnSeries};
pub use stats::SummaryStats;
