//! Run configuration: a TOML file mirrored by command-line overrides.
//!
//! The effective configuration (file values after flag overrides) is
//! serialized and hashed; every output file embeds that digest plus the
//! master seed so artifacts can be traced back to the exact run setup.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use apv_core::hedonic::{DesignSpec, GeometrySpec};
use apv_core::median::{BonettPrice, McKeanSchrader, MedianSeEstimator, SignificanceThresholds};
use apv_core::returns::IndexRule;
use apv_core::{FilterConfig, PremiumSchedule, PremiumTier, SubjectFlag, YearMonth};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsConfig {
    pub sales: PathBuf,
    pub cpi: PathBuf,
    pub artists: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSection {
    pub min_price: f64,
    pub min_apv: f64,
    pub window_start: Option<String>,
    pub window_end: Option<String>,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            min_price: 10_000.0,
            min_apv: 1.0,
            window_start: None,
            window_end: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PremiumTierConfig {
    /// Hammer prices up to and including this bound; absent means infinity.
    pub bound: Option<f64>,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PremiumSection {
    pub tier: Vec<PremiumTierConfig>,
}

impl Default for PremiumSection {
    fn default() -> Self {
        PremiumSection {
            tier: vec![PremiumTierConfig {
                bound: None,
                rate: 0.20,
            }],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SignificanceSection {
    pub strong: f64,
    pub medium: f64,
    pub weak: f64,
}

impl Default for SignificanceSection {
    fn default() -> Self {
        SignificanceSection {
            strong: 0.01,
            medium: 0.05,
            weak: 0.10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySection {
    pub area: Option<u32>,
    pub height: Option<u32>,
    pub width: Option<u32>,
    pub aspect_ratio: Option<u32>,
    pub diagonal: Option<u32>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            area: Some(2),
            height: Some(2),
            width: Some(2),
            aspect_ratio: Some(2),
            diagonal: Some(1),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HedonicSection {
    pub age_degree: Option<u32>,
    pub geometry: GeometrySection,
    pub canvas_dummy: bool,
    pub subject_dummies: Vec<String>,
    /// `None` enables painter dummies automatically when the data holds
    /// more than one artist.
    pub painter_dummies: Option<bool>,
    pub reference_year: Option<i32>,
}

impl Default for HedonicSection {
    fn default() -> Self {
        HedonicSection {
            age_degree: Some(4),
            geometry: GeometrySection::default(),
            canvas_dummy: true,
            subject_dummies: SubjectFlag::ALL.iter().map(|f| f.name().to_string()).collect(),
            painter_dummies: None,
            reference_year: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexSection {
    pub window_months: u32,
    pub min_price: f64,
    pub universe: Option<Vec<String>>,
}

impl Default for IndexSection {
    fn default() -> Self {
        IndexSection {
            window_months: 12,
            min_price: 50_000.0,
            universe: None,
        }
    }
}

/// Parsed configuration file plus flag overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub paths: PathsConfig,
    /// Month whose dollars all prices are expressed in, "YYYY-MM".
    pub base_month: String,
    /// Master seed, recorded in every output.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Median standard-error strategy: "bonett_price" or "mckean_schrader".
    #[serde(default = "default_estimator")]
    pub median_estimator: String,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub premium: PremiumSection,
    #[serde(default)]
    pub significance: SignificanceSection,
    #[serde(default)]
    pub hedonic: HedonicSection,
    #[serde(default)]
    pub index: IndexSection,
}

fn default_seed() -> u64 {
    0
}

fn default_estimator() -> String {
    "bonett_price".into()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        Ok(cfg)
    }

    /// Hex digest of the effective configuration, for embedding in outputs.
    /// The output directory is excluded: where artifacts land must not
    /// change their bytes.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths.output = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn base_month(&self) -> Result<YearMonth> {
        self.base_month
            .parse()
            .with_context(|| format!("bad base_month '{}'", self.base_month))
    }

    pub fn filter_config(&self) -> Result<FilterConfig> {
        let parse = |s: &Option<String>| -> Result<Option<YearMonth>> {
            Ok(match s {
                None => None,
                Some(s) => Some(s.parse().with_context(|| format!("bad window month '{s}'"))?),
            })
        };
        let cfg = FilterConfig {
            min_price: self.filter.min_price,
            min_apv: self.filter.min_apv,
            window_start: parse(&self.filter.window_start)?,
            window_end: parse(&self.filter.window_end)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn premium_schedule(&self) -> Result<PremiumSchedule> {
        let tiers: Vec<PremiumTier> = self
            .premium
            .tier
            .iter()
            .map(|t| PremiumTier {
                bound: t.bound.unwrap_or(f64::INFINITY),
                rate: t.rate,
            })
            .collect();
        Ok(PremiumSchedule::new(tiers)?)
    }

    pub fn thresholds(&self) -> Result<SignificanceThresholds> {
        let t = SignificanceThresholds {
            strong: self.significance.strong,
            medium: self.significance.medium,
            weak: self.significance.weak,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn estimator(&self) -> Result<Box<dyn MedianSeEstimator>> {
        match self.median_estimator.as_str() {
            "bonett_price" => Ok(Box::new(BonettPrice)),
            "mckean_schrader" => Ok(Box::new(McKeanSchrader)),
            other => bail!("unknown median_estimator '{other}'"),
        }
    }

    /// Design spec; `n_artists` drives the painter-dummy auto mode.
    pub fn design_spec(&self, n_artists: usize) -> Result<DesignSpec> {
        let mut subject_dummies = Vec::new();
        for name in &self.hedonic.subject_dummies {
            subject_dummies.push(
                name.parse::<SubjectFlag>()
                    .with_context(|| format!("bad subject dummy '{name}'"))?,
            );
        }
        let spec = DesignSpec {
            age_degree: self.hedonic.age_degree,
            geometry: GeometrySpec {
                area: self.hedonic.geometry.area,
                height: self.hedonic.geometry.height,
                width: self.hedonic.geometry.width,
                aspect_ratio: self.hedonic.geometry.aspect_ratio,
                diagonal: self.hedonic.geometry.diagonal,
            },
            canvas_dummy: self.hedonic.canvas_dummy,
            subject_dummies,
            painter_dummies: self.hedonic.painter_dummies.unwrap_or(n_artists > 1),
            reference_year: self.hedonic.reference_year,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn index_rule(&self) -> IndexRule {
        IndexRule {
            window_months: self.index.window_months,
            min_price: self.index.min_price,
            universe: self
                .index
                .universe
                .as_ref()
                .map(|v| v.iter().cloned().collect::<BTreeSet<String>>()),
        }
    }
}
