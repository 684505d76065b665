//! `apv` — batch analytics over auction-sale records: descriptive APV
//! statistics, median comparisons, cohort and life-cycle analysis, returns,
//! repeat-sales diagnostics, hedonic-model validation, and a rolling index.
//!
//! Exit codes: 0 success, 1 data/analysis error (a JSON error report goes
//! to stderr), 2 usage error.

mod commands;
mod config;
mod report;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Pipeline;
use config::RunConfig;
use report::{Emitter, Meta};

#[derive(Parser, Debug)]
#[command(
    name = "apv",
    version,
    about = "Price-per-area analytics for auction-sale records"
)]
struct Cli {
    /// Run configuration (TOML); see the repository README for the format.
    #[arg(long, env = "APV_CONFIG", global = true, default_value = "apv.toml")]
    config: PathBuf,

    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sales CSV path (overrides the config file).
    #[arg(long, global = true)]
    sales: Option<PathBuf>,

    /// CPI CSV path (overrides the config file).
    #[arg(long, global = true)]
    cpi: Option<PathBuf>,

    /// Artists CSV path (overrides the config file).
    #[arg(long, global = true)]
    artists: Option<PathBuf>,

    /// Master seed recorded in every output.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Real-price eligibility floor in base-month dollars.
    #[arg(long, global = true)]
    min_price: Option<f64>,

    /// APV eligibility floor in USD/cm^2.
    #[arg(long, global = true)]
    min_apv: Option<f64>,

    /// Analysis window start, YYYY-MM (inclusive).
    #[arg(long, global = true)]
    window_start: Option<String>,

    /// Analysis window end, YYYY-MM (inclusive).
    #[arg(long, global = true)]
    window_end: Option<String>,

    /// Base month all prices are deflated to, YYYY-MM.
    #[arg(long, global = true)]
    base_month: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-artist descriptive APV statistics (plus a pooled row).
    Describe {
        /// Restrict to one artist id.
        #[arg(long)]
        artist: Option<String>,
    },
    /// All-pairs median comparison matrix across artists.
    CompareArtists,
    /// Orientation and subject-flag cohort comparisons per artist.
    Cohorts {
        /// Restrict to one artist id.
        #[arg(long)]
        artist: Option<String>,
    },
    /// Median APV by age at execution, per artist.
    Lifecycle {
        /// Restrict to one artist id.
        #[arg(long)]
        artist: Option<String>,
        /// Minimum sales per age before a point is kept.
        #[arg(long, default_value_t = 5)]
        min_count: usize,
        /// Centered moving-median window over curve points (odd; 1 = none).
        #[arg(long, default_value_t = 1)]
        window: usize,
    },
    /// Annual average-APV levels and year-to-year returns.
    Returns {
        /// Restrict to one artist id.
        #[arg(long)]
        artist: Option<String>,
    },
    /// All-sales versus repeat-sales comparison per artist.
    RepeatSales,
    /// Hedonic-model fit, White test, and APV-versus-HPM validation.
    Hpm {
        /// Restrict to one artist id (default: pooled sample).
        #[arg(long)]
        artist: Option<String>,
        /// Degree overrides, e.g. "age=4,area=2,height=0" (0 disables).
        #[arg(long)]
        degrees: Option<String>,
        /// Reference sale year whose dummy is omitted.
        #[arg(long)]
        reference_year: Option<i32>,
    },
    /// Rolling thresholded mean-APV index.
    Index,
}

fn apply_overrides(config: &mut RunConfig, cli: &Cli) {
    if let Some(out) = &cli.out {
        config.paths.output = out.clone();
    }
    if let Some(p) = &cli.sales {
        config.paths.sales = p.clone();
    }
    if let Some(p) = &cli.cpi {
        config.paths.cpi = p.clone();
    }
    if let Some(p) = &cli.artists {
        config.paths.artists = p.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(v) = cli.min_price {
        config.filter.min_price = v;
    }
    if let Some(v) = cli.min_apv {
        config.filter.min_apv = v;
    }
    if let Some(v) = &cli.window_start {
        config.filter.window_start = Some(v.clone());
    }
    if let Some(v) = &cli.window_end {
        config.filter.window_end = Some(v.clone());
    }
    if let Some(v) = &cli.base_month {
        config.base_month = v.clone();
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(&cli.config)?;
    apply_overrides(&mut config, &cli);

    let meta = Meta {
        config_digest: config.digest(),
        seed: config.seed,
    };
    let out_dir = config.paths.output.clone();
    let pipeline = Pipeline::load(config)?;
    let mut emitter = Emitter::new(&out_dir, meta)?;

    match &cli.command {
        Command::Describe { artist } => {
            commands::cmd_describe(&pipeline, &mut emitter, artist.as_deref())?
        }
        Command::CompareArtists => commands::cmd_compare_artists(&pipeline, &mut emitter)?,
        Command::Cohorts { artist } => {
            commands::cmd_cohorts(&pipeline, &mut emitter, artist.as_deref())?
        }
        Command::Lifecycle {
            artist,
            min_count,
            window,
        } => commands::cmd_lifecycle(
            &pipeline,
            &mut emitter,
            artist.as_deref(),
            *min_count,
            *window,
        )?,
        Command::Returns { artist } => {
            commands::cmd_returns(&pipeline, &mut emitter, artist.as_deref())?
        }
        Command::RepeatSales => commands::cmd_repeat_sales(&pipeline, &mut emitter)?,
        Command::Hpm {
            artist,
            degrees,
            reference_year,
        } => commands::cmd_hpm(
            &pipeline,
            &mut emitter,
            artist.as_deref(),
            degrees.as_deref(),
            *reference_year,
        )?,
        Command::Index => commands::cmd_index(&pipeline, &mut emitter)?,
    }

    for path in emitter.written() {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use apv_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Io(_)) | Some(E::Csv(_)) => "io",
        Some(E::MissingColumn(_)) => "schema",
        Some(E::CpiCoverage(_)) => "cpi_coverage",
        Some(E::Domain(_)) => "domain",
        Some(E::EmptySample)
        | Some(E::InsufficientSample { .. })
        | Some(E::InsufficientData(_))
        | Some(E::NotEnoughGroups(_))
        | Some(E::InsufficientOverlap { .. })
        | Some(E::EmptyCurve) => "insufficient_data",
        Some(E::DegenerateInference) => "degenerate_inference",
        Some(E::RankDeficient { .. }) | Some(E::Underdetermined { .. }) => "rank",
        Some(E::InvalidConfig(_)) => "config",
        None => "run",
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        let report = serde_json::json!({
            "error": format!("{err:#}"),
            "kind": error_kind(&err),
        });
        eprintln!("{report}");
        std::process::exit(1);
    }
}
