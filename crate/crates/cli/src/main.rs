//! `greenspace` command-line interface.
//!
//! Every subcommand runs the pipeline up to its stage and writes that
//! stage's artifacts (and a manifest) into the output directory. Settings
//! come from defaults, then `--config`, then flags.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use greenspace::diversify::BaselineScope;
use greenspace::pipeline::config::{BandwidthValue, SeedValue};
use greenspace::pipeline::{run_target, PartialConfig, PipelineConfig, Target};
use greenspace::regress::DependentMode;
use greenspace::{Error, Exec};

#[derive(Debug, Parser)]
#[command(name = "greenspace", version, about = "Green product-space diversification analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory [default: greenspace-out].
    #[arg(long = "out", global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Trade CSV.
    #[arg(long, global = true, value_name = "FILE")]
    trade: Option<PathBuf>,

    /// Green product list (one HS6 code per line).
    #[arg(long, global = true, value_name = "FILE")]
    green: Option<PathBuf>,

    /// Indicator CSV (`country_iso3,indicator_name,value`).
    #[arg(long, global = true, value_name = "FILE")]
    indicators: Option<PathBuf>,

    /// Initial year [default: 2007].
    #[arg(long, global = true)]
    t0: Option<i32>,

    /// Final year [default: 2017].
    #[arg(long, global = true)]
    t1: Option<i32>,

    /// Strict RCA competitiveness threshold [default: 1.0].
    #[arg(long, global = true)]
    rca_threshold: Option<f64>,

    /// A new product must start below this RCA at t0 [default: 0.2].
    #[arg(long, global = true)]
    new_low_threshold: Option<f64>,

    /// Baseline basket: all-products or green-only [default: all-products].
    #[arg(long, global = true)]
    baseline_scope: Option<BaselineScope>,

    /// Counterfactual draws [default: 1000].
    #[arg(long, global = true)]
    draws: Option<usize>,

    /// Counterfactual seed; required for `counterfactual` and `run`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// KDE grid points on [0, 1] [default: 512].
    #[arg(long, global = true)]
    grid_points: Option<usize>,

    /// `auto` (Silverman) or a positive number.
    #[arg(long, global = true)]
    bandwidth: Option<String>,

    /// Use the actual sample's bandwidth for both densities.
    #[arg(long, global = true)]
    shared_bandwidth: bool,

    /// Drop the products that actually became new from the draw pool.
    #[arg(long, global = true)]
    exclude_actual_from_pool: bool,

    /// Dependent variable: all-new or path-dependent-only [default: all-new].
    #[arg(long, global = true)]
    dependent_mode: Option<DependentMode>,

    /// Relatedness cut-off for path-dependent-only mode [default: 0.58].
    #[arg(long, global = true)]
    pd_threshold: Option<f64>,

    /// Report regressions for both dependent-variable modes.
    #[arg(long, global = true)]
    full_table: bool,

    /// Also write a per-country density file (repeatable).
    #[arg(long = "country", global = true, value_name = "ISO3")]
    countries: Vec<String>,

    /// Regressors in specification order (repeatable) [default: all indicators].
    #[arg(long = "regressor", global = true, value_name = "NAME")]
    regressors: Vec<String>,

    #[arg(long, global = true, value_name = "NAME")]
    year_column: Option<String>,
    #[arg(long, global = true, value_name = "NAME")]
    country_column: Option<String>,
    #[arg(long, global = true, value_name = "NAME")]
    product_column: Option<String>,
    #[arg(long, global = true, value_name = "NAME")]
    value_column: Option<String>,

    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the trade CSV and write the aggregated tensor.
    Ingest,
    /// Write RCA matrices for t0 and t1.
    Rca,
    /// Write the t0 proximity matrix.
    Proximity,
    /// Write new green products and their relatedness.
    NewProducts,
    /// Run the dart-board counterfactual and classification.
    Counterfactual,
    /// Regress new-product shares on indicators.
    Regress,
    /// Full pipeline.
    Run,
}

impl Cli {
    fn flags(&self) -> PartialConfig {
        PartialConfig {
            t0: self.t0,
            t1: self.t1,
            rca_threshold: self.rca_threshold,
            new_low_threshold: self.new_low_threshold,
            baseline_scope: self.baseline_scope,
            draws: self.draws,
            seed: self.seed.map(SeedValue::from_u64),
            grid_points: self.grid_points,
            bandwidth: self.bandwidth.clone().map(BandwidthValue::Text),
            shared_bandwidth: self.shared_bandwidth.then_some(true),
            exclude_actual_from_pool: self.exclude_actual_from_pool.then_some(true),
            dependent_mode: self.dependent_mode,
            pd_threshold: self.pd_threshold,
            full_table: self.full_table.then_some(true),
            countries: (!self.countries.is_empty()).then(|| self.countries.clone()),
            regressors: (!self.regressors.is_empty()).then(|| self.regressors.clone()),
            trade: self.trade.clone(),
            green: self.green.clone(),
            indicators: self.indicators.clone(),
            year_column: self.year_column.clone(),
            country_column: self.country_column.clone(),
            product_column: self.product_column.clone(),
            value_column: self.value_column.clone(),
            output_dir: self.output_dir.clone(),
            manifest: None,
        }
    }

    fn target(&self) -> Target {
        match self.command {
            Command::Ingest => Target::Ingest,
            Command::Rca => Target::Rca,
            Command::Proximity => Target::Proximity,
            Command::NewProducts => Target::NewProducts,
            Command::Counterfactual => Target::Counterfactual,
            Command::Regress => Target::Regress,
            Command::Run => Target::Run,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let file = match &cli.config {
        Some(path) => PartialConfig::from_file(path)?,
        None => PartialConfig::default(),
    };
    let config = PipelineConfig::resolve(file.overlay(cli.flags()))?;
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let summary = run_target(&config, cli.target(), exec)?;
    for r in &summary.counterfactual {
        println!("{}: {}", r.scope, r.regions.verdict);
    }
    for path in &summary.files {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
