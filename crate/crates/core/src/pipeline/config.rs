//! Run configuration.
//!
//! A config file is flat TOML whose keys match the [`PartialConfig`] fields,
//! e.g.
//!
//! ```toml
//! t0 = 2007
//! t1 = 2017
//! seed = 42
//! bandwidth = "auto"        # or a positive number
//! trade = "data/trade.csv"
//! green = "data/green.txt"
//! indicators = "data/indicators.csv"
//! ```
//!
//! Command-line flags override file values, which override the defaults. A
//! run manifest is itself a valid config file: its `[manifest]` table is
//! ignored on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diversify::{BaselineScope, NewProductCriteria};
use crate::error::{Error, Result};
use crate::ingest::TradeSchema;
use crate::regress::DependentMode;
use crate::stats::{BandwidthRule, CounterfactualOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Explicit(f64),
}

impl std::str::FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|h| *h > 0.0 && h.is_finite())
            .map(Bandwidth::Explicit)
            .ok_or_else(|| Error::Config(format!("bandwidth: expected `auto` or a positive number, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthValue {
    Number(f64),
    Text(String),
}

/// Seeds above `i64::MAX` do not fit a TOML integer and are written as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedValue {
    Int(i64),
    Text(String),
}

impl SeedValue {
    fn resolve(&self) -> Result<u64> {
        match self {
            SeedValue::Int(v) => u64::try_from(*v).map_err(|_| Error::Config(format!("seed: must be non-negative, got {v}"))),
            SeedValue::Text(s) => s.parse().map_err(|_| Error::Config(format!("seed: not an unsigned 64-bit integer: `{s}`"))),
        }
    }

    pub fn from_u64(seed: u64) -> Self {
        i64::try_from(seed).map_or_else(|_| SeedValue::Text(seed.to_string()), SeedValue::Int)
    }
}

/// Every setting optional; the layer type for file and flag values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rca_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_low_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_scope: Option<BaselineScope>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<BandwidthValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shared_bandwidth: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_actual_from_pool: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dependent_mode: Option<DependentMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_table: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub countries: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regressors: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trade: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicators: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub country_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub product_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Present in run manifests; ignored on load.
    #[serde(skip_serializing)]
    pub manifest: Option<toml::Table>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        PartialConfig {
            $($field: $top.$field.or($base.$field),)*
        }
    };
}

impl PartialConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    /// Relative input paths are taken relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?;
        let mut partial = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut partial.trade, &mut partial.green, &mut partial.indicators].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(partial)
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: PartialConfig) -> PartialConfig {
        let base = self;
        overlay!(
            base,
            top,
            t0,
            t1,
            rca_threshold,
            new_low_threshold,
            baseline_scope,
            draws,
            seed,
            grid_points,
            bandwidth,
            shared_bandwidth,
            exclude_actual_from_pool,
            dependent_mode,
            pd_threshold,
            full_table,
            countries,
            regressors,
            trade,
            green,
            indicators,
            year_column,
            country_column,
            product_column,
            value_column,
            output_dir,
            manifest
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub t0: i32,
    pub t1: i32,
    pub rca_threshold: f64,
    pub new_low_threshold: f64,
    pub baseline_scope: BaselineScope,
    pub draws: usize,
    pub seed: Option<u64>,
    pub grid_points: usize,
    pub bandwidth: Bandwidth,
    pub shared_bandwidth: bool,
    pub exclude_actual_from_pool: bool,
    pub dependent_mode: DependentMode,
    pub pd_threshold: f64,
    pub full_table: bool,
    /// Countries that get their own density file.
    pub countries: Vec<String>,
    /// Empty means every indicator in the file, in file order.
    pub regressors: Vec<String>,
    pub trade: Option<PathBuf>,
    pub green: Option<PathBuf>,
    pub indicators: Option<PathBuf>,
    pub schema: TradeSchema,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            t0: 2007,
            t1: 2017,
            rca_threshold: 1.0,
            new_low_threshold: 0.2,
            baseline_scope: BaselineScope::AllProducts,
            draws: 1000,
            seed: None,
            grid_points: 512,
            bandwidth: Bandwidth::Auto,
            shared_bandwidth: false,
            exclude_actual_from_pool: false,
            dependent_mode: DependentMode::AllNew,
            pd_threshold: 0.58,
            full_table: false,
            countries: Vec::new(),
            regressors: Vec::new(),
            trade: None,
            green: None,
            indicators: None,
            schema: TradeSchema::default(),
            output_dir: PathBuf::from("greenspace-out"),
        }
    }
}

impl PipelineConfig {
    /// Applies `partial` over the defaults. Does not validate.
    pub fn resolve(partial: PartialConfig) -> Result<Self> {
        let d = PipelineConfig::default();
        let bandwidth = match partial.bandwidth {
            None => d.bandwidth,
            Some(BandwidthValue::Text(s)) => s.parse()?,
            Some(BandwidthValue::Number(h)) => h.to_string().parse()?,
        };
        let schema = TradeSchema {
            year: partial.year_column.unwrap_or(d.schema.year),
            country: partial.country_column.unwrap_or(d.schema.country),
            product: partial.product_column.unwrap_or(d.schema.product),
            value: partial.value_column.unwrap_or(d.schema.value),
        };
        Ok(PipelineConfig {
            t0: partial.t0.unwrap_or(d.t0),
            t1: partial.t1.unwrap_or(d.t1),
            rca_threshold: partial.rca_threshold.unwrap_or(d.rca_threshold),
            new_low_threshold: partial.new_low_threshold.unwrap_or(d.new_low_threshold),
            baseline_scope: partial.baseline_scope.unwrap_or(d.baseline_scope),
            draws: partial.draws.unwrap_or(d.draws),
            seed: partial.seed.as_ref().map(SeedValue::resolve).transpose()?,
            grid_points: partial.grid_points.unwrap_or(d.grid_points),
            bandwidth,
            shared_bandwidth: partial.shared_bandwidth.unwrap_or(d.shared_bandwidth),
            exclude_actual_from_pool: partial.exclude_actual_from_pool.unwrap_or(d.exclude_actual_from_pool),
            dependent_mode: partial.dependent_mode.unwrap_or(d.dependent_mode),
            pd_threshold: partial.pd_threshold.unwrap_or(d.pd_threshold),
            full_table: partial.full_table.unwrap_or(d.full_table),
            countries: partial.countries.unwrap_or_default(),
            regressors: partial.regressors.unwrap_or_default(),
            trade: partial.trade,
            green: partial.green,
            indicators: partial.indicators,
            schema,
            output_dir: partial.output_dir.unwrap_or(d.output_dir),
        })
    }

    /// Checks value ranges, and that every configured input path exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.t0 >= self.t1 {
            return bad("t0", format!("must be earlier than t1 ({} >= {})", self.t0, self.t1));
        }
        if self.rca_threshold.is_nan() || self.rca_threshold <= 0.0 {
            return bad("rca_threshold", format!("must be positive, got {}", self.rca_threshold));
        }
        if !(self.new_low_threshold > 0.0 && self.new_low_threshold <= 1.0) {
            return bad("new_low_threshold", format!("must lie in (0, 1], got {}", self.new_low_threshold));
        }
        if self.draws == 0 {
            return bad("draws", "must be at least 1".into());
        }
        if self.grid_points < 2 {
            return bad("grid_points", "must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.pd_threshold) {
            return bad("pd_threshold", format!("must lie in [0, 1], got {}", self.pd_threshold));
        }
        if let Some(c) = self.countries.iter().find(|c| !crate::ingest::is_country_code(c)) {
            return bad("countries", format!("malformed country code `{c}`"));
        }
        for (field, path) in [("trade", &self.trade), ("green", &self.green), ("indicators", &self.indicators)] {
            if let Some(p) = path {
                if !p.is_file() {
                    return bad(field, format!("file not found: {}", p.display()));
                }
            }
        }
        Ok(())
    }

    pub fn require_trade(&self) -> Result<&Path> {
        self.trade.as_deref().ok_or_else(|| Error::Config("trade: path is required".into()))
    }

    pub fn require_green(&self) -> Result<&Path> {
        self.green.as_deref().ok_or_else(|| Error::Config("green: path is required".into()))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("seed: required for the counterfactual (no implicit default)".into()))
    }

    pub fn criteria(&self) -> NewProductCriteria {
        NewProductCriteria {
            low_threshold: self.new_low_threshold,
            rca_threshold: self.rca_threshold,
        }
    }

    pub fn counterfactual_options(&self) -> Result<CounterfactualOptions> {
        let bandwidth = match (self.bandwidth, self.shared_bandwidth) {
            (Bandwidth::Explicit(h), _) => BandwidthRule::Fixed(h),
            (Bandwidth::Auto, true) => BandwidthRule::SharedActual,
            (Bandwidth::Auto, false) => BandwidthRule::Silverman,
        };
        Ok(CounterfactualOptions {
            draws: self.draws,
            seed: self.require_seed()?,
            grid_points: self.grid_points,
            bandwidth,
        })
    }

    /// The settings as a flat config layer, without the output directory.
    pub fn to_partial(&self) -> PartialConfig {
        PartialConfig {
            t0: Some(self.t0),
            t1: Some(self.t1),
            rca_threshold: Some(self.rca_threshold),
            new_low_threshold: Some(self.new_low_threshold),
            baseline_scope: Some(self.baseline_scope),
            draws: Some(self.draws),
            seed: self.seed.map(SeedValue::from_u64),
            grid_points: Some(self.grid_points),
            bandwidth: Some(match self.bandwidth {
                Bandwidth::Auto => BandwidthValue::Text("auto".into()),
                Bandwidth::Explicit(h) => BandwidthValue::Number(h),
            }),
            shared_bandwidth: Some(self.shared_bandwidth),
            exclude_actual_from_pool: Some(self.exclude_actual_from_pool),
            dependent_mode: Some(self.dependent_mode),
            pd_threshold: Some(self.pd_threshold),
            full_table: Some(self.full_table),
            countries: Some(self.countries.clone()),
            regressors: Some(self.regressors.clone()),
            trade: self.trade.clone(),
            green: self.green.clone(),
            indicators: self.indicators.clone(),
            year_column: Some(self.schema.year.clone()),
            country_column: Some(self.schema.country.clone()),
            product_column: Some(self.schema.product.clone()),
            value_column: Some(self.schema.value.clone()),
            output_dir: None,
            manifest: None,
        }
    }
}
