//! End-to-end orchestration: ingest, RCA, proximity, new products,
//! counterfactual, regression and the report, run in that order.
//!
//! Each stage's artifacts are written into the output directory as soon as
//! the stage finishes. Any failure removes the files written so far and is
//! reported as [`Error::Stage`] naming the stage. The output directory is
//! locked for the duration of a run.

pub mod config;
pub mod emit;

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::info;
use sha2::{Digest, Sha256};

use crate::diversify::{diversify_all, CountryDiversification, DiversifyOptions};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ingest::{build_export_tensor, load_green_list, load_trade_csv, ExportTensor, GreenProductList};
use crate::matrices::{binarize, compute_proximity_with, compute_rca, ProximityMatrix, RcaMatrix};
use crate::regress::{
    build_dependent_variable, build_regression_table, load_indicator_csv, ols_fit, write_regression_csv,
    DependentMode, RegressionTable,
};
use crate::stats::rng::RNG_ALGORITHM;
use crate::stats::{monte_carlo_counterfactual_with, CounterfactualInput, CounterfactualResult, Scope};

pub use config::{Bandwidth, PartialConfig, PipelineConfig};

const LOCK_FILE: &str = ".greenspace.lock";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Rca,
    Proximity,
    NewProducts,
    Counterfactual,
    Regress,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Rca => "rca",
            Stage::Proximity => "proximity",
            Stage::NewProducts => "new-products",
            Stage::Counterfactual => "counterfactual",
            Stage::Regress => "regress",
            Stage::Report => "report",
        }
    }
}

/// Which stages a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Ingest only; writes the aggregated tensor.
    Ingest,
    Rca,
    Proximity,
    NewProducts,
    /// Through the counterfactual, plus the classification report.
    Counterfactual,
    /// New products and regression; no counterfactual, no seed needed.
    Regress,
    /// Everything.
    Run,
}

impl Target {
    fn includes(self, stage: Stage) -> bool {
        match self {
            Target::Ingest => stage == Stage::Ingest,
            Target::Rca => stage <= Stage::Rca,
            Target::Proximity => stage <= Stage::Proximity,
            Target::NewProducts => stage <= Stage::NewProducts,
            Target::Counterfactual => stage <= Stage::Counterfactual || stage == Stage::Report,
            Target::Regress => stage <= Stage::NewProducts || stage == Stage::Regress,
            Target::Run => true,
        }
    }
}

/// What a run produced.
#[derive(Debug, Default)]
pub struct RunSummary {
    /// Files written, in order.
    pub files: Vec<PathBuf>,
    pub counterfactual: Vec<CounterfactualResult>,
    pub regression: Vec<RegressionTable>,
}

#[derive(Debug)]
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output_dir: {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        // Record first so a half-written file is still cleaned up.
        self.written.push(path.clone());
        emit::write_with(&path, f)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn remove_all(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }
}

/// Runs every stage. See [`run_target`].
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    run_target(config, Target::Run, Exec::default())
}

/// Validates `config`, then runs the stages `target` selects.
pub fn run_target(config: &PipelineConfig, target: Target, exec: Exec) -> Result<RunSummary> {
    config.validate()?;
    config.require_trade()?;
    if target != Target::Ingest {
        config.require_green()?;
    }
    if target.includes(Stage::Counterfactual) {
        config.counterfactual_options()?;
    }
    if target == Target::Regress && config.indicators.is_none() {
        return Err(Error::Config("indicators: path is required for regression".into()));
    }

    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let _lock = DirLock::acquire(&config.output_dir)?;
    let mut out = Outputs {
        dir: config.output_dir.clone(),
        written: Vec::new(),
    };
    match run_stages(config, target, exec, &mut out) {
        Ok(mut summary) => {
            summary.files = out.written;
            Ok(summary)
        }
        Err(e) => {
            out.remove_all();
            Err(e)
        }
    }
}

fn stage<T>(s: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    info!("stage {}", s.name());
    f().map_err(|e| Error::Stage {
        stage: s.name(),
        source: Box::new(e),
    })
}

struct Ingested {
    tensor: ExportTensor,
    green: Option<GreenProductList>,
}

fn run_stages(config: &PipelineConfig, target: Target, exec: Exec, out: &mut Outputs) -> Result<RunSummary> {
    let mut summary = RunSummary::default();

    let ingested = stage(Stage::Ingest, || {
        let load = load_trade_csv(config.require_trade()?, &config.schema)?;
        let tensor = build_export_tensor(&load.records)?;
        let green = match target {
            Target::Ingest => None,
            _ => Some(load_green_list(config.require_green()?)?),
        };
        if target == Target::Ingest {
            out.write("tensor.csv", |w| tensor.write_csv(w))?;
        }
        Ok(Ingested { tensor, green })
    })?;
    if target == Target::Ingest {
        write_manifest(config, out)?;
        return Ok(summary);
    }
    let green = ingested.green.as_ref().expect("green list loaded");

    let (rca_t0, rca_t1) = stage(Stage::Rca, || {
        let r0 = compute_rca(&ingested.tensor, config.t0)?;
        let r1 = compute_rca(&ingested.tensor, config.t1)?;
        out.write("rca_t0.csv", |w| r0.write_csv(w))?;
        out.write("rca_t1.csv", |w| r1.write_csv(w))?;
        Ok((r0, r1))
    })?;
    if !target.includes(Stage::Proximity) {
        write_manifest(config, out)?;
        return Ok(summary);
    }

    let phi = stage(Stage::Proximity, || {
        let m = binarize(&rca_t0, config.rca_threshold);
        let phi = compute_proximity_with(&m, exec);
        out.write("proximity.csv", |w| phi.write_csv(w))?;
        Ok(phi)
    })?;
    if !target.includes(Stage::NewProducts) {
        write_manifest(config, out)?;
        return Ok(summary);
    }

    let rows = stage(Stage::NewProducts, || new_products(config, &rca_t0, &rca_t1, green, &phi, exec, out))?;

    if target.includes(Stage::Counterfactual) {
        summary.counterfactual = stage(Stage::Counterfactual, || counterfactual(config, &rows, &phi, exec, out))?;
    }

    let mut regression_text = String::from("not run: no indicator file configured\n");
    if target.includes(Stage::Regress) && config.indicators.is_some() {
        summary.regression = stage(Stage::Regress, || {
            let tables = regress(config, &rows, green)?;
            let text: String = tables.iter().map(|t| t.to_text() + "\n").collect();
            out.write("regression_table.txt", |w| w.write_all(text.as_bytes()))?;
            out.write("regression_table.csv", |w| write_regression_csv(&tables, w))?;
            Ok(tables)
        })?;
        regression_text = summary.regression.iter().map(|t| t.to_text() + "\n").collect();
    } else if target == Target::Counterfactual {
        regression_text = "not run\n".into();
    }

    if target.includes(Stage::Report) {
        stage(Stage::Report, || {
            let text = emit::render_report(&summary.counterfactual, &regression_text);
            out.write("classification_report.txt", |w| w.write_all(text.as_bytes()))
        })?;
    }
    write_manifest(config, out)?;
    Ok(summary)
}

fn new_products(
    config: &PipelineConfig,
    rca_t0: &RcaMatrix,
    rca_t1: &RcaMatrix,
    green: &GreenProductList,
    phi: &ProximityMatrix,
    exec: Exec,
    out: &mut Outputs,
) -> Result<Vec<CountryDiversification>> {
    let options = DiversifyOptions {
        criteria: config.criteria(),
        scope: config.baseline_scope,
        exclude_actual_from_pool: config.exclude_actual_from_pool,
    };
    let rows = diversify_all(rca_t0, rca_t1, green, phi, &options, exec)?;
    let total: usize = rows.iter().map(|r| r.new_set.products.len()).sum();
    info!("{total} new green products across {} countries", rows.len());
    out.write("new_green_products.csv", |w| emit::write_new_products_csv(&rows, rca_t0, rca_t1, w))?;
    out.write("relatedness.csv", |w| emit::write_relatedness_csv(&rows, w))?;
    Ok(rows)
}

fn counterfactual(
    config: &PipelineConfig,
    rows: &[CountryDiversification],
    phi: &ProximityMatrix,
    exec: Exec,
    out: &mut Outputs,
) -> Result<Vec<CounterfactualResult>> {
    let options = config.counterfactual_options()?;
    let inputs: Vec<CounterfactualInput> = rows
        .iter()
        .map(|r| CounterfactualInput {
            actual: r.sample.clone(),
            basket: r.basket.clone(),
            pool: r.pool.clone(),
        })
        .collect();
    let mut results = Vec::new();
    let pooled = monte_carlo_counterfactual_with(&inputs, phi, &Scope::Pooled, &options, exec)?;
    out.write("densities_pooled.csv", |w| emit::write_density_csv(&pooled, w))?;
    results.push(pooled);
    for country in &config.countries {
        if !rows.iter().any(|r| &r.new_set.country == country) {
            return Err(Error::CountryAbsent {
                country: country.clone(),
                year: config.t0,
            });
        }
        let r = monte_carlo_counterfactual_with(&inputs, phi, &Scope::Country(country.clone()), &options, exec)?;
        out.write(&format!("densities_{country}.csv"), |w| emit::write_density_csv(&r, w))?;
        results.push(r);
    }
    Ok(results)
}

fn regress(
    config: &PipelineConfig,
    rows: &[CountryDiversification],
    green: &GreenProductList,
) -> Result<Vec<RegressionTable>> {
    let path = config.indicators.as_deref().expect("checked by caller");
    let table = load_indicator_csv(path)?;
    let regressors = if config.regressors.is_empty() {
        table.names().to_vec()
    } else {
        for r in &config.regressors {
            if !table.names().contains(r) {
                return Err(Error::Config(format!(
                    "regressors: indicator `{r}` not found in {}",
                    path.display()
                )));
            }
        }
        config.regressors.clone()
    };
    if regressors.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no indicators", path.display())));
    }
    let modes = if config.full_table {
        vec![DependentMode::AllNew, DependentMode::PathDependentOnly]
    } else {
        vec![config.dependent_mode]
    };
    let new_sets: Vec<_> = rows.iter().map(|r| r.new_set.clone()).collect();
    let samples: Vec<_> = rows.iter().map(|r| r.sample.clone()).collect();
    modes
        .into_iter()
        .map(|mode| {
            let y = build_dependent_variable(&new_sets, &samples, green, mode, config.pd_threshold);
            // Specifications add regressors progressively.
            let fits = (1..=regressors.len())
                .map(|k| ols_fit(&y, &table, &regressors[..k]))
                .collect::<Result<Vec<_>>>()?;
            let title = match mode {
                DependentMode::AllNew => "Share of new green products (all-new)".to_string(),
                DependentMode::PathDependentOnly => format!(
                    "Share of new green products (path-dependent-only, d >= {})",
                    config.pd_threshold
                ),
            };
            Ok(build_regression_table(&title, fits))
        })
        .collect()
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// The run's settings as a loadable config file, plus a `[manifest]` table
/// with the tool version, generator and input hashes.
pub fn render_manifest(config: &PipelineConfig) -> Result<String> {
    // Absolute input paths, so the manifest loads as a config from anywhere.
    let mut partial = config.to_partial();
    for p in [&mut partial.trade, &mut partial.green, &mut partial.indicators].into_iter().flatten() {
        *p = fs::canonicalize(&*p).map_err(|e| Error::io(&*p, e))?;
    }
    let mut text = toml::to_string(&partial)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    let mut manifest = toml::Table::new();
    manifest.insert("tool".into(), env!("CARGO_PKG_NAME").into());
    manifest.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    manifest.insert("rng".into(), RNG_ALGORITHM.into());
    let mut hashes = toml::Table::new();
    for (field, path) in [("trade", &config.trade), ("green", &config.green), ("indicators", &config.indicators)] {
        if let Some(p) = path {
            hashes.insert(format!("{field}_sha256"), file_sha256(p)?.into());
        }
    }
    manifest.extend(hashes);
    let mut wrapper = toml::Table::new();
    wrapper.insert("manifest".into(), manifest.into());
    text.push('\n');
    text.push_str(&toml::to_string(&wrapper).map_err(|e| Error::Config(format!("manifest serialization: {e}")))?);
    Ok(text)
}

fn write_manifest(config: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    stage(Stage::Report, || {
        let text = render_manifest(config)?;
        out.write(MANIFEST_FILE, |w| w.write_all(text.as_bytes()))
    })
}
