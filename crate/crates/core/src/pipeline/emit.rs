use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diversify::CountryDiversification;
use crate::error::{Error, Result};
use crate::matrices::RcaMatrix;
use crate::stats::CounterfactualResult;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_density_csv<W: Write>(result: &CounterfactualResult, writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["grid_point", "actual_density", "counterfactual_density"])?;
    let a = &result.actual_density;
    let c = &result.counterfactual_density;
    for ((x, ya), yc) in a.grid.iter().zip(&a.values).zip(&c.values) {
        w.write_record([x.to_string(), ya.to_string(), yc.to_string()])?;
    }
    w.flush()
}

/// Plot-ready density file: `grid_point,actual_density,counterfactual_density`.
pub fn emit_density_csv(result: &CounterfactualResult, path: &Path) -> Result<()> {
    write_with(path, |w| write_density_csv(result, w))
}

fn format_intervals(intervals: &[[f64; 2]]) -> String {
    if intervals.is_empty() {
        return "none".into();
    }
    intervals
        .iter()
        .map(|[lo, hi]| format!("[{lo:.3}, {hi:.3}]"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One classification block per counterfactual result, then the regression
/// block verbatim.
pub fn render_report(results: &[CounterfactualResult], regression: &str) -> String {
    let mut out = String::new();
    for r in results {
        let regions = &r.regions;
        writeln!(out, "== Relatedness classification ({}) ==", r.scope).unwrap();
        writeln!(out, "verdict: {}", regions.verdict).unwrap();
        writeln!(out, "path-dependent: {}", format_intervals(&regions.path_dependent)).unwrap();
        writeln!(out, "non-path-dependent: {}", format_intervals(&regions.non_path_dependent)).unwrap();
        writeln!(out, "path-dependent excess mass: {:.6}", regions.path_dependent_mass).unwrap();
        writeln!(
            out,
            "actual observations: {} (countries: {})",
            r.actual_count(),
            r.actual.len()
        )
        .unwrap();
        writeln!(
            out,
            "counterfactual observations: {} ({} draws)",
            r.counterfactual_sample.len(),
            r.draws
        )
        .unwrap();
        writeln!(
            out,
            "bandwidth (actual): {:.6} [{}]",
            r.actual_density.bandwidth, r.actual_bandwidth_source
        )
        .unwrap();
        writeln!(
            out,
            "bandwidth (counterfactual): {:.6} [{}]",
            r.counterfactual_density.bandwidth, r.counterfactual_bandwidth_source
        )
        .unwrap();
        writeln!(out, "grid points: {}", r.actual_density.grid.len()).unwrap();
        writeln!(out, "seed: {}", r.seed).unwrap();
        writeln!(out).unwrap();
    }
    writeln!(out, "== Regression ==").unwrap();
    out.push_str(regression);
    out
}

pub fn emit_report(results: &[CounterfactualResult], regression: &str, path: &Path) -> Result<()> {
    let text = render_report(results, regression);
    write_with(path, |w| w.write_all(text.as_bytes()))
}

pub fn write_new_products_csv<W: Write>(
    rows: &[CountryDiversification],
    rca_t0: &RcaMatrix,
    rca_t1: &RcaMatrix,
    writer: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["country", "product", "rca_t0", "rca_t1"])?;
    for row in rows {
        let c = &row.new_set.country;
        for p in &row.new_set.products {
            let r0 = rca_t0.get(c, p).unwrap_or(0.0);
            let r1 = rca_t1.get(c, p).unwrap_or(0.0);
            w.write_record([c.clone(), p.clone(), r0.to_string(), r1.to_string()])?;
        }
    }
    w.flush()
}

pub fn write_relatedness_csv<W: Write>(rows: &[CountryDiversification], writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["country", "product", "d_value"])?;
    for row in rows {
        for (p, d) in &row.sample.observations {
            w.write_record([row.sample.country.as_str(), p.as_str(), d.to_string().as_str()])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::classify::{ClassificationIntervals, Verdict};
    use crate::stats::{BandwidthSource, DensityEstimate, Scope};

    fn result(verdict: Verdict, pd: Vec<[f64; 2]>, npd: Vec<[f64; 2]>) -> CounterfactualResult {
        let d = DensityEstimate {
            grid: vec![0.0, 1.0],
            values: vec![1.0, 1.0],
            bandwidth: 0.1,
            n: 1,
        };
        CounterfactualResult {
            scope: Scope::Pooled,
            actual: Vec::new(),
            counterfactual_sample: Vec::new(),
            draws: 1000,
            seed: 42,
            actual_density: d.clone(),
            counterfactual_density: d,
            actual_bandwidth_source: BandwidthSource::Silverman,
            counterfactual_bandwidth_source: BandwidthSource::Silverman,
            regions: ClassificationIntervals {
                path_dependent: pd,
                non_path_dependent: npd,
                verdict,
                path_dependent_mass: 0.0,
            },
        }
    }

    #[test]
    fn report_lists_intervals() {
        let text = render_report(&[result(Verdict::Mixed, vec![[0.58, 0.70]], vec![[0.7, 1.0]])], "table\n");
        assert!(text.contains("path-dependent: [0.580, 0.700]"));
        assert!(text.contains("seed: 42"));
        assert!(text.ends_with("table\n"));
    }

    #[test]
    fn report_full_and_none() {
        let text = render_report(&[result(Verdict::Full, vec![[0.0, 1.0]], vec![])], "");
        assert!(text.contains("full path-dependence"));
        assert!(text.contains("non-path-dependent: none"));
    }

    #[test]
    fn density_csv_rows() {
        let mut buf = Vec::new();
        write_density_csv(&result(Verdict::None, vec![], vec![]), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "grid_point,actual_density,counterfactual_density\n0,1,1\n1,1,1\n"
        );
    }

    #[test]
    fn unwritable_path() {
        let err = emit_report(&[], "", Path::new("/nonexistent-dir/report.txt")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
