//! OLS with classical inference over green-growth indicators, and the
//! multi-specification report table.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::diversify::{NewGreenProductSet, RelatednessSample};
use crate::error::{Error, Result};
use crate::ingest::GreenProductList;

pub const INTERCEPT: &str = "Intercept";

/// Per-country indicator values at t0. Missing values are `None`, never zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndicatorTable {
    names: Vec<String>,
    rows: BTreeMap<String, BTreeMap<String, Option<f64>>>,
}

impl IndicatorTable {
    /// Indicator names in order of first appearance.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn insert(&mut self, country: &str, name: &str, value: Option<f64>) -> Result<()> {
        if !self.names.iter().any(|n| n == name) {
            self.names.push(name.to_string());
        }
        let row = self.rows.entry(country.to_string()).or_default();
        if row.insert(name.to_string(), value).is_some() {
            return Err(Error::Malformed(format!("duplicate indicator `{name}` for {country}")));
        }
        Ok(())
    }

    /// `None` when the value is missing or the country/indicator is absent.
    pub fn value(&self, country: &str, name: &str) -> Option<f64> {
        self.rows.get(country)?.get(name).copied().flatten()
    }
}

fn parse_indicator(raw: &str) -> Result<Option<f64>, String> {
    match raw.trim() {
        "" | "NA" | "NaN" | "nan" | ".." | "null" => Ok(None),
        s => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| format!("non-numeric indicator value `{s}`")),
    }
}

pub fn load_indicator_csv(path: &Path) -> Result<IndicatorTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_indicator_csv(file, path)
}

/// Reads `country_iso3,indicator_name,value` rows.
pub fn read_indicator_csv<R: Read>(reader: R, source: &Path) -> Result<IndicatorTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    let column = |name: &'static str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: source.to_path_buf(),
            column: name.to_string(),
            role: name,
        })
    };
    let (c, n, v) = (column("country_iso3")?, column("indicator_name")?, column("value")?);
    let mut table = IndicatorTable::default();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(source, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let value = parse_indicator(record.get(v).unwrap_or(""))
            .map_err(|e| Error::Malformed(format!("{}:{line}: {e}", source.display())))?;
        table.insert(record.get(c).unwrap_or(""), record.get(n).unwrap_or(""), value)?;
    }
    if table.rows.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no indicator rows", source.display())));
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DependentMode {
    #[default]
    AllNew,
    PathDependentOnly,
}

impl FromStr for DependentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-new" => Ok(DependentMode::AllNew),
            "path-dependent-only" => Ok(DependentMode::PathDependentOnly),
            other => Err(Error::Config(format!(
                "dependent_mode: expected `all-new` or `path-dependent-only`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for DependentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DependentMode::AllNew => "all-new",
            DependentMode::PathDependentOnly => "path-dependent-only",
        })
    }
}

/// Share of new green products over the size of the green list, per country.
///
/// In path-dependent-only mode a new product counts when its max-relatedness
/// is at least `pd_threshold`; products without a defined relatedness do not
/// count.
pub fn build_dependent_variable(
    new_sets: &[NewGreenProductSet],
    samples: &[RelatednessSample],
    green: &GreenProductList,
    mode: DependentMode,
    pd_threshold: f64,
) -> BTreeMap<String, f64> {
    let total = green.len() as f64;
    new_sets
        .iter()
        .map(|set| {
            let count = match mode {
                DependentMode::AllNew => set.products.len(),
                DependentMode::PathDependentOnly => samples
                    .iter()
                    .find(|s| s.country == set.country)
                    .map_or(0, |s| {
                        s.observations
                            .iter()
                            .filter(|(p, d)| set.products.contains(p) && *d >= pd_threshold)
                            .count()
                    }),
            };
            let y = if total > 0.0 { count as f64 / total } else { 0.0 };
            (set.country.clone(), y)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    /// `Intercept` followed by the regressors.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub n: usize,
    pub df: usize,
    pub r_squared: f64,
    pub rss: f64,
    pub tss: f64,
    pub residuals: Vec<f64>,
    /// Observations used, in row order.
    pub countries: Vec<String>,
    /// Countries dropped for missing indicator values.
    pub deleted: Vec<String>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Fits `y` on the listed indicators plus an intercept, dropping countries
/// with any missing value.
pub fn ols_fit(y: &BTreeMap<String, f64>, x: &IndicatorTable, regressors: &[String]) -> Result<RegressionResult> {
    let mut rows_y = Vec::new();
    let mut columns = vec![Vec::new(); regressors.len()];
    let mut countries = Vec::new();
    let mut deleted = Vec::new();
    for (country, &yv) in y {
        let values: Option<Vec<f64>> = regressors.iter().map(|r| x.value(country, r)).collect();
        match values {
            Some(values) => {
                rows_y.push(yv);
                for (col, v) in columns.iter_mut().zip(values) {
                    col.push(v);
                }
                countries.push(country.clone());
            }
            None => deleted.push(country.clone()),
        }
    }
    let mut result = fit_ols(&rows_y, &columns, regressors)?;
    result.countries = countries;
    result.deleted = deleted;
    Ok(result)
}

/// Least squares of `y` on an intercept and `columns` via Householder QR.
pub fn fit_ols(y: &[f64], columns: &[Vec<f64>], names: &[String]) -> Result<RegressionResult> {
    let n = y.len();
    let needed = columns.len() + 2;
    if n < needed {
        return Err(Error::TooFewObservations { n, needed });
    }
    if columns.iter().any(|c| c.len() != n) || names.len() != columns.len() {
        return Err(Error::InvalidArgument("regressor columns must match y and names".into()));
    }
    let mut all_names = vec![INTERCEPT.to_string()];
    all_names.extend(names.iter().cloned());
    let mut design = vec![vec![1.0; n]];
    design.extend(columns.iter().cloned());
    let k = design.len();

    let qr = householder(design.clone(), y.to_vec(), &all_names)?;
    let beta = back_substitute(&qr.r, &qr.qty[..k]);

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..k).map(|j| design[j][i] * beta[j]).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    let df = n - k;
    let sigma2 = rss / df as f64;
    let r_inv = invert_upper(&qr.r);
    let t_dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut standard_errors = Vec::with_capacity(k);
    let mut t_statistics = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for j in 0..k {
        // Diagonal of R⁻¹R⁻ᵀ.
        let var = (j..k).map(|c| r_inv[j][c] * r_inv[j][c]).sum::<f64>() * sigma2;
        let se = var.sqrt();
        let (t, p) = if se > 0.0 {
            let t = beta[j] / se;
            (t, (2.0 * t_dist.sf(t.abs())).min(1.0))
        } else if beta[j] != 0.0 {
            (f64::INFINITY.copysign(beta[j]), 0.0)
        } else {
            (0.0, 1.0)
        };
        standard_errors.push(se);
        t_statistics.push(t);
        p_values.push(p);
    }

    Ok(RegressionResult {
        names: all_names,
        coefficients: beta,
        standard_errors,
        t_statistics,
        p_values,
        n,
        df,
        r_squared,
        rss,
        tss,
        residuals,
        countries: Vec::new(),
        deleted: Vec::new(),
    })
}

struct Qr {
    /// Upper-triangular `k × k`, row-major rows.
    r: Vec<Vec<f64>>,
    qty: Vec<f64>,
}

/// Relative norm below which a column counts as linearly dependent on the
/// preceding ones.
const RANK_TOLERANCE: f64 = 1e-9;

fn householder(mut cols: Vec<Vec<f64>>, mut y: Vec<f64>, names: &[String]) -> Result<Qr> {
    let n = y.len();
    let k = cols.len();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    for j in 0..k {
        let tail_norm = cols[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norms[j] == 0.0 || tail_norm <= RANK_TOLERANCE * norms[j] {
            return Err(rank_error(&cols, j, names));
        }
        let alpha = if cols[j][j] > 0.0 { -tail_norm } else { tail_norm };
        let mut v: Vec<f64> = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= f * vi;
            }
        };
        for col in cols.iter_mut().skip(j) {
            reflect(&mut col[j..n]);
        }
        reflect(&mut y[j..n]);
        cols[j][j] = alpha;
        for v in cols[j][j + 1..].iter_mut() {
            *v = 0.0;
        }
    }
    let r = (0..k).map(|i| (0..k).map(|j| if j >= i { cols[j][i] } else { 0.0 }).collect()).collect();
    Ok(Qr { r, qty: y })
}

/// Names the preceding columns that the collapsed column `j` is built from.
fn rank_error(cols: &[Vec<f64>], j: usize, names: &[String]) -> Error {
    // After the first j reflections, cols[j][..j] holds the column's
    // coordinates in the basis of the preceding columns' R block.
    let r: Vec<Vec<f64>> = (0..j).map(|i| (0..j).map(|c| if c >= i { cols[c][i] } else { 0.0 }).collect()).collect();
    let coords = back_substitute(&r, &cols[j][..j]);
    let scale = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let with = coords
        .iter()
        .enumerate()
        .filter(|(_, c)| scale > 0.0 && c.abs() > 1e-8 * scale)
        .map(|(i, _)| names[i].clone())
        .collect();
    Error::RankDeficient {
        column: names[j].clone(),
        with,
    }
}

fn back_substitute(r: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / r[i][i];
    }
    x
}

fn invert_upper(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = r.len();
    let mut inv = vec![vec![0.0; k]; k];
    for col in 0..k {
        let mut e = vec![0.0; k];
        e[col] = 1.0;
        let x = back_substitute(r, &e);
        for row in 0..k {
            inv[row][col] = x[row];
        }
    }
    inv
}

/// `**` for p < 0.001, `*` for p < 0.05.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn format_number(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).clamp(3, 12) as usize;
    format!("{v:.decimals$}")
}

/// Side-by-side specifications, one column per fit.
#[derive(Debug, Clone)]
pub struct RegressionTable {
    pub title: String,
    pub columns: Vec<RegressionResult>,
}

pub fn build_regression_table(title: &str, results: Vec<RegressionResult>) -> RegressionTable {
    RegressionTable {
        title: title.to_string(),
        columns: results,
    }
}

impl RegressionTable {
    fn terms(&self) -> Vec<String> {
        let mut terms: Vec<String> = Vec::new();
        for r in &self.columns {
            for name in r.names.iter().skip(1) {
                if !terms.contains(name) {
                    terms.push(name.clone());
                }
            }
        }
        terms.push(INTERCEPT.to_string());
        terms
    }

    pub fn to_text(&self) -> String {
        let terms = self.terms();
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec![String::new()];
        header.extend((1..=self.columns.len()).map(|i| format!("({i})")));
        rows.push(header);
        for term in &terms {
            let mut coef_row = vec![term.clone()];
            let mut se_row = vec![String::new()];
            for r in &self.columns {
                match r.coefficient(term) {
                    Some(j) => {
                        coef_row.push(format!(
                            "{}{}",
                            format_number(r.coefficients[j]),
                            significance_stars(r.p_values[j])
                        ));
                        se_row.push(format!("({})", format_number(r.standard_errors[j])));
                    }
                    None => {
                        coef_row.push(String::new());
                        se_row.push(String::new());
                    }
                }
            }
            rows.push(coef_row);
            rows.push(se_row);
        }
        let mut r2 = vec!["R-squared".to_string()];
        r2.extend(self.columns.iter().map(|r| format!("{:.4}", r.r_squared)));
        rows.push(r2);
        let mut n = vec!["Number of countries".to_string()];
        n.extend(self.columns.iter().map(|r| r.n.to_string()));
        rows.push(n);

        let widths: Vec<usize> = (0..=self.columns.len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        writeln!(out, "{}", self.title).unwrap();
        for row in &rows {
            let mut line = format!("{:<w$}", row[0], w = widths[0]);
            for (c, cell) in row.iter().enumerate().skip(1) {
                write!(line, "  {:>w$}", cell, w = widths[c]).unwrap();
            }
            writeln!(out, "{}", line.trim_end()).unwrap();
        }
        writeln!(out, "Standard errors in parentheses. Note: * p < 0.05, ** p < 0.001").unwrap();
        out
    }

    /// Long format: one row per (specification, term).
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        write_regression_csv(std::slice::from_ref(self), writer)
    }
}

/// Several tables in one long-format CSV, distinguished by the `table` column.
pub fn write_regression_csv<W: Write>(tables: &[RegressionTable], writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "table",
        "specification",
        "term",
        "coefficient",
        "std_error",
        "t_statistic",
        "p_value",
        "significance",
        "n",
        "r_squared",
    ])?;
    for table in tables {
        for (s, r) in table.columns.iter().enumerate() {
            for j in 0..r.names.len() {
                w.write_record([
                    table.title.clone(),
                    (s + 1).to_string(),
                    r.names[j].clone(),
                    r.coefficients[j].to_string(),
                    r.standard_errors[j].to_string(),
                    r.t_statistics[j].to_string(),
                    r.p_values[j].to_string(),
                    significance_stars(r.p_values[j]).to_string(),
                    r.n.to_string(),
                    r.r_squared.to_string(),
                ])?;
            }
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_fit() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let r = fit_ols(&y, &[x], &names(&["x"])).unwrap();
        assert!((r.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((r.coefficients[1] - 3.0).abs() < 1e-10);
        assert!((r.r_squared - 1.0).abs() < 1e-10);
        assert!(r.residuals.iter().all(|e| e.abs() < 1e-10));
        assert!(r.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn constant_regressor_is_rank_deficient() {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let err = fit_ols(&y, &[vec![5.0; 4]], &names(&["x"])).unwrap_err();
        match err {
            Error::RankDeficient { column, with } => {
                assert_eq!(column, "x");
                assert_eq!(with, vec![INTERCEPT.to_string()]);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn collinear_pair_named() {
        let a = vec![1.0, 2.0, 4.0, 7.0, 3.0];
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let err = fit_ols(&[1.0, 0.0, 2.0, 1.0, 5.0], &[a, b], &names(&["a", "b"])).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { ref column, ref with } if column == "b" && with == &vec!["a".to_string()]));
    }

    #[test]
    fn too_few_observations() {
        let err = fit_ols(&[1.0, 2.0], &[vec![1.0, 2.0]], &names(&["x"])).unwrap_err();
        assert!(matches!(err, Error::TooFewObservations { n: 2, needed: 3 }));
    }

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.03), "*");
        assert_eq!(significance_stars(0.0005), "**");
        assert_eq!(significance_stars(0.2), "");
        assert_eq!(significance_stars(0.049), "*");
        assert_eq!(significance_stars(0.051), "");
        assert_eq!(significance_stars(0.0009), "**");
        assert_eq!(significance_stars(0.0011), "*");
    }

    fn new_set(country: &str, products: &[&str]) -> NewGreenProductSet {
        NewGreenProductSet {
            country: country.into(),
            t0: 2007,
            t1: 2017,
            products: products.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
            low_threshold: 0.2,
        }
    }

    fn green_247() -> GreenProductList {
        GreenProductList::new((0..247).map(|i| format!("{i:06}"))).unwrap()
    }

    #[test]
    fn dependent_variable_modes() {
        let green = green_247();
        let ten: Vec<String> = (0..10).map(|i| format!("{i:06}")).collect();
        let ten_refs: Vec<&str> = ten.iter().map(String::as_str).collect();
        let sets = vec![new_set("AAA", &ten_refs), new_set("BBB", &[])];
        let y = build_dependent_variable(&sets, &[], &green, DependentMode::AllNew, 0.58);
        assert!((y["AAA"] - 0.040486).abs() < 1e-6);
        assert_eq!(y["AAA"], 10.0 / 247.0);
        assert_eq!(y["BBB"], 0.0);

        let sets = vec![new_set("AAA", &["000001", "000002"])];
        let samples = vec![RelatednessSample {
            country: "AAA".into(),
            observations: vec![("000001".into(), 0.8), ("000002".into(), 0.3)],
            undefined: false,
        }];
        let y = build_dependent_variable(&sets, &samples, &green, DependentMode::PathDependentOnly, 0.58);
        assert_eq!(y["AAA"], 1.0 / 247.0);
    }

    #[test]
    fn listwise_deletion() {
        let mut table = IndicatorTable::default();
        let mut y = BTreeMap::new();
        for (i, c) in ["AAA", "BBB", "CCC", "DDD", "EEE"].iter().enumerate() {
            table.insert(c, "x", Some(i as f64 * 1.5 + (i * i) as f64)).unwrap();
            y.insert(c.to_string(), i as f64);
        }
        table.insert("FFF", "x", None).unwrap();
        y.insert("FFF".into(), 9.0);
        y.insert("GGG".into(), 9.0);
        let r = ols_fit(&y, &table, &names(&["x"])).unwrap();
        assert_eq!(r.n, 5);
        assert_eq!(r.deleted, names(&["FFF", "GGG"]));
    }

    #[test]
    fn indicator_csv() {
        let text = "country_iso3,indicator_name,value\nCHN,patents,12\nCHN,per_capita,\nDEU,patents,NA\n";
        let t = read_indicator_csv(text.as_bytes(), Path::new("ind.csv")).unwrap();
        assert_eq!(t.names(), &names(&["patents", "per_capita"]));
        assert_eq!(t.value("CHN", "patents"), Some(12.0));
        assert_eq!(t.value("CHN", "per_capita"), None);
        assert_eq!(t.value("DEU", "patents"), None);
        let dup = "country_iso3,indicator_name,value\nCHN,p,1\nCHN,p,2\n";
        assert!(read_indicator_csv(dup.as_bytes(), Path::new("d.csv")).is_err());
    }

    #[test]
    fn table_layout() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 0.5 * v + if *v as i32 % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let r = fit_ols(&y, &[x], &names(&["per_capita"])).unwrap();
        let text = build_regression_table("Dependent: all-new", vec![r.clone(), r]).to_text();
        assert!(text.contains("(1)") && text.contains("(2)"));
        assert!(text.contains("per_capita"));
        assert!(text.contains("Number of countries"));
        assert!(text.lines().any(|l| l.starts_with("Number of countries") && l.ends_with('8')));
        assert!(text.contains("**"));
    }
}
