//! Trade records, the green-product list and the export tensor.
//!
//! Export values are whole US dollars held in `u64`; every aggregate is an
//! exact integer sum, so the tensor total always equals the sum of the
//! accepted records.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExportRecord {
    pub year: i32,
    pub country: String,
    pub product: String,
    pub value: u64,
}

/// Column names for the four required roles of a trade CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeSchema {
    pub year: String,
    pub country: String,
    pub product: String,
    pub value: String,
}

impl Default for TradeSchema {
    fn default() -> Self {
        TradeSchema {
            year: "year".into(),
            country: "reporter_iso".into(),
            product: "hs6".into(),
            value: "trade_value_usd".into(),
        }
    }
}

impl TradeSchema {
    /// Schema of the serialized tensor (`year,country,product,value`).
    pub fn tensor() -> Self {
        TradeSchema {
            year: "year".into(),
            country: "country".into(),
            product: "product".into(),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    /// 1-based line number in the source file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct TradeLoad {
    pub records: Vec<ExportRecord>,
    pub rejected: Vec<RejectedRow>,
}

pub fn is_hs6(code: &str) -> bool {
    code.len() == 6 && code.bytes().all(|b| b.is_ascii_digit())
}

pub fn is_country_code(code: &str) -> bool {
    code.len() == 3 && code.bytes().all(|b| b.is_ascii_uppercase())
}

/// Parses a non-negative dollar amount, rounding any fractional cents half-up
/// to whole dollars.
pub fn parse_dollars(raw: &str) -> Option<u64> {
    let s = raw.trim();
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut dollars: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    if frac.as_bytes().first().is_some_and(|&b| b >= b'5') {
        dollars = dollars.checked_add(1)?;
    }
    Some(dollars)
}

pub fn load_trade_csv(path: &Path, schema: &TradeSchema) -> Result<TradeLoad> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trade_csv(file, schema, path)
}

/// Parses trade rows from any reader; `source` only labels errors and logs.
pub fn read_trade_csv<R: Read>(reader: R, schema: &TradeSchema, source: &Path) -> Result<TradeLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::EmptyInput(format!("{}: no header row", source.display())));
    }
    let column = |name: &str, role: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: source.to_path_buf(),
                column: name.to_string(),
                role,
            })
    };
    let year_col = column(&schema.year, "year")?;
    let country_col = column(&schema.country, "country")?;
    let product_col = column(&schema.product, "product")?;
    let value_col = column(&schema.value, "value")?;

    let mut out = TradeLoad::default();
    let mut rows = 0usize;
    for result in rdr.records() {
        let record = result.map_err(|e| Error::csv(source, e))?;
        rows += 1;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        match parse_row(field(year_col), field(country_col), field(product_col), field(value_col)) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => {
                warn!("{}:{line}: rejected row: {reason}", source.display());
                out.rejected.push(RejectedRow { line, reason });
            }
        }
    }
    if rows == 0 {
        return Err(Error::EmptyInput(format!("{}: no data rows", source.display())));
    }
    info!(
        "{}: {} records accepted, {} rejected",
        source.display(),
        out.records.len(),
        out.rejected.len()
    );
    Ok(out)
}

fn parse_row(year: &str, country: &str, product: &str, value: &str) -> Result<ExportRecord, String> {
    let year = year
        .parse::<i32>()
        .map_err(|_| format!("non-integer year `{year}`"))?;
    if !is_country_code(country) {
        return Err(format!("malformed country code `{country}`"));
    }
    if !is_hs6(product) {
        return Err(format!("malformed HS6 code `{product}`"));
    }
    let value = parse_dollars(value).ok_or_else(|| format!("non-numeric value `{value}`"))?;
    Ok(ExportRecord {
        year,
        country: country.to_string(),
        product: product.to_string(),
        value,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GreenProductList {
    codes: BTreeSet<String>,
}

impl GreenProductList {
    pub fn new<I, S>(codes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for code in codes {
            let code = code.as_ref().trim();
            if !is_hs6(code) {
                return Err(Error::InvalidCode(code.to_string()));
            }
            set.insert(code.to_string());
        }
        Ok(GreenProductList { codes: set })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.codes.contains(code)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(String::as_str)
    }
}

/// Reads one HS6 code per line. A non-numeric first line is treated as a CSV
/// header; blank lines and `#` comments are skipped.
pub fn load_green_list(path: &Path) -> Result<GreenProductList> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut tokens = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let token = line.split(',').next().unwrap_or("").trim().trim_matches('"').trim();
        if token.is_empty() || token.starts_with('#') {
            continue;
        }
        if i == 0 && !token.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        tokens.push(token.to_string());
    }
    let list = GreenProductList::new(&tokens)?;
    info!("{}: {} green products", path.display(), list.len());
    Ok(list)
}

/// Aggregated export values keyed by (year, country, product).
///
/// Axes are sorted lexicographically and indices into them follow that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportTensor {
    years: Vec<i32>,
    countries: Vec<String>,
    products: Vec<String>,
    values: BTreeMap<(i32, u32, u32), u64>,
}

pub fn build_export_tensor(records: &[ExportRecord]) -> Result<ExportTensor> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no export records".into()));
    }
    let years: BTreeSet<i32> = records.iter().map(|r| r.year).collect();
    let countries: BTreeSet<&str> = records.iter().map(|r| r.country.as_str()).collect();
    let products: BTreeSet<&str> = records.iter().map(|r| r.product.as_str()).collect();
    let country_idx: BTreeMap<&str, u32> = countries.iter().enumerate().map(|(i, c)| (*c, i as u32)).collect();
    let product_idx: BTreeMap<&str, u32> = products.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();

    let mut values: BTreeMap<(i32, u32, u32), u64> = BTreeMap::new();
    for r in records {
        let key = (r.year, country_idx[r.country.as_str()], product_idx[r.product.as_str()]);
        let slot = values.entry(key).or_insert(0);
        *slot = slot.checked_add(r.value).ok_or_else(|| {
            Error::Malformed(format!(
                "export value overflow at ({}, {}, {})",
                r.year, r.country, r.product
            ))
        })?;
    }
    Ok(ExportTensor {
        years: years.into_iter().collect(),
        countries: countries.into_iter().map(String::from).collect(),
        products: products.into_iter().map(String::from).collect(),
        values,
    })
}

impl ExportTensor {
    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn has_year(&self, year: i32) -> bool {
        self.years.binary_search(&year).is_ok()
    }

    pub fn get(&self, year: i32, country: &str, product: &str) -> u64 {
        let (Ok(c), Ok(p)) = (
            self.countries.binary_search_by(|x| x.as_str().cmp(country)),
            self.products.binary_search_by(|x| x.as_str().cmp(product)),
        ) else {
            return 0;
        };
        self.values.get(&(year, c as u32, p as u32)).copied().unwrap_or(0)
    }

    /// Number of stored (year, country, product) cells, zero-valued ones included.
    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    pub fn total(&self) -> u128 {
        self.values.values().map(|&v| v as u128).sum()
    }

    /// Dense row-major `countries × products` slice for one year; absent
    /// cells are zero.
    pub fn year_slice(&self, year: i32) -> Option<Vec<u64>> {
        if !self.has_year(year) {
            return None;
        }
        let width = self.products.len();
        let mut dense = vec![0u64; self.countries.len() * width];
        for (&(_, c, p), &v) in self.values.range((year, 0, 0)..=(year, u32::MAX, u32::MAX)) {
            dense[c as usize * width + p as usize] = v;
        }
        Some(dense)
    }

    /// Cells in (year, country, product) order.
    pub fn iter(&self) -> impl Iterator<Item = (i32, &str, &str, u64)> {
        self.values.iter().map(|(&(y, c, p), &v)| {
            (y, self.countries[c as usize].as_str(), self.products[p as usize].as_str(), v)
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["year", "country", "product", "value"])?;
        for (year, country, product, value) in self.iter() {
            w.write_record([year.to_string().as_str(), country, product, value.to_string().as_str()])?;
        }
        w.flush()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(PathBuf::from(path), e))
    }
}
