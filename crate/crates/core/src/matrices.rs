//! Balassa RCA, competitiveness binarization and the product-space proximity
//! network.

use std::io::Write;

use log::warn;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ingest::ExportTensor;

/// Row-major `countries × products` RCA values for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub year: i32,
    countries: Vec<String>,
    products: Vec<String>,
    values: Vec<f64>,
    /// Countries with zero total exports in this year.
    excluded: Vec<String>,
}

impl RcaMatrix {
    /// Builds a matrix from raw parts. `values` is row-major.
    pub fn from_parts(year: i32, countries: Vec<String>, products: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != countries.len() * products.len() {
            return Err(Error::InvalidArgument(format!(
                "RCA matrix needs {} values, got {}",
                countries.len() * products.len(),
                values.len()
            )));
        }
        Ok(RcaMatrix {
            year,
            countries,
            products,
            values,
            excluded: Vec::new(),
        })
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn country_index(&self, country: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == country)
    }

    pub fn product_index(&self, product: &str) -> Option<usize> {
        self.products.iter().position(|p| p == product)
    }

    pub fn row(&self, country: &str) -> Option<&[f64]> {
        let c = self.country_index(country)?;
        let w = self.products.len();
        Some(&self.values[c * w..(c + 1) * w])
    }

    pub fn get(&self, country: &str, product: &str) -> Option<f64> {
        let p = self.product_index(product)?;
        self.row(country).map(|r| r[p])
    }

    /// Writes the nonzero entries as `country,product,rca`.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["country", "product", "rca"])?;
        let width = self.products.len();
        for (c, country) in self.countries.iter().enumerate() {
            for (p, product) in self.products.iter().enumerate() {
                let v = self.values[c * width + p];
                if v != 0.0 {
                    w.write_record([country.as_str(), product.as_str(), v.to_string().as_str()])?;
                }
            }
        }
        w.flush()
    }
}

/// RCA for every country with positive exports in `year`.
///
/// The ratio is evaluated as `(x_cp · world) / (country_total · product_total)`
/// with exact integer numerator and denominator, so shares that cancel give
/// exact results.
pub fn compute_rca(tensor: &ExportTensor, year: i32) -> Result<RcaMatrix> {
    let dense = tensor.year_slice(year).ok_or(Error::YearAbsent(year))?;
    let width = tensor.products().len();
    let country_totals: Vec<u128> = dense
        .chunks(width)
        .map(|row| row.iter().map(|&v| v as u128).sum())
        .collect();
    let mut product_totals = vec![0u128; width];
    for row in dense.chunks(width) {
        for (t, &v) in product_totals.iter_mut().zip(row) {
            *t += v as u128;
        }
    }
    let world: u128 = country_totals.iter().sum();
    if world == 0 {
        return Err(Error::ZeroWorldExports(year));
    }

    let mut countries = Vec::new();
    let mut excluded = Vec::new();
    let mut values = Vec::new();
    for (c, row) in dense.chunks(width).enumerate() {
        let total = country_totals[c];
        if total == 0 {
            excluded.push(tensor.countries()[c].clone());
            continue;
        }
        countries.push(tensor.countries()[c].clone());
        values.extend(row.iter().zip(&product_totals).map(|(&x, &pt)| {
            if x == 0 {
                0.0
            } else {
                (x as u128 * world) as f64 / (total * pt) as f64
            }
        }));
    }
    if !excluded.is_empty() {
        warn!("year {year}: countries with zero total exports excluded from RCA: {excluded:?}");
    }
    Ok(RcaMatrix {
        year,
        countries,
        products: tensor.products().to_vec(),
        values,
        excluded,
    })
}

/// Binary country-product specialization (`M_cp`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompetitivenessMatrix {
    pub year: i32,
    countries: Vec<String>,
    products: Vec<String>,
    entries: Vec<bool>,
}

impl CompetitivenessMatrix {
    pub fn from_rows(year: i32, countries: Vec<String>, products: Vec<String>, entries: Vec<bool>) -> Result<Self> {
        if entries.len() != countries.len() * products.len() {
            return Err(Error::InvalidArgument(format!(
                "competitiveness matrix needs {} entries, got {}",
                countries.len() * products.len(),
                entries.len()
            )));
        }
        Ok(CompetitivenessMatrix {
            year,
            countries,
            products,
            entries,
        })
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn get(&self, country: usize, product: usize) -> bool {
        self.entries[country * self.products.len() + product]
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty() || self.products.is_empty()
    }
}

/// Entry is set iff RCA is strictly above `threshold`.
pub fn binarize(rca: &RcaMatrix, threshold: f64) -> CompetitivenessMatrix {
    CompetitivenessMatrix {
        year: rca.year,
        countries: rca.countries.clone(),
        products: rca.products.clone(),
        entries: rca.values.iter().map(|&v| v > threshold).collect(),
    }
}

/// Symmetric product-product proximity, dense `products × products`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    products: Vec<String>,
    values: Vec<f64>,
}

impl ProximityMatrix {
    /// Builds a matrix from a dense row-major array. Used for synthetic worlds.
    pub fn from_dense(products: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = products.len();
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "proximity matrix needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(ProximityMatrix { products, values })
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn index_of(&self, product: &str) -> Option<usize> {
        self.products.iter().position(|p| p == product)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.products.len() + j]
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.at(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (i + 1..n).all(|j| self.at(i, j).to_bits() == self.at(j, i).to_bits()))
    }

    /// Writes nonzero off-diagonal entries with `i < j` as `product_i,product_j,phi`.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["product_i", "product_j", "phi"])?;
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                let v = self.at(i, j);
                if v != 0.0 {
                    w.write_record([self.products[i].as_str(), self.products[j].as_str(), v.to_string().as_str()])?;
                }
            }
        }
        w.flush()
    }
}

pub fn compute_proximity(m: &CompetitivenessMatrix) -> ProximityMatrix {
    compute_proximity_with(m, Exec::default())
}

/// Minimum of the two co-export conditional probabilities for every product
/// pair. A product without any competitive exporter has proximity 0 to every
/// other product and a zero diagonal.
pub fn compute_proximity_with(m: &CompetitivenessMatrix, exec: Exec) -> ProximityMatrix {
    let n = m.products.len();
    let n_countries = m.countries.len();
    let words = n_countries.div_ceil(64);

    // One country bitset per product.
    let mut columns = vec![0u64; n * words];
    for c in 0..n_countries {
        for p in 0..n {
            if m.get(c, p) {
                columns[p * words + c / 64] |= 1 << (c % 64);
            }
        }
    }
    let column = |p: usize| &columns[p * words..(p + 1) * words];
    let ubiquity: Vec<u32> = (0..n).map(|p| column(p).iter().map(|w| w.count_ones()).sum()).collect();

    let rows: Vec<Vec<f64>> = exec.map_range(n, |i| {
        (i + 1..n)
            .map(|j| {
                let (ni, nj) = (ubiquity[i], ubiquity[j]);
                if ni == 0 || nj == 0 {
                    return 0.0;
                }
                let both: u32 = column(i)
                    .iter()
                    .zip(column(j))
                    .map(|(a, b)| (a & b).count_ones())
                    .sum();
                let given_j = both as f64 / nj as f64;
                let given_i = both as f64 / ni as f64;
                given_j.min(given_i)
            })
            .collect()
    });

    let mut values = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        values[i * n + i] = if ubiquity[i] > 0 { 1.0 } else { 0.0 };
        for (offset, phi) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            values[i * n + j] = phi;
            values[j * n + i] = phi;
        }
    }
    ProximityMatrix {
        products: m.products.clone(),
        values,
    }
}
