//! Seeded synthetic worlds for tests, benchmarks and the shipped fixtures.
//!
//! Two generators live here. [`LatentWorld`] builds a proximity matrix
//! directly from products placed on a circle, with country baskets as arcs,
//! so the dart-board test can be run on worlds whose ground truth is known.
//! [`TradeWorld`] produces raw export records, a green list and indicator
//! rows that exercise the full pipeline.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::diversify::{basket_indices, max_to_basket, BaselineBasket, BaselineScope, RelatednessSample};
use crate::ingest::ExportRecord;
use crate::matrices::ProximityMatrix;
use crate::stats::CounterfactualInput;

/// Three-letter code for the `i`-th synthetic country (`AAA`, `AAB`, ...).
pub fn country_code(i: usize) -> String {
    let letters: Vec<u8> = [i / 676 % 26, i / 26 % 26, i % 26].iter().map(|&d| b'A' + d as u8).collect();
    String::from_utf8(letters).unwrap()
}

pub fn product_code(i: usize) -> String {
    format!("{:06}", 100_000 + i)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

#[derive(Debug, Clone, Copy)]
pub struct LatentWorldConfig {
    pub products: usize,
    pub countries: usize,
    /// Arc length of each country's baseline basket.
    pub basket_width: f64,
    /// Decay length of proximity with latent distance.
    pub scale: f64,
    /// Multiplicative proximity noise amplitude in [0, 1).
    pub noise: f64,
    pub new_per_country: usize,
}

impl Default for LatentWorldConfig {
    fn default() -> Self {
        LatentWorldConfig {
            products: 400,
            countries: 200,
            basket_width: 0.15,
            scale: 0.2,
            noise: 0.2,
            new_per_country: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LatentCountry {
    pub code: String,
    pub basket: BaselineBasket,
    pub pool: Vec<String>,
    /// Max-relatedness of each pool product to the basket.
    pub pool_d: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LatentWorld {
    pub config: LatentWorldConfig,
    pub phi: ProximityMatrix,
    pub countries: Vec<LatentCountry>,
}

impl LatentWorld {
    pub fn generate(config: LatentWorldConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.products;
        let positions: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let products: Vec<String> = (0..n).map(product_code).collect();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in i + 1..n {
                let base = (-circular_distance(positions[i], positions[j]) / config.scale).exp();
                let phi = base * (1.0 - config.noise * rng.random::<f64>());
                values[i * n + j] = phi;
                values[j * n + i] = phi;
            }
        }
        let phi = ProximityMatrix::from_dense(products.clone(), values).expect("square matrix");

        let countries = (0..config.countries)
            .map(|c| {
                let center: f64 = rng.random();
                let mut basket: BTreeSet<String> = (0..n)
                    .filter(|&i| circular_distance(positions[i], center) < config.basket_width / 2.0)
                    .map(|i| products[i].clone())
                    .collect();
                if basket.is_empty() {
                    let nearest = (0..n)
                        .min_by(|&a, &b| {
                            circular_distance(positions[a], center).total_cmp(&circular_distance(positions[b], center))
                        })
                        .unwrap();
                    basket.insert(products[nearest].clone());
                }
                let basket = BaselineBasket {
                    country: country_code(c),
                    year: 2007,
                    products: basket,
                    scope: BaselineScope::AllProducts,
                };
                let pool: Vec<String> = products.iter().filter(|p| !basket.products.contains(*p)).cloned().collect();
                let idx = basket_indices(&basket, &phi).expect("basket products exist");
                let pool_d = pool
                    .iter()
                    .map(|p| max_to_basket(&phi, phi.index_of(p).unwrap(), &idx).unwrap_or(0.0))
                    .collect();
                LatentCountry {
                    code: country_code(c),
                    basket,
                    pool,
                    pool_d,
                }
            })
            .collect();
        LatentWorld { config, phi, countries }
    }

    fn inputs_from(&self, picks: impl Fn(usize, &LatentCountry) -> Vec<usize>) -> Vec<CounterfactualInput> {
        self.countries
            .iter()
            .enumerate()
            .map(|(c, country)| {
                let observations = picks(c, country)
                    .into_iter()
                    .map(|k| (country.pool[k].clone(), country.pool_d[k]))
                    .collect();
                CounterfactualInput {
                    actual: RelatednessSample {
                        country: country.code.clone(),
                        observations,
                        undefined: false,
                    },
                    basket: country.basket.clone(),
                    pool: country.pool.clone(),
                }
            })
            .collect()
    }

    /// New products drawn uniformly from each pool: no path dependence.
    pub fn null_inputs(&self, seed: u64) -> Vec<CounterfactualInput> {
        let k = self.config.new_per_country;
        self.inputs_from(|c, country| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            index::sample(&mut rng, country.pool.len(), k.min(country.pool.len())).into_vec()
        })
    }

    /// Each country adds exactly its single most related pool product.
    pub fn path_dependent_inputs(&self) -> Vec<CounterfactualInput> {
        self.inputs_from(|_, country| {
            let best = (0..country.pool.len())
                .max_by(|&a, &b| country.pool_d[a].total_cmp(&country.pool_d[b]))
                .expect("non-empty pool");
            vec![best]
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TradeWorldConfig {
    pub countries: usize,
    pub products: usize,
    pub green: usize,
    pub t0: i32,
    pub t1: i32,
}

impl Default for TradeWorldConfig {
    fn default() -> Self {
        TradeWorldConfig {
            countries: 40,
            products: 120,
            green: 60,
            t0: 2007,
            t1: 2017,
        }
    }
}

/// Raw inputs for one synthetic pipeline run.
#[derive(Debug, Clone)]
pub struct TradeWorld {
    pub records: Vec<ExportRecord>,
    pub green: Vec<String>,
    /// `(country, indicator, value)`; `None` marks a missing value.
    pub indicators: Vec<(String, String, Option<f64>)>,
}

pub const INDICATOR_NAMES: [&str; 3] = [
    "env_tech_per_capita",
    "env_patents",
    "env_tech_share_pct",
];

impl TradeWorld {
    /// Countries export products near their capability centre on a latent
    /// circle. Between t0 and t1 every centre drifts and capability breadth
    /// grows by an amount the indicators partly reflect.
    pub fn generate(config: TradeWorldConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions: Vec<f64> = (0..config.products).map(|_| rng.random::<f64>()).collect();
        let noise = LogNormal::new(0.0, 0.6).unwrap();
        let jitter = Normal::new(0.0, 1.0).unwrap();
        let mut green: Vec<String> = index::sample(&mut rng, config.products, config.green)
            .iter()
            .map(product_code)
            .collect();
        green.sort();

        let mut records = Vec::new();
        let mut indicators = Vec::new();
        for c in 0..config.countries {
            let code = country_code(c);
            let center: f64 = rng.random();
            let breadth = 0.04 + 0.08 * rng.random::<f64>();
            let growth: f64 = rng.random();
            let drift = 0.05 * jitter.sample(&mut rng);
            let size = 1e6 * (1.0 + 9.0 * rng.random::<f64>());
            for (year, center, width) in [
                (config.t0, center, breadth),
                (config.t1, center + drift, breadth * (1.0 + growth)),
            ] {
                for (p, &x) in positions.iter().enumerate() {
                    let dist = circular_distance(x, center.rem_euclid(1.0));
                    let intensity = (-0.5 * (dist / width).powi(2)).exp();
                    if intensity < 0.01 {
                        continue;
                    }
                    let value = (size * intensity * noise.sample(&mut rng)).round() as u64;
                    records.push(ExportRecord {
                        year,
                        country: code.clone(),
                        product: product_code(p),
                        value,
                    });
                }
            }
            let per_capita = 5.0 + 20.0 * growth + 3.0 * jitter.sample(&mut rng);
            let patents = (200.0 * size / 1e6 * (0.5 + growth)).round();
            let share = 8.0 + 4.0 * growth + jitter.sample(&mut rng);
            let missing = c % 13 == 7;
            indicators.push((code.clone(), INDICATOR_NAMES[0].to_string(), Some(per_capita)));
            indicators.push((code.clone(), INDICATOR_NAMES[1].to_string(), Some(patents)));
            indicators.push((code, INDICATOR_NAMES[2].to_string(), (!missing).then_some(share)));
        }
        TradeWorld {
            records,
            green,
            indicators,
        }
    }

    pub fn write_trade_csv<W: std::io::Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["year", "reporter_iso", "hs6", "trade_value_usd"])?;
        for r in &self.records {
            w.write_record([r.year.to_string(), r.country.clone(), r.product.clone(), r.value.to_string()])?;
        }
        w.flush()
    }

    pub fn write_green_list<W: std::io::Write>(&self, mut writer: W) -> std::io::Result<()> {
        for code in &self.green {
            writeln!(writer, "{code}")?;
        }
        Ok(())
    }

    pub fn write_indicator_csv<W: std::io::Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["country_iso3", "indicator_name", "value"])?;
        for (c, n, v) in &self.indicators {
            w.write_record([c.clone(), n.clone(), v.map_or(String::new(), |v| v.to_string())])?;
        }
        w.flush()
    }
}
