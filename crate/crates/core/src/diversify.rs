//! New green products between two years and their max-relatedness to the
//! baseline basket.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ingest::GreenProductList;
use crate::matrices::{ProximityMatrix, RcaMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineScope {
    #[default]
    AllProducts,
    GreenOnly,
}

impl FromStr for BaselineScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-products" => Ok(BaselineScope::AllProducts),
            "green-only" => Ok(BaselineScope::GreenOnly),
            other => Err(Error::Config(format!(
                "baseline_scope: expected `all-products` or `green-only`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for BaselineScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineScope::AllProducts => "all-products",
            BaselineScope::GreenOnly => "green-only",
        })
    }
}

/// Thresholds that decide when a product counts as newly specialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewProductCriteria {
    /// RCA at t0 must be strictly below this.
    pub low_threshold: f64,
    /// RCA at t1 must be strictly above this.
    pub rca_threshold: f64,
}

impl Default for NewProductCriteria {
    fn default() -> Self {
        NewProductCriteria {
            low_threshold: 0.2,
            rca_threshold: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewGreenProductSet {
    pub country: String,
    pub t0: i32,
    pub t1: i32,
    pub products: BTreeSet<String>,
    pub low_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineBasket {
    pub country: String,
    pub year: i32,
    pub products: BTreeSet<String>,
    pub scope: BaselineScope,
}

/// Max-relatedness of each new product to the baseline basket.
///
/// `undefined` is set when the basket is empty: there is nothing to be related
/// to and the sample carries no observations.
#[derive(Debug, Clone, PartialEq)]
pub struct RelatednessSample {
    pub country: String,
    pub observations: Vec<(String, f64)>,
    pub undefined: bool,
}

impl RelatednessSample {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|(_, d)| *d)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

fn check_low_threshold(low: f64) -> Result<()> {
    if low > 0.0 && low <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("low threshold must lie in (0, 1], got {low}")))
    }
}

pub fn identify_new_green_products(
    rca_t0: &RcaMatrix,
    rca_t1: &RcaMatrix,
    green: &GreenProductList,
    country: &str,
    criteria: NewProductCriteria,
) -> Result<NewGreenProductSet> {
    check_low_threshold(criteria.low_threshold)?;
    if rca_t0.products() != rca_t1.products() {
        return Err(Error::AxisMismatch(rca_t0.year, rca_t1.year));
    }
    let absent = |year| Error::CountryAbsent {
        country: country.to_string(),
        year,
    };
    let before = rca_t0.row(country).ok_or_else(|| absent(rca_t0.year))?;
    let after = rca_t1.row(country).ok_or_else(|| absent(rca_t1.year))?;
    let products = rca_t0
        .products()
        .iter()
        .zip(before.iter().zip(after))
        .filter(|(p, (&r0, &r1))| {
            green.contains(p) && r0 < criteria.low_threshold && r1 > criteria.rca_threshold
        })
        .map(|(p, _)| p.clone())
        .collect();
    Ok(NewGreenProductSet {
        country: country.to_string(),
        t0: rca_t0.year,
        t1: rca_t1.year,
        products,
        low_threshold: criteria.low_threshold,
    })
}

pub fn baseline_basket(
    rca_t0: &RcaMatrix,
    country: &str,
    green: &GreenProductList,
    scope: BaselineScope,
    rca_threshold: f64,
) -> Result<BaselineBasket> {
    let row = rca_t0.row(country).ok_or_else(|| Error::CountryAbsent {
        country: country.to_string(),
        year: rca_t0.year,
    })?;
    let products = rca_t0
        .products()
        .iter()
        .zip(row)
        .filter(|(p, &r)| r > rca_threshold && (scope == BaselineScope::AllProducts || green.contains(p)))
        .map(|(p, _)| p.clone())
        .collect();
    Ok(BaselineBasket {
        country: country.to_string(),
        year: rca_t0.year,
        products,
        scope,
    })
}

/// Green products the country could have diversified into: RCA at t0 below
/// the low threshold. With `exclude` set, the given products are left out.
pub fn candidate_pool(
    rca_t0: &RcaMatrix,
    country: &str,
    green: &GreenProductList,
    low_threshold: f64,
    exclude: Option<&BTreeSet<String>>,
) -> Result<Vec<String>> {
    let row = rca_t0.row(country).ok_or_else(|| Error::CountryAbsent {
        country: country.to_string(),
        year: rca_t0.year,
    })?;
    Ok(rca_t0
        .products()
        .iter()
        .zip(row)
        .filter(|(p, &r)| r < low_threshold && green.contains(p) && !exclude.is_some_and(|e| e.contains(*p)))
        .map(|(p, _)| p.clone())
        .collect())
}

/// Resolves basket products to proximity indices.
pub fn basket_indices(basket: &BaselineBasket, phi: &ProximityMatrix) -> Result<Vec<usize>> {
    basket
        .products
        .iter()
        .map(|p| phi.index_of(p).ok_or_else(|| Error::ProductMissing(p.clone())))
        .collect()
}

/// Largest proximity from `product` to any basket member; `None` for an empty
/// basket.
pub fn max_to_basket(phi: &ProximityMatrix, product: usize, basket: &[usize]) -> Option<f64> {
    basket.iter().map(|&j| phi.at(product, j)).reduce(f64::max)
}

pub fn max_relatedness(
    new_set: &NewGreenProductSet,
    basket: &BaselineBasket,
    phi: &ProximityMatrix,
) -> Result<RelatednessSample> {
    let basket_idx = basket_indices(basket, phi)?;
    let mut observations = Vec::with_capacity(new_set.products.len());
    for product in &new_set.products {
        let i = phi
            .index_of(product)
            .ok_or_else(|| Error::ProductMissing(product.clone()))?;
        if let Some(d) = max_to_basket(phi, i, &basket_idx) {
            observations.push((product.clone(), d));
        }
    }
    Ok(RelatednessSample {
        country: new_set.country.clone(),
        observations,
        undefined: basket_idx.is_empty(),
    })
}

/// Everything the downstream stages need about one country.
#[derive(Debug, Clone)]
pub struct CountryDiversification {
    pub new_set: NewGreenProductSet,
    pub basket: BaselineBasket,
    pub sample: RelatednessSample,
    pub pool: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct DiversifyOptions {
    pub criteria: NewProductCriteria,
    pub scope: BaselineScope,
    /// Drop the products that actually became new from the candidate pool.
    pub exclude_actual_from_pool: bool,
}

/// Runs the per-country steps for every country present in both years, in
/// country order. Countries missing from either year are skipped with a
/// warning.
pub fn diversify_all(
    rca_t0: &RcaMatrix,
    rca_t1: &RcaMatrix,
    green: &GreenProductList,
    phi: &ProximityMatrix,
    options: &DiversifyOptions,
    exec: Exec,
) -> Result<Vec<CountryDiversification>> {
    check_low_threshold(options.criteria.low_threshold)?;
    let mut eligible = Vec::new();
    for country in rca_t0.countries() {
        if rca_t1.country_index(country).is_some() {
            eligible.push(country.clone());
        } else {
            warn!("{country}: absent in {}, skipped", rca_t1.year);
        }
    }
    for country in rca_t1.countries() {
        if rca_t0.country_index(country).is_none() {
            warn!("{country}: absent in {}, skipped", rca_t0.year);
        }
    }
    exec.map(&eligible, |country| {
        let new_set = identify_new_green_products(rca_t0, rca_t1, green, country, options.criteria)?;
        let basket = baseline_basket(rca_t0, country, green, options.scope, options.criteria.rca_threshold)?;
        let sample = max_relatedness(&new_set, &basket, phi)?;
        let exclude = options.exclude_actual_from_pool.then_some(&new_set.products);
        let pool = candidate_pool(rca_t0, country, green, options.criteria.low_threshold, exclude)?;
        Ok(CountryDiversification {
            new_set,
            basket,
            sample,
            pool,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn products(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{i:06}")).collect()
    }

    fn rca(year: i32, countries: &[&str], values: Vec<f64>, n: usize) -> RcaMatrix {
        RcaMatrix::from_parts(year, countries.iter().map(|c| c.to_string()).collect(), products(n), values).unwrap()
    }

    #[test]
    fn new_product_definition() {
        let green = GreenProductList::new(["000001", "000002"]).unwrap();
        let t0 = rca(2007, &["AAA"], vec![0.1, 0.3], 2);
        let t1 = rca(2017, &["AAA"], vec![1.4, 1.4], 2);
        let set = identify_new_green_products(&t0, &t1, &green, "AAA", NewProductCriteria::default()).unwrap();
        assert_eq!(set.products.into_iter().collect::<Vec<_>>(), vec!["000001"]);
    }

    #[test]
    fn new_products_must_be_green() {
        let green = GreenProductList::new(["000002"]).unwrap();
        let t0 = rca(2007, &["AAA"], vec![0.0, 0.0], 2);
        let t1 = rca(2017, &["AAA"], vec![2.0, 2.0], 2);
        let set = identify_new_green_products(&t0, &t1, &green, "AAA", NewProductCriteria::default()).unwrap();
        assert_eq!(set.products.len(), 1);
        assert!(set.products.contains("000002"));
    }

    #[test]
    fn absent_country_and_bad_threshold() {
        let green = GreenProductList::new(["000001"]).unwrap();
        let t0 = rca(2007, &["AAA"], vec![0.1], 1);
        let t1 = rca(2017, &["BBB"], vec![1.4], 1);
        assert!(matches!(
            identify_new_green_products(&t0, &t1, &green, "AAA", NewProductCriteria::default()),
            Err(Error::CountryAbsent { year: 2017, .. })
        ));
        let criteria = NewProductCriteria {
            low_threshold: 0.0,
            rca_threshold: 1.0,
        };
        assert!(identify_new_green_products(&t0, &t0, &green, "AAA", criteria).is_err());
    }

    #[test]
    fn basket_scopes() {
        // Fixture F1 row for AAA.
        let t0 = rca(2007, &["AAA"], vec![3.0, 1.5, 0.0, 0.0], 4);
        let green = GreenProductList::new(["000002", "000004"]).unwrap();
        let all = baseline_basket(&t0, "AAA", &green, BaselineScope::AllProducts, 1.0).unwrap();
        assert_eq!(all.products.iter().collect::<Vec<_>>(), vec!["000001", "000002"]);
        let g = baseline_basket(&t0, "AAA", &green, BaselineScope::GreenOnly, 1.0).unwrap();
        assert_eq!(g.products.iter().collect::<Vec<_>>(), vec!["000002"]);
        let weak = rca(2007, &["AAA"], vec![1.0, 0.5, 0.0, 0.0], 4);
        assert!(baseline_basket(&weak, "AAA", &green, BaselineScope::AllProducts, 1.0)
            .unwrap()
            .products
            .is_empty());
    }

    fn dense_phi(n: usize, entries: &[(usize, usize, f64)]) -> ProximityMatrix {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        for &(i, j, x) in entries {
            v[i * n + j] = x;
            v[j * n + i] = x;
        }
        ProximityMatrix::from_dense(products(n), v).unwrap()
    }

    fn set(country: &str, items: &[&str]) -> NewGreenProductSet {
        NewGreenProductSet {
            country: country.into(),
            t0: 2007,
            t1: 2017,
            products: items.iter().map(|s| s.to_string()).collect(),
            low_threshold: 0.2,
        }
    }

    fn basket(items: &[&str]) -> BaselineBasket {
        BaselineBasket {
            country: "AAA".into(),
            year: 2007,
            products: items.iter().map(|s| s.to_string()).collect(),
            scope: BaselineScope::AllProducts,
        }
    }

    #[test]
    fn singleton_basket_max() {
        let phi = dense_phi(2, &[(0, 1, 0.7)]);
        let s = max_relatedness(&set("AAA", &["000001"]), &basket(&["000002"]), &phi).unwrap();
        assert_eq!(s.observations, vec![("000001".to_string(), 0.7)]);
        assert!(!s.undefined);
    }

    #[test]
    fn empty_basket_is_undefined() {
        let phi = dense_phi(2, &[(0, 1, 0.7)]);
        let s = max_relatedness(&set("AAA", &["000001"]), &basket(&[]), &phi).unwrap();
        assert!(s.undefined);
        assert!(s.is_empty());
    }

    #[test]
    fn missing_product_is_fatal() {
        let phi = dense_phi(2, &[]);
        let err = max_relatedness(&set("AAA", &["999999"]), &basket(&["000001"]), &phi).unwrap_err();
        assert!(matches!(err, Error::ProductMissing(p) if p == "999999"));
    }

    #[test]
    fn pool_with_and_without_exclusion() {
        let t0 = rca(2007, &["AAA"], vec![3.0, 0.1, 0.0, 0.5], 4);
        let green = GreenProductList::new(["000002", "000003", "000004"]).unwrap();
        let pool = candidate_pool(&t0, "AAA", &green, 0.2, None).unwrap();
        assert_eq!(pool, vec!["000002", "000003"]);
        let new: BTreeSet<String> = ["000003".to_string()].into();
        assert_eq!(candidate_pool(&t0, "AAA", &green, 0.2, Some(&new)).unwrap(), vec!["000002"]);
    }
}
