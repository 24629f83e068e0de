//! Dart-board counterfactual: for each country, redraw as many products as it
//! actually added, uniformly without replacement from its candidate pool, and
//! record their max-relatedness to the same baseline basket.

use std::fmt;

use rand::seq::index;

use crate::diversify::{basket_indices, max_to_basket, BaselineBasket, RelatednessSample};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matrices::ProximityMatrix;
use crate::stats::classify::{classify_regions, ClassificationIntervals};
use crate::stats::kde::{kde_evaluate_weighted, kde_evaluate_with, silverman_bandwidth, uniform_grid, DensityEstimate};
use crate::stats::rng::draw_rng;

/// Bandwidth used when neither sample supports Silverman's rule.
pub const FALLBACK_BANDWIDTH: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Pooled,
    Country(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Pooled => f.write_str("pooled"),
            Scope::Country(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Silverman's rule on each sample separately.
    Silverman,
    /// Silverman's rule on the actual sample, applied to both.
    SharedActual,
    Fixed(f64),
}

/// Where a reported bandwidth came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthSource {
    Silverman,
    /// The sample was degenerate; the other sample's Silverman bandwidth was used.
    Counterpart,
    /// Both samples were degenerate.
    Fallback,
    Shared,
    Explicit,
}

impl fmt::Display for BandwidthSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandwidthSource::Silverman => "silverman",
            BandwidthSource::Counterpart => "silverman (counterpart sample; own sample degenerate)",
            BandwidthSource::Fallback => "fallback (both samples degenerate)",
            BandwidthSource::Shared => "shared (silverman on actual sample)",
            BandwidthSource::Explicit => "explicit",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CounterfactualInput {
    pub actual: RelatednessSample,
    pub basket: BaselineBasket,
    pub pool: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterfactualOptions {
    pub draws: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub bandwidth: BandwidthRule,
}

impl CounterfactualOptions {
    pub fn new(seed: u64) -> Self {
        CounterfactualOptions {
            draws: 1000,
            seed,
            grid_points: 512,
            bandwidth: BandwidthRule::Silverman,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CounterfactualResult {
    pub scope: Scope,
    pub actual: Vec<RelatednessSample>,
    /// Pooled over countries (in country order), then draws, then draw members.
    pub counterfactual_sample: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
    pub actual_density: DensityEstimate,
    pub counterfactual_density: DensityEstimate,
    pub actual_bandwidth_source: BandwidthSource,
    pub counterfactual_bandwidth_source: BandwidthSource,
    pub regions: ClassificationIntervals,
}

impl CounterfactualResult {
    pub fn actual_values(&self) -> Vec<f64> {
        self.actual.iter().flat_map(|s| s.values()).collect()
    }

    pub fn actual_count(&self) -> usize {
        self.actual.iter().map(RelatednessSample::len).sum()
    }
}

pub fn monte_carlo_counterfactual(
    inputs: &[CounterfactualInput],
    phi: &ProximityMatrix,
    scope: &Scope,
    options: &CounterfactualOptions,
) -> Result<CounterfactualResult> {
    monte_carlo_counterfactual_with(inputs, phi, scope, options, Exec::default())
}

pub fn monte_carlo_counterfactual_with(
    inputs: &[CounterfactualInput],
    phi: &ProximityMatrix,
    scope: &Scope,
    options: &CounterfactualOptions,
    exec: Exec,
) -> Result<CounterfactualResult> {
    if options.draws == 0 {
        return Err(Error::InvalidArgument("draws must be at least 1".into()));
    }
    if options.grid_points < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
    }
    let mut selected: Vec<&CounterfactualInput> = match scope {
        Scope::Pooled => inputs.iter().collect(),
        Scope::Country(c) => {
            let found: Vec<_> = inputs.iter().filter(|i| &i.actual.country == c).collect();
            if found.is_empty() {
                return Err(Error::EmptyInput(format!("no relatedness sample for country {c}")));
            }
            found
        }
    };
    selected.retain(|i| !i.actual.undefined && !i.actual.is_empty());
    selected.sort_by(|a, b| a.actual.country.cmp(&b.actual.country));
    if selected.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no new green products with a defined relatedness in scope {scope}"
        )));
    }

    let mut counterfactual_sample = Vec::new();
    // Distinct pool values with draw counts: the same sample, compressed.
    let mut weighted = Vec::new();
    for input in &selected {
        let country = input.actual.country.as_str();
        let needed = input.actual.len();
        if input.pool.len() < needed {
            return Err(Error::InsufficientPool {
                country: country.to_string(),
                pool: input.pool.len(),
                needed,
            });
        }
        let basket = basket_indices(&input.basket, phi)?;
        let pool_d = input
            .pool
            .iter()
            .map(|p| {
                let i = phi.index_of(p).ok_or_else(|| Error::ProductMissing(p.clone()))?;
                Ok(max_to_basket(phi, i, &basket).unwrap_or(0.0))
            })
            .collect::<Result<Vec<f64>>>()?;

        let draws: Vec<Vec<usize>> = exec.map_range(options.draws, |draw| {
            let mut rng = draw_rng(options.seed, country, draw as u64);
            index::sample(&mut rng, pool_d.len(), needed).into_vec()
        });
        let mut counts = vec![0u64; pool_d.len()];
        for k in draws.into_iter().flatten() {
            counts[k] += 1;
            counterfactual_sample.push(pool_d[k]);
        }
        weighted.extend(
            counts
                .iter()
                .zip(&pool_d)
                .filter(|(&c, _)| c > 0)
                .map(|(&c, &d)| (d, c as f64)),
        );
    }

    let actual: Vec<RelatednessSample> = selected.iter().map(|i| i.actual.clone()).collect();
    let actual_values: Vec<f64> = actual.iter().flat_map(|s| s.values()).collect();
    let (ha, hc, src_a, src_c) = resolve_bandwidths(options.bandwidth, &actual_values, &counterfactual_sample)?;

    let grid = uniform_grid(options.grid_points, 0.0, 1.0);
    let actual_density = kde_evaluate_with(&actual_values, ha, &grid, exec)?;
    let counterfactual_density = kde_evaluate_weighted(&weighted, hc, &grid, exec)?;
    let regions = classify_regions(&actual_density, &counterfactual_density)?;

    Ok(CounterfactualResult {
        scope: scope.clone(),
        actual,
        counterfactual_sample,
        draws: options.draws,
        seed: options.seed,
        actual_density,
        counterfactual_density,
        actual_bandwidth_source: src_a,
        counterfactual_bandwidth_source: src_c,
        regions,
    })
}

fn resolve_bandwidths(
    rule: BandwidthRule,
    actual: &[f64],
    counterfactual: &[f64],
) -> Result<(f64, f64, BandwidthSource, BandwidthSource)> {
    match rule {
        BandwidthRule::Fixed(h) => {
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
            }
            Ok((h, h, BandwidthSource::Explicit, BandwidthSource::Explicit))
        }
        BandwidthRule::SharedActual => {
            let h = silverman_bandwidth(actual)
                .or_else(|_| silverman_bandwidth(counterfactual))
                .unwrap_or(FALLBACK_BANDWIDTH);
            Ok((h, h, BandwidthSource::Shared, BandwidthSource::Shared))
        }
        BandwidthRule::Silverman => {
            let (a, c) = (silverman_bandwidth(actual).ok(), silverman_bandwidth(counterfactual).ok());
            Ok(match (a, c) {
                (Some(a), Some(c)) => (a, c, BandwidthSource::Silverman, BandwidthSource::Silverman),
                (Some(a), None) => (a, a, BandwidthSource::Silverman, BandwidthSource::Counterpart),
                (None, Some(c)) => (c, c, BandwidthSource::Counterpart, BandwidthSource::Silverman),
                (None, None) => (
                    FALLBACK_BANDWIDTH,
                    FALLBACK_BANDWIDTH,
                    BandwidthSource::Fallback,
                    BandwidthSource::Fallback,
                ),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversify::BaselineScope;

    /// Fixture F1 proximities over products 000001..000004.
    fn f1_phi() -> ProximityMatrix {
        let mut v = vec![0.0; 16];
        for i in 0..4 {
            v[i * 4 + i] = 1.0;
        }
        for (i, j) in [(0, 1), (1, 2), (2, 3)] {
            v[i * 4 + j] = 0.5;
            v[j * 4 + i] = 0.5;
        }
        ProximityMatrix::from_dense((1..=4).map(|i| format!("{i:06}")).collect(), v).unwrap()
    }

    fn country_a(pool: &[&str]) -> CounterfactualInput {
        CounterfactualInput {
            actual: RelatednessSample {
                country: "AAA".into(),
                observations: vec![("000004".into(), 0.0)],
                undefined: false,
            },
            basket: BaselineBasket {
                country: "AAA".into(),
                year: 2007,
                products: ["000001".to_string(), "000002".to_string()].into(),
                scope: BaselineScope::AllProducts,
            },
            pool: pool.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn fixture_draws_split_between_two_values() {
        let opts = CounterfactualOptions::new(17);
        let r = monte_carlo_counterfactual(&[country_a(&["000003", "000004"])], &f1_phi(), &Scope::Pooled, &opts)
            .unwrap();
        assert_eq!(r.counterfactual_sample.len(), 1000);
        let high = r.counterfactual_sample.iter().filter(|&&d| d == 0.5).count();
        let low = r.counterfactual_sample.iter().filter(|&&d| d == 0.0).count();
        assert_eq!(high + low, 1000);
        assert!((450..=550).contains(&high), "{high}");
    }

    #[test]
    fn size_contract() {
        let mut input = country_a(&["000001", "000002", "000003", "000004"]);
        input.actual.observations = vec![("000004".into(), 0.0), ("000003".into(), 0.5), ("000002".into(), 1.0)];
        let opts = CounterfactualOptions {
            draws: 2,
            ..CounterfactualOptions::new(1)
        };
        let r = monte_carlo_counterfactual(&[input], &f1_phi(), &Scope::Pooled, &opts).unwrap();
        assert_eq!(r.counterfactual_sample.len(), 6);
    }

    #[test]
    fn small_pool_and_zero_draws() {
        let err = monte_carlo_counterfactual(&[country_a(&[])], &f1_phi(), &Scope::Pooled, &CounterfactualOptions::new(1))
            .unwrap_err();
        assert!(matches!(err, Error::InsufficientPool { pool: 0, needed: 1, .. }));
        let opts = CounterfactualOptions {
            draws: 0,
            ..CounterfactualOptions::new(1)
        };
        assert!(monte_carlo_counterfactual(&[country_a(&["000004"])], &f1_phi(), &Scope::Pooled, &opts).is_err());
    }

    #[test]
    fn degenerate_actual_uses_counterpart_bandwidth() {
        let opts = CounterfactualOptions::new(3);
        let r = monte_carlo_counterfactual(&[country_a(&["000003", "000004"])], &f1_phi(), &Scope::Pooled, &opts)
            .unwrap();
        assert_eq!(r.actual_bandwidth_source, BandwidthSource::Counterpart);
        assert_eq!(r.counterfactual_bandwidth_source, BandwidthSource::Silverman);
        assert_eq!(r.actual_density.bandwidth, r.counterfactual_density.bandwidth);
    }

    #[test]
    fn unknown_country_scope() {
        let err = monte_carlo_counterfactual(
            &[country_a(&["000004"])],
            &f1_phi(),
            &Scope::Country("ZZZ".into()),
            &CounterfactualOptions::new(1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn sequential_matches_parallel() {
        let opts = CounterfactualOptions::new(99);
        let inputs = [country_a(&["000003", "000004"])];
        let a = monte_carlo_counterfactual_with(&inputs, &f1_phi(), &Scope::Pooled, &opts, Exec::Sequential).unwrap();
        let b = monte_carlo_counterfactual_with(&inputs, &f1_phi(), &Scope::Pooled, &opts, Exec::Parallel).unwrap();
        assert_eq!(a.counterfactual_sample, b.counterfactual_sample);
        assert_eq!(a.counterfactual_density, b.counterfactual_density);
    }
}
