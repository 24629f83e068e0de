//! Kernel densities, the dart-board counterfactual and region classification.

pub mod classify;
pub mod counterfactual;
pub mod kde;
pub mod rng;

pub use classify::{classify_regions, ClassificationIntervals, Verdict};
pub use counterfactual::{
    monte_carlo_counterfactual, monte_carlo_counterfactual_with, BandwidthRule, BandwidthSource,
    CounterfactualInput, CounterfactualOptions, CounterfactualResult, Scope,
};
pub use kde::{kde_evaluate, kde_evaluate_weighted, kde_evaluate_with, silverman_bandwidth, uniform_grid, DensityEstimate};
