//! Green product-space analytics: revealed comparative advantage, product
//! proximity, new-product relatedness, dart-board counterfactual densities and
//! OLS over green-growth indicators.

pub mod diversify;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod matrices;
pub mod pipeline;
pub mod regress;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Exec;
