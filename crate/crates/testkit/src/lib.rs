//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the algorithm it checks: each oracle is written
//! from the definition, favouring obviousness over speed.

pub mod annotator;
pub mod gen;
pub mod refcluster;
pub mod metrics;
pub mod paths;
pub mod raycast;
pub mod tapnet;
