//! Causal discovery for additive noise models with unobserved variables.
//!
//! The discovery engine ([`discovery`]) recovers, for every observed variable,
//! its observed direct causes, and marks pairs connected through latent
//! variables with dashed edges. Prior knowledge in the form of forbidden
//! cause/effect pairs restricts the search; [`timeseries`] uses that to
//! enforce time priority on a lag-embedded series.

pub mod bench;
pub mod cli;
pub mod discovery;
pub mod error;
pub mod eval;
pub mod gam;
pub mod graph;
pub mod kernel;
pub mod manifest;
pub mod simulate;
pub mod timeseries;

pub use discovery::{discover, DiscoveryConfig};
pub use error::{Error, Result};
pub use graph::{CausalGraph, Dataset, GroundTruth, PriorKnowledge};
pub use timeseries::{discover_ts, LagEdge, LagGraph};
