//! Amortized, subset-searching causal discovery on bipartite X → Y graphs.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod data;
pub mod discovery;
pub mod error;
pub mod gcm;
pub mod io;
pub mod model;
pub mod rng;
pub mod search;
pub mod synthgen;

pub use data::{DataMatrix, Domain, GroundTruthGraph};
pub use discovery::{discover, DiscoveryConfig, DiscoveryReport};
pub use error::{Result, ScslError};
pub use search::{search_edge, EdgeResult, SearchConfig, SearchMode};
