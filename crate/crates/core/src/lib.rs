//! A redistricting simulation engine: draws representative ensembles of
//! contiguous, population-balanced district plans on precinct adjacency
//! graphs by sequential Monte Carlo, scores them with compactness,
//! partisan, split, and minority statistics, and validates samples with
//! convergence diagnostics.

pub mod constraints;
pub mod diagnostics;
pub mod elections;
pub mod error;
pub mod exec;
pub mod export;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod tree;

pub use constraints::{ConstraintSpec, SoftTerm};
pub use diagnostics::DiagnosticsReport;
pub use elections::ElectionSet;
pub use error::{Error, Result};
pub use graph::{Graph, NodeMask, Plan};
pub use ingest::{load_map, MapParams, PrecinctRecord, RedistMap};
pub use metrics::StatsTable;
pub use sampler::{smc_sample, DrawId, PlanEnsemble, SamplerParams};
