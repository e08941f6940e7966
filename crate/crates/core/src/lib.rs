//! Estimation of time-varying signed graph structure of binary pairwise
//! Markov random fields from a single time series.
//!
//! For a query time `tau`, every node's couplings are estimated by a
//! kernel-weighted, l1-penalized logistic pseudo-likelihood ([`optimizer`]);
//! the signed neighborhoods are then merged into a signed graph
//! ([`estimator`]). [`sampler`] generates data from smooth parameter paths
//! and [`diagnostics`] computes the Fisher-information quantities that
//! govern recovery.

pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod model;
pub mod optimizer;
pub mod sampler;

pub use error::{Error, Result};
pub use estimator::{
    estimate_graph, estimate_neighborhood, estimate_path, Bandwidth, Combine, EstimatorConfig, GraphEstimate, Penalty,
    SignedNeighborhood,
};
pub use kernel::{KernelShape, KernelSpec, WeightVector};
pub use model::{Couplings, Dataset, Graph, NodeParameter, Observation, SignedEdgeVector};
pub use optimizer::{SolveConfig, SolveResult};
pub use sampler::{generate_dataset, ParameterPath, SamplerMethod};
