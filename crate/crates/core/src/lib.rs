//! Hypergraph diffusion kernels and the SHKC node classifier.
//!
//! The pipeline is: build a [`Hypergraph`] with edge-dependent vertex
//! weights, turn it into a symmetric [`TransitionMatrix`], apply the
//! multi-step [`DiffusionOperator`] to vertex features, then train a
//! [`ShkcModel`] on the diffused features. [`analysis`] evaluates the
//! stability constants and spectral views of the same objects.

pub mod analysis;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod hypergraph;
pub mod io;
pub mod model;
pub mod sparse;
pub mod synthetic;
pub mod transition;

pub use diffusion::{
    original_kernel, DiffusionEmbedding, DiffusionOperator, DiffusionParams, KernelKind,
    KernelMatrix,
};
pub use error::{Error, ErrorCategory, Result};
pub use hypergraph::{
    build_knn_hypergraph, concat_multimodal, FeatureMatrix, Hyperedge, Hypergraph, HypergraphStats,
    Labels, UNLABELED,
};
pub use model::{train, Optimizer, ShkcModel, Split, TrainConfig, TrainResult};
pub use sparse::CsrMatrix;
pub use transition::{build_transition, prop1_bound, RhoFunction, TransitionMatrix};
