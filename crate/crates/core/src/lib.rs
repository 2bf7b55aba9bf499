//! Label-free routing across an ensemble of text generators.
//!
//! Each generator's output for a sample is embedded; the embeddings are
//! modeled as noisy observations of a latent true-output embedding, with
//! per-generator noise variance `1 / (2 * theta)`. The `theta` scores are
//! recovered in closed form from pairwise embedding distances, globally or per
//! sample through nearest-neighbor smoothing, and each sample is routed to the
//! generator with the highest score.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below fix the scalar type.

pub mod error;
pub mod io;
pub mod knn;
pub mod metrics;
pub mod model;
pub mod router;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use knn::{Metric, Neighbor, NeighborIndex};
pub use model::{
    estimate_global, estimate_leave_one_out, estimate_local, estimate_theta, estimate_train, pairwise_deltas,
    triplet_theta, DeltaMatrix, EmbeddingRecord, EnsembleSpec, EstimationMode, Sample, ThetaEstimate,
};
pub use router::{route_argmax, LabeledExample, RoutingDecision};
pub use scalar::Scalar;
pub use sim::{sample_dataset, sample_piecewise, SyntheticConfig, SyntheticDataset};

pub type EmbeddingRecordF64 = EmbeddingRecord<f64>;
pub type EmbeddingRecordF32 = EmbeddingRecord<f32>;
pub type DeltaMatrixF64 = DeltaMatrix<f64>;
pub type DeltaMatrixF32 = DeltaMatrix<f32>;
pub type ThetaEstimateF64 = ThetaEstimate<f64>;
pub type ThetaEstimateF32 = ThetaEstimate<f32>;
pub type NeighborIndexF64 = NeighborIndex<f64>;
pub type NeighborIndexF32 = NeighborIndex<f32>;
pub type RoutingDecisionF64 = RoutingDecision<f64>;
pub type RoutingDecisionF32 = RoutingDecision<f32>;
pub type SyntheticDatasetF64 = SyntheticDataset<f64>;
pub type SyntheticDatasetF32 = SyntheticDataset<f32>;
