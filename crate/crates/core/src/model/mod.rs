//! Graphical-model types and the closed-form quality-score estimator.

mod estimator;
mod types;

pub use estimator::{
    denominator_floor, estimate_global, estimate_leave_one_out, estimate_local, estimate_theta, estimate_train,
    local_index, neighbor_keys, pairwise_deltas, triplet_theta, PairDistances, ThetaScores, TripletTheta,
};
pub use types::{DeltaMatrix, EmbeddingRecord, EnsembleSpec, EstimationMode, Sample, ThetaEstimate, GLOBAL_SAMPLE_ID};
