//! Turning scores into routing decisions, plus the comparison baselines.
//!
//! Baselines consume externally supplied per-generator quality vectors, so
//! nothing here needs access to the generators themselves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::{Metric, NeighborIndex};
use crate::model::ThetaEstimate;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision<T> {
    pub sample_id: String,
    pub chosen: usize,
    pub scores: Vec<T>,
    pub method: String,
}

/// A labeled validation sample: its reference output and the measured quality
/// of every generator's output on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub sample_id: String,
    pub reference_output: String,
    pub per_generator_quality: Vec<f64>,
    /// Embedding of the input, for similarity-based baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<Vec<f64>>,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

pub fn route_argmax<T: Scalar>(theta: &ThetaEstimate<T>) -> RoutingDecision<T> {
    RoutingDecision {
        sample_id: theta.sample_id.clone(),
        chosen: argmax(&theta.scores).unwrap_or(0),
        scores: theta.scores.clone(),
        method: theta.mode.to_string(),
    }
}

pub fn route_all<T: Scalar>(estimates: &[ThetaEstimate<T>]) -> Vec<RoutingDecision<T>> {
    estimates.iter().map(route_argmax).collect()
}

/// Uniformly random generator per sample, reproducible under `seed`.
pub fn baseline_random<S: AsRef<str>>(sample_ids: &[S], m: usize, seed: u64) -> Result<Vec<RoutingDecision<f64>>> {
    if m == 0 {
        return Err(Error::InvalidConfig("random routing needs at least one generator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_ids
        .iter()
        .map(|id| {
            let chosen = rng.random_range(0..m);
            let mut scores = vec![0.0; m];
            scores[chosen] = 1.0;
            RoutingDecision { sample_id: id.as_ref().to_owned(), chosen, scores, method: "random".into() }
        })
        .collect())
}

/// Mean quality of each generator over the rows of `qualities`.
pub fn generator_means(qualities: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = qualities.first().ok_or(Error::EmptyValidationSet)?;
    let m = first.len();
    let mut sums = vec![0.0; m];
    for row in qualities {
        if row.len() != m {
            return Err(Error::LengthMismatch { left: row.len(), right: m });
        }
        for (s, q) in sums.iter_mut().zip(row) {
            *s += q;
        }
    }
    let n = qualities.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Expected quality of uniformly random routing: the mean of the per-generator means.
pub fn random_expected_performance(qualities: &[Vec<f64>]) -> Result<f64> {
    let means = generator_means(qualities)?;
    Ok(means.iter().sum::<f64>() / means.len() as f64)
}

pub fn baseline_best_on_val(val: &[LabeledExample]) -> Result<usize> {
    let rows: Vec<Vec<f64>> = val.iter().map(|e| e.per_generator_quality.clone()).collect();
    let means = generator_means(&rows)?;
    argmax(&means).ok_or(Error::EmptyValidationSet)
}

/// Per test sample, routes to the generator with the best mean quality over the
/// `k` validation examples whose keys are most cosine-similar.
pub fn baseline_labeled_knn<S: AsRef<str>>(
    val: &[LabeledExample],
    test: &[(S, Vec<f64>)],
    k: usize,
) -> Result<Vec<RoutingDecision<f64>>> {
    if val.is_empty() {
        return Err(Error::EmptyValidationSet);
    }
    if k == 0 || val.len() < k {
        return Err(Error::KTooLarge { k, available: val.len() });
    }
    let keys = val
        .iter()
        .map(|e| e.key.clone().ok_or_else(|| Error::MissingInputKey(e.sample_id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = val.iter().map(|e| e.sample_id.clone()).collect();
    let index = NeighborIndex::build(&keys, &ids, Metric::Cosine)?;
    test.iter()
        .map(|(id, key)| {
            let mut context: Vec<usize> = index.query(key, k, None)?.iter().map(|n| n.position).collect();
            context.sort_unstable();
            let rows: Vec<Vec<f64>> = context.iter().map(|&p| val[p].per_generator_quality.clone()).collect();
            let scores = generator_means(&rows)?;
            Ok(RoutingDecision {
                sample_id: id.as_ref().to_owned(),
                chosen: argmax(&scores).unwrap_or(0),
                scores,
                method: "labeled-knn".into(),
            })
        })
        .collect()
}
