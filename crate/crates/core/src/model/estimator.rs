use std::collections::HashMap;

use rayon::prelude::*;

use super::types::{
    pair_count, pairs, DeltaMatrix, EmbeddingRecord, EnsembleSpec, EstimationMode, Sample, ThetaEstimate,
    GLOBAL_SAMPLE_ID,
};
use crate::error::{Error, Result};
use crate::knn::{Metric, NeighborIndex};
use crate::scalar::{squared_distance, Scalar};

/// Smallest admissible triplet denominator for embedding dimension `d`.
pub fn denominator_floor<T: Scalar>(d: usize) -> T {
    T::of(1e-8) * T::of_usize(d)
}

/// Squared distance between every pair of generators, for every sample.
///
/// Deltas over any context are row means of this table, so local and train
/// estimation never recompute distances.
#[derive(Clone, Debug)]
pub struct PairDistances<T> {
    m: usize,
    dim: usize,
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> PairDistances<T> {
    pub fn compute<S: Sample<T> + Sync>(records: &[S]) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyContext)?;
        let m = first.generator_vectors().len();
        let dim = first.generator_vectors().first().map_or(0, Vec::len);
        for r in records {
            let vectors = r.generator_vectors();
            if vectors.len() != m {
                return Err(Error::inconsistent(r.sample_id(), format!("{} generators, expected {m}", vectors.len())));
            }
            if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
                return Err(Error::inconsistent(r.sample_id(), format!("dimension {}, expected {dim}", v.len())));
            }
        }
        let rows = records
            .par_iter()
            .map(|r| {
                let v = r.generator_vectors();
                pairs(m).map(|(i, j)| squared_distance(&v[i], &v[j])).collect()
            })
            .collect();
        Ok(Self { m, dim, rows })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Upper-triangle distances of one sample.
    pub fn row(&self, position: usize) -> &[T] {
        &self.rows[position]
    }

    /// Mean deltas over `positions`, accumulated in the order given.
    pub fn mean_over(&self, positions: impl IntoIterator<Item = usize>) -> Result<DeltaMatrix<T>> {
        let mut sums = vec![T::zero(); pair_count(self.m)];
        let mut count = 0usize;
        for p in positions {
            for (acc, &x) in sums.iter_mut().zip(&self.rows[p]) {
                *acc += x;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyContext);
        }
        let n = T::of_usize(count);
        sums.iter_mut().for_each(|s| *s /= n);
        DeltaMatrix::from_upper(self.m, &sums, count)
    }
}

/// Mean squared distance between every pair of generators over `records`.
pub fn pairwise_deltas<T: Scalar>(records: &[EmbeddingRecord<T>]) -> Result<DeltaMatrix<T>> {
    let table = PairDistances::compute(records)?;
    table.mean_over(0..table.len())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripletTheta<T> {
    pub theta: T,
    /// The denominator was at or below the floor and was replaced by it.
    pub clamped: bool,
}

/// Score of generator `i` solved from its moments against `j` and `k`:
/// `d / (delta_ij + delta_ik - delta_jk)`.
pub fn triplet_theta<T: Scalar>(
    delta: &DeltaMatrix<T>,
    i: usize,
    j: usize,
    k: usize,
    d: usize,
) -> Result<TripletTheta<T>> {
    let m = delta.m();
    if i == j || i == k || j == k || i >= m || j >= m || k >= m {
        return Err(Error::DegenerateTriplet { i, j, k, m });
    }
    if d == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be at least 1".into()));
    }
    let floor = denominator_floor::<T>(d);
    let denominator = delta.get(i, j) + delta.get(i, k) - delta.get(j, k);
    let clamped = denominator <= floor;
    let denominator = if clamped { floor } else { denominator };
    Ok(TripletTheta { theta: T::of_usize(d) / denominator, clamped })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaScores<T> {
    pub scores: Vec<T>,
    pub clamped_triplets: usize,
}

/// Averages [`triplet_theta`] over every pair of other generators.
pub fn estimate_theta<T: Scalar>(delta: &DeltaMatrix<T>, spec: &EnsembleSpec) -> Result<ThetaScores<T>> {
    let m = spec.m();
    if delta.m() != m {
        return Err(Error::DimensionMismatch { expected: m, found: delta.m() });
    }
    let d = spec.embedding_dim();
    let mut clamped_triplets = 0;
    let mut scores = Vec::with_capacity(m);
    for i in 0..m {
        let mut sum = T::zero();
        let mut count = 0usize;
        for (j, k) in pairs(m).filter(|&(j, k)| j != i && k != i) {
            let t = triplet_theta(delta, i, j, k, d)?;
            clamped_triplets += usize::from(t.clamped);
            sum += t.theta;
            count += 1;
        }
        scores.push(sum / T::of_usize(count));
    }
    Ok(ThetaScores { scores, clamped_triplets })
}

/// One score vector for the whole dataset, every record included.
pub fn estimate_global<T: Scalar>(records: &[EmbeddingRecord<T>], spec: &EnsembleSpec) -> Result<ThetaEstimate<T>> {
    spec.check_records(records)?;
    let delta = pairwise_deltas(records)?;
    let ThetaScores { scores, clamped_triplets } = estimate_theta(&delta, spec)?;
    Ok(ThetaEstimate {
        sample_id: GLOBAL_SAMPLE_ID.to_owned(),
        scores,
        mode: EstimationMode::Global,
        n0: None,
        clamped_triplets,
    })
}

/// Global estimate recomputed for each sample with that sample's record left out.
pub fn estimate_leave_one_out<T: Scalar>(
    records: &[EmbeddingRecord<T>],
    spec: &EnsembleSpec,
) -> Result<Vec<ThetaEstimate<T>>> {
    spec.check_records(records)?;
    let n = records.len();
    if n < 2 {
        return Err(Error::NeighborhoodTooLarge { n0: n.saturating_sub(1), available: 0 });
    }
    let table = PairDistances::compute(records)?;
    (0..n)
        .into_par_iter()
        .map(|x| {
            let delta = table.mean_over((0..n).filter(|&p| p != x))?;
            let ThetaScores { scores, clamped_triplets } = estimate_theta(&delta, spec)?;
            Ok(ThetaEstimate {
                sample_id: records[x].id().to_owned(),
                scores,
                mode: EstimationMode::Global,
                n0: None,
                clamped_triplets,
            })
        })
        .collect()
}

/// Neighbor-search keys for local estimation: the input keys when every record
/// has one, otherwise the mean of each record's generator vectors.
pub fn neighbor_keys<T: Scalar>(records: &[EmbeddingRecord<T>]) -> Vec<Vec<T>> {
    if records.iter().all(|r| r.input_key().is_some()) {
        records.iter().map(|r| r.input_key().unwrap_or_default().to_vec()).collect()
    } else {
        records.iter().map(EmbeddingRecord::generator_mean).collect()
    }
}

/// Index over [`neighbor_keys`] of `records`, in record order.
pub fn local_index<T: Scalar>(records: &[EmbeddingRecord<T>], metric: Metric) -> Result<NeighborIndex<T>> {
    let ids: Vec<String> = records.iter().map(|r| r.id().to_owned()).collect();
    NeighborIndex::build(&neighbor_keys(records), &ids, metric)
}

/// Per-sample scores from deltas averaged over each sample's `n0` nearest
/// neighbors, the sample itself excluded.
pub fn estimate_local<T: Scalar>(
    records: &[EmbeddingRecord<T>],
    spec: &EnsembleSpec,
    neighbors: &NeighborIndex<T>,
    n0: usize,
) -> Result<Vec<ThetaEstimate<T>>> {
    spec.check_records(records)?;
    if n0 == 0 {
        return Err(Error::EmptyNeighborhood);
    }
    let n = records.len();
    if n0 >= n {
        return Err(Error::NeighborhoodTooLarge { n0, available: n.saturating_sub(1) });
    }
    if neighbors.len() != n {
        return Err(Error::LengthMismatch { left: neighbors.len(), right: n });
    }
    // index position -> record position
    let record_pos: HashMap<&str, usize> = records.iter().enumerate().map(|(p, r)| (r.id(), p)).collect();
    let to_record = neighbors
        .ids()
        .iter()
        .map(|id| record_pos.get(id.as_str()).copied().ok_or_else(|| Error::UnknownId(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let table = PairDistances::compute(records)?;
    records
        .par_iter()
        .map(|record| {
            let hits = neighbors.query_indexed(record.id(), n0)?;
            let mut context: Vec<usize> = hits.iter().map(|h| to_record[h.position]).collect();
            context.sort_unstable();
            let delta = table.mean_over(context)?;
            let ThetaScores { scores, clamped_triplets } = estimate_theta(&delta, spec)?;
            Ok(ThetaEstimate {
                sample_id: record.id().to_owned(),
                scores,
                mode: EstimationMode::Local,
                n0: Some(n0),
                clamped_triplets,
            })
        })
        .collect()
}

/// Per-sample scores for samples whose generations are unavailable: each test
/// sample's input key selects its `n0` nearest records in `train`, whose
/// generations supply the deltas.
pub fn estimate_train<T: Scalar, S: Sample<T> + Sync>(
    test: &[S],
    train: &[EmbeddingRecord<T>],
    spec: &EnsembleSpec,
    n0: usize,
    metric: Metric,
) -> Result<Vec<ThetaEstimate<T>>> {
    if train.is_empty() {
        return Err(Error::EmptyTrainPool);
    }
    if n0 == 0 {
        return Err(Error::EmptyNeighborhood);
    }
    if n0 > train.len() {
        return Err(Error::NeighborhoodTooLarge { n0, available: train.len() });
    }
    spec.check_records(train)?;
    let keys = train
        .iter()
        .map(|r| r.input_key().ok_or_else(|| Error::MissingInputKey(r.id().to_owned())))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = train.iter().map(|r| r.id().to_owned()).collect();
    let index = NeighborIndex::build(&keys, &ids, metric)?;
    let table = PairDistances::compute(train)?;
    test.par_iter()
        .map(|sample| {
            let key = sample.input_key().ok_or_else(|| Error::MissingInputKey(sample.sample_id().to_owned()))?;
            let mut context: Vec<usize> = index.query(key, n0, None)?.iter().map(|h| h.position).collect();
            context.sort_unstable();
            let delta = table.mean_over(context)?;
            let ThetaScores { scores, clamped_triplets } = estimate_theta(&delta, spec)?;
            Ok(ThetaEstimate {
                sample_id: sample.sample_id().to_owned(),
                scores,
                mode: EstimationMode::Train,
                n0: Some(n0),
                clamped_triplets,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, vectors: Vec<Vec<f64>>) -> EmbeddingRecord<f64> {
        EmbeddingRecord::new(id, vectors, None).unwrap()
    }

    /// Exact deltas implied by scores `theta` in dimension `d`.
    fn analytic_deltas(theta: &[f64], d: usize) -> DeltaMatrix<f64> {
        let m = theta.len();
        let upper: Vec<f64> =
            pairs(m).map(|(i, j)| d as f64 / (2.0 * theta[i]) + d as f64 / (2.0 * theta[j])).collect();
        DeltaMatrix::from_upper(m, &upper, 1).unwrap()
    }

    #[test]
    fn identical_vectors_give_zero_deltas() {
        let r = record("a", vec![vec![1.0, -2.0]; 4]);
        let delta = pairwise_deltas(&[r]).unwrap();
        assert!(delta.values().iter().all(|&v| v == 0.0));
        assert_eq!(delta.context_size(), 1);
    }

    #[test]
    fn constant_offset_gives_its_squared_norm() {
        let records: Vec<_> = (0..5)
            .map(|x| {
                let base = vec![x as f64, 2.0 * x as f64, -1.0];
                let shifted = base.iter().zip([3.0, 4.0, 0.0]).map(|(b, c)| b + c).collect();
                record(&x.to_string(), vec![base, shifted])
            })
            .collect();
        assert_eq!(pairwise_deltas(&records).unwrap().get(0, 1), 25.0);
    }

    #[test]
    fn pairwise_delta_errors() {
        assert!(matches!(pairwise_deltas::<f64>(&[]), Err(Error::EmptyContext)));
        let a = record("a", vec![vec![0.0, 1.0]; 3]);
        let b = record("b", vec![vec![0.0]; 3]);
        assert!(matches!(pairwise_deltas(&[a, b]), Err(Error::InconsistentEmbeddings { .. })));
    }

    #[test]
    fn symmetric_triplet() {
        let delta = DeltaMatrix::from_upper(3, &[2.0, 2.0, 2.0], 1).unwrap();
        let t = triplet_theta(&delta, 0, 1, 2, 8).unwrap();
        assert_eq!(t.theta, 4.0);
        assert!(!t.clamped);
    }

    #[test]
    fn analytic_triplets_recover_theta() {
        let delta = analytic_deltas(&[1.0, 2.0, 4.0], 4);
        assert_eq!((delta.get(0, 1), delta.get(0, 2), delta.get(1, 2)), (3.0, 2.5, 1.5));
        assert_eq!(triplet_theta(&delta, 0, 1, 2, 4).unwrap().theta, 1.0);
        assert_eq!(triplet_theta(&delta, 1, 0, 2, 4).unwrap().theta, 2.0);
        assert_eq!(triplet_theta(&delta, 2, 0, 1, 4).unwrap().theta, 4.0);
        let spec = EnsembleSpec::with_default_names(3, 4).unwrap();
        assert_eq!(estimate_theta(&delta, &spec).unwrap().scores, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn averaged_estimate_over_larger_ensembles() {
        let theta = [0.5, 1.0, 2.0, 4.0, 8.0];
        let spec = EnsembleSpec::with_default_names(5, 16).unwrap();
        let scores = estimate_theta(&analytic_deltas(&theta, 16), &spec).unwrap().scores;
        for (s, t) in scores.iter().zip(theta) {
            assert!((s - t).abs() < 1e-12 * t, "{s} vs {t}");
        }
    }

    #[test]
    fn non_positive_denominator_clamps() {
        // delta_01 + delta_02 - delta_12 = 1 + 1 - 5 < 0
        let delta = DeltaMatrix::from_upper(3, &[1.0, 1.0, 5.0], 1).unwrap();
        let t = triplet_theta(&delta, 0, 1, 2, 4).unwrap();
        assert!(t.clamped);
        assert_eq!(t.theta, 4.0 / denominator_floor::<f64>(4));
    }

    #[test]
    fn degenerate_triplets() {
        let delta = DeltaMatrix::from_upper(3, &[1.0, 1.0, 1.0], 1).unwrap();
        for (i, j, k) in [(0, 0, 1), (0, 1, 1), (2, 1, 2), (0, 1, 3)] {
            assert!(matches!(triplet_theta(&delta, i, j, k, 4), Err(Error::DegenerateTriplet { .. })));
        }
    }

    #[test]
    fn identical_generators_clamp_everywhere() {
        let records = vec![record("a", vec![vec![1.0, 2.0, 3.0]; 4])];
        let spec = EnsembleSpec::with_default_names(4, 3).unwrap();
        let est = estimate_global(&records, &spec).unwrap();
        let expected = 3.0 / denominator_floor::<f64>(3);
        assert!(est.scores.iter().all(|&s| s == expected));
        assert_eq!(est.clamped_triplets, 4 * 3);
    }

    #[test]
    fn single_record_global_equals_its_own_deltas() {
        let r = record("a", vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![3.0, -1.0]]);
        let spec = EnsembleSpec::with_default_names(3, 2).unwrap();
        let global = estimate_global(std::slice::from_ref(&r), &spec).unwrap();
        let direct = estimate_theta(&pairwise_deltas(&[r]).unwrap(), &spec).unwrap();
        assert_eq!(global.scores, direct.scores);
        assert_eq!(global.mode, EstimationMode::Global);
        assert_eq!(global.n0, None);
    }

    #[test]
    fn local_rejects_large_neighborhoods() {
        let r = record("a", vec![vec![0.0], vec![1.0], vec![3.0]]);
        let spec = EnsembleSpec::with_default_names(3, 1).unwrap();
        let index = local_index(std::slice::from_ref(&r), Metric::Euclidean).unwrap();
        assert!(matches!(
            estimate_local(&[r], &spec, &index, 1),
            Err(Error::NeighborhoodTooLarge { n0: 1, available: 0 })
        ));
    }

    #[test]
    fn twin_records_share_estimates() {
        let v = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![3.0, -1.0]];
        let records = vec![record("a", v.clone()), record("b", v)];
        let spec = EnsembleSpec::with_default_names(3, 2).unwrap();
        let index = local_index(&records, Metric::Euclidean).unwrap();
        let out = estimate_local(&records, &spec, &index, 1).unwrap();
        assert_eq!(out[0].scores, out[1].scores);
        assert_eq!(out[0].n0, Some(1));
        assert_eq!(out[1].mode, EstimationMode::Local);
    }

    #[test]
    fn train_mode_errors() {
        let spec = EnsembleSpec::with_default_names(3, 1).unwrap();
        let pool = vec![EmbeddingRecord::new("p", vec![vec![0.0], vec![1.0], vec![2.0]], Some(vec![0.0])).unwrap()];
        let test = pool.clone();
        assert!(matches!(estimate_train(&test, &[], &spec, 1, Metric::Euclidean), Err(Error::EmptyTrainPool)));
        assert!(matches!(
            estimate_train(&test, &pool, &spec, 2, Metric::Euclidean),
            Err(Error::NeighborhoodTooLarge { .. })
        ));
        let keyless = vec![record("q", vec![vec![0.0], vec![1.0], vec![2.0]])];
        assert!(matches!(estimate_train(&keyless, &pool, &spec, 1, Metric::Euclidean), Err(Error::MissingInputKey(_))));
    }

    #[test]
    fn neighbor_keys_fall_back_to_generator_mean() {
        let with_key = EmbeddingRecord::new("a", vec![vec![2.0], vec![4.0], vec![6.0]], Some(vec![9.0])).unwrap();
        let without = record("b", vec![vec![1.0], vec![1.0], vec![4.0]]);
        assert_eq!(neighbor_keys(std::slice::from_ref(&with_key)), vec![vec![9.0]]);
        assert_eq!(neighbor_keys(&[with_key, without]), vec![vec![4.0], vec![2.0]]);
    }
}
