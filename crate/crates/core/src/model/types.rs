use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Read access to one sample's embeddings.
///
/// Estimators that must not look at a sample's generator outputs (train mode)
/// only ever call [`Sample::input_key`] on it.
pub trait Sample<T> {
    fn sample_id(&self) -> &str;
    fn generator_vectors(&self) -> &[Vec<T>];
    fn input_key(&self) -> Option<&[T]>;
}

/// One sample's per-generator embedding vectors, plus an optional embedding of
/// the input alone used as a neighbor-search key.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord<T> {
    id: String,
    vectors: Vec<Vec<T>>,
    input_key: Option<Vec<T>>,
}

impl<T: Scalar> EmbeddingRecord<T> {
    /// Validates that every vector has the same nonzero dimension and that
    /// every coordinate is finite.
    pub fn new(id: impl Into<String>, vectors: Vec<Vec<T>>, input_key: Option<Vec<T>>) -> Result<Self> {
        let id = id.into();
        let Some(first) = vectors.first() else {
            return Err(Error::inconsistent(&id, "no generator vectors"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::inconsistent(&id, "embedding dimension must be at least 1"));
        }
        for (g, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::inconsistent(
                    &id,
                    format!("generator {g} has dimension {}, expected {dim}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::inconsistent(&id, format!("generator {g} has a non-finite coordinate")));
            }
        }
        if let Some(key) = &input_key {
            if key.is_empty() {
                return Err(Error::inconsistent(&id, "input key is empty"));
            }
            if key.iter().any(|x| !x.is_finite()) {
                return Err(Error::inconsistent(&id, "input key has a non-finite coordinate"));
            }
        }
        Ok(Self { id, vectors, input_key })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    pub fn vector(&self, generator: usize) -> &[T] {
        &self.vectors[generator]
    }

    pub fn input_key(&self) -> Option<&[T]> {
        self.input_key.as_deref()
    }

    /// Number of generators.
    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    /// Embedding dimension.
    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// Coordinate-wise mean of the generator vectors.
    pub fn generator_mean(&self) -> Vec<T> {
        let scale = T::one() / T::of_usize(self.m());
        let mut mean = vec![T::zero(); self.dim()];
        for v in &self.vectors {
            for (acc, &x) in mean.iter_mut().zip(v) {
                *acc += x;
            }
        }
        mean.iter_mut().for_each(|x| *x *= scale);
        mean
    }

    /// Applies `f` to every generator coordinate, keeping the input key.
    pub fn map_vectors(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Result<Self> {
        let vectors = self
            .vectors
            .iter()
            .enumerate()
            .map(|(g, v)| v.iter().enumerate().map(|(c, &x)| f(g, c, x)).collect())
            .collect();
        Self::new(self.id.clone(), vectors, self.input_key.clone())
    }

    /// Reorders generators so that new generator `i` is old generator `order[i]`.
    pub fn permute_generators(&self, order: &[usize]) -> Result<Self> {
        let vectors = order.iter().map(|&g| self.vectors[g].clone()).collect();
        Self::new(self.id.clone(), vectors, self.input_key.clone())
    }

    pub fn into_parts(self) -> (String, Vec<Vec<T>>, Option<Vec<T>>) {
        (self.id, self.vectors, self.input_key)
    }
}

impl<T: Scalar> Sample<T> for EmbeddingRecord<T> {
    fn sample_id(&self) -> &str {
        &self.id
    }

    fn generator_vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    fn input_key(&self) -> Option<&[T]> {
        self.input_key.as_deref()
    }
}

/// The candidate generator pool.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    generator_names: Vec<String>,
    embedding_dim: usize,
}

impl EnsembleSpec {
    pub fn new(generator_names: Vec<String>, embedding_dim: usize) -> Result<Self> {
        if generator_names.len() < 3 {
            return Err(Error::EnsembleTooSmall { m: generator_names.len() });
        }
        if embedding_dim == 0 {
            return Err(Error::InvalidEnsemble("embedding dimension must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for name in &generator_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidEnsemble(format!("duplicate generator name `{name}`")));
            }
        }
        Ok(Self { generator_names, embedding_dim })
    }

    /// Ensemble with generators named `g0`, `g1`, ...
    pub fn with_default_names(m: usize, embedding_dim: usize) -> Result<Self> {
        Self::new((0..m).map(|i| format!("g{i}")).collect(), embedding_dim)
    }

    pub fn generator_names(&self) -> &[String] {
        &self.generator_names
    }

    pub fn m(&self) -> usize {
        self.generator_names.len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.generator_names.iter().position(|n| n == name)
    }

    pub fn check_record<T: Scalar>(&self, record: &EmbeddingRecord<T>) -> Result<()> {
        if record.m() != self.m() {
            return Err(Error::inconsistent(
                record.id(),
                format!("{} generators, ensemble has {}", record.m(), self.m()),
            ));
        }
        if record.dim() != self.embedding_dim {
            return Err(Error::inconsistent(
                record.id(),
                format!("dimension {}, ensemble has {}", record.dim(), self.embedding_dim),
            ));
        }
        Ok(())
    }

    pub fn check_records<T: Scalar>(&self, records: &[EmbeddingRecord<T>]) -> Result<()> {
        records.iter().try_for_each(|r| self.check_record(r))
    }
}

/// Symmetric matrix of averaged squared distances between generator embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaMatrix<T> {
    m: usize,
    values: Vec<T>,
    context_size: usize,
}

impl<T: Scalar> DeltaMatrix<T> {
    /// Builds a matrix from row-major `m * m` values.
    pub fn from_values(m: usize, values: Vec<T>, context_size: usize) -> Result<Self> {
        if values.len() != m * m {
            return Err(Error::LengthMismatch { left: values.len(), right: m * m });
        }
        if context_size == 0 {
            return Err(Error::EmptyContext);
        }
        for i in 0..m {
            if values[i * m + i] != T::zero() {
                return Err(Error::InvalidConfig(format!("delta diagonal entry {i} is nonzero")));
            }
            for j in 0..m {
                let v = values[i * m + j];
                if !v.is_finite() || v < T::zero() {
                    return Err(Error::InvalidConfig(format!("delta ({i}, {j}) is negative or non-finite")));
                }
                if v != values[j * m + i] {
                    return Err(Error::InvalidConfig(format!("delta ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(Self { m, values, context_size })
    }

    /// Builds a matrix from the strict upper triangle, listed row by row.
    pub fn from_upper(m: usize, upper: &[T], context_size: usize) -> Result<Self> {
        if upper.len() != pair_count(m) {
            return Err(Error::LengthMismatch { left: upper.len(), right: pair_count(m) });
        }
        let mut values = vec![T::zero(); m * m];
        for (p, (i, j)) in pairs(m).enumerate() {
            values[i * m + j] = upper[p];
            values[j * m + i] = upper[p];
        }
        Self::from_values(m, values, context_size)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.m + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn context_size(&self) -> usize {
        self.context_size
    }
}

/// Number of unordered generator pairs.
pub(crate) fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Unordered pairs `(i, j)` with `i < j`, row by row.
pub(crate) fn pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationMode {
    Global,
    Local,
    Train,
}

impl std::fmt::Display for EstimationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimationMode::Global => "global",
            EstimationMode::Local => "local",
            EstimationMode::Train => "train",
        })
    }
}

impl std::str::FromStr for EstimationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(EstimationMode::Global),
            "local" => Ok(EstimationMode::Local),
            "train" => Ok(EstimationMode::Train),
            other => Err(Error::InvalidConfig(format!("unknown estimation mode `{other}`"))),
        }
    }
}

/// Sample id carried by the single estimate shared by a whole dataset.
pub const GLOBAL_SAMPLE_ID: &str = "*";

/// Per-generator quality scores for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaEstimate<T> {
    pub sample_id: String,
    pub scores: Vec<T>,
    pub mode: EstimationMode,
    pub n0: Option<usize>,
    /// Triplets whose denominator hit the floor.
    pub clamped_triplets: usize,
}

impl<T: Scalar> ThetaEstimate<T> {
    /// Copies of this estimate relabeled with each of `ids`.
    pub fn broadcast<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<ThetaEstimate<T>> {
        ids.into_iter().map(|id| ThetaEstimate { sample_id: id.to_owned(), ..self.clone() }).collect()
    }
}
