//! Exact nearest-neighbor search over sample keys.
//!
//! Every query is a full scan. Results are ordered by distance and then by
//! sample id, so output is reproducible regardless of insertion order.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, squared_distance, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Squared Euclidean distance.
    #[default]
    Euclidean,
    /// One minus cosine similarity. Zero vectors have similarity 0 with everything.
    Cosine,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor<'a, T> {
    pub id: &'a str,
    /// Position of the key in the index, i.e. in the order given to [`NeighborIndex::build`].
    pub position: usize,
    pub distance: T,
}

#[derive(Clone, Debug)]
pub struct NeighborIndex<T> {
    dim: usize,
    keys: Vec<T>,
    norms: Vec<T>,
    ids: Vec<String>,
    positions: HashMap<String, usize>,
    metric: Metric,
}

impl<T: Scalar> NeighborIndex<T> {
    pub fn build<K: AsRef<[T]>>(keys: &[K], ids: &[String], metric: Metric) -> Result<Self> {
        if keys.len() != ids.len() {
            return Err(Error::LengthMismatch { left: keys.len(), right: ids.len() });
        }
        let Some(first) = keys.first() else {
            return Err(Error::EmptyContext);
        };
        let dim = first.as_ref().len();
        if dim == 0 {
            return Err(Error::InvalidConfig("neighbor keys must have dimension at least 1".into()));
        }
        let mut flat = Vec::with_capacity(dim * keys.len());
        let mut positions = HashMap::with_capacity(ids.len());
        for (pos, (key, id)) in keys.iter().zip(ids).enumerate() {
            let key = key.as_ref();
            if key.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: key.len() });
            }
            if key.iter().any(|x| !x.is_finite()) {
                return Err(Error::inconsistent(id, "neighbor key has a non-finite coordinate"));
            }
            if positions.insert(id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
            flat.extend_from_slice(key);
        }
        let norms = match metric {
            Metric::Euclidean => Vec::new(),
            Metric::Cosine => flat.chunks_exact(dim).map(|k| dot(k, k).sqrt()).collect(),
        };
        Ok(Self { dim, keys: flat, norms, ids: ids.to_vec(), positions, metric })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, position: usize) -> &str {
        &self.ids[position]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn key(&self, position: usize) -> &[T] {
        &self.keys[position * self.dim..(position + 1) * self.dim]
    }

    /// Distance from `query` to the key at `position` under the index metric.
    pub fn distance(&self, query: &[T], position: usize) -> T {
        let key = self.key(position);
        match self.metric {
            Metric::Euclidean => squared_distance(query, key),
            Metric::Cosine => {
                let denom = dot(query, query).sqrt() * self.norms[position];
                if denom > T::zero() {
                    T::one() - dot(query, key) / denom
                } else {
                    T::one()
                }
            }
        }
    }

    /// The `k` nearest keys to `query`, nearest first, never including `exclude_id`.
    pub fn query(&self, query: &[T], k: usize, exclude_id: Option<&str>) -> Result<Vec<Neighbor<'_, T>>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: query.len() });
        }
        let excluded = exclude_id.and_then(|id| self.position(id));
        let available = self.len() - usize::from(excluded.is_some());
        if k > available {
            return Err(Error::KTooLarge { k, available });
        }
        let mut candidates: Vec<(T, usize)> =
            (0..self.len()).filter(|&p| Some(p) != excluded).map(|p| (self.distance(query, p), p)).collect();
        let cmp = |a: &(T, usize), b: &(T, usize)| {
            a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then_with(|| self.ids[a.1].cmp(&self.ids[b.1]))
        };
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k - 1, cmp);
            candidates.truncate(k);
        }
        candidates.sort_unstable_by(cmp);
        Ok(candidates
            .into_iter()
            .map(|(distance, position)| Neighbor { id: &self.ids[position], position, distance })
            .collect())
    }

    /// Neighbors of an indexed key, excluding that key itself.
    pub fn query_indexed(&self, id: &str, k: usize) -> Result<Vec<Neighbor<'_, T>>> {
        let position = self.position(id).ok_or_else(|| Error::UnknownId(id.to_owned()))?;
        self.query(self.key(position), k, Some(id))
    }

    pub fn query_ids(&self, query: &[T], k: usize, exclude_id: Option<&str>) -> Result<Vec<String>> {
        Ok(self.query(query, k, exclude_id)?.into_iter().map(|n| n.id.to_owned()).collect())
    }
}
