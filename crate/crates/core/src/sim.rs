//! Synthetic datasets drawn from the Gaussian embedding model with known
//! ground-truth scores.
//!
//! Each sample draws a latent true-output embedding `z`, then every generator
//! embedding is `z + noise` with independent per-coordinate variance
//! `1 / (2 * theta_i)`. Piecewise datasets place samples in spatial clusters,
//! each cluster belonging to one region with its own score vector.
//!
//! All draws come from one ChaCha8 stream per seed, so datasets are
//! reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::{Metric, NeighborIndex};
use crate::model::{EmbeddingRecord, EnsembleSpec};
use crate::router::argmax;
use crate::scalar::Scalar;

/// Pairwise distance between cluster centroids.
pub const CENTROID_SEPARATION: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaLayout {
    /// One score vector for every sample.
    Shared(Vec<f64>),
    /// Samples are dealt round-robin into `clusters` spatial clusters; cluster
    /// `c` belongs to region `c % region_thetas.len()`.
    Piecewise { region_thetas: Vec<Vec<f64>>, clusters: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub theta: ThetaLayout,
    pub seed: u64,
    /// Per-coordinate standard deviation of latent points around their cluster centroid.
    #[serde(default = "default_spread")]
    pub cluster_spread: f64,
}

fn default_spread() -> f64 {
    0.1
}

impl SyntheticConfig {
    pub fn shared(n: usize, d: usize, theta: Vec<f64>, seed: u64) -> Self {
        Self { n, d, theta: ThetaLayout::Shared(theta), seed, cluster_spread: default_spread() }
    }

    pub fn piecewise(n: usize, d: usize, region_thetas: Vec<Vec<f64>>, clusters: usize, seed: u64) -> Self {
        Self { n, d, theta: ThetaLayout::Piecewise { region_thetas, clusters }, seed, cluster_spread: default_spread() }
    }

    pub fn m(&self) -> usize {
        match &self.theta {
            ThetaLayout::Shared(t) => t.len(),
            ThetaLayout::Piecewise { region_thetas, .. } => region_thetas.first().map_or(0, Vec::len),
        }
    }

    pub fn regions(&self) -> usize {
        match &self.theta {
            ThetaLayout::Shared(_) => 1,
            ThetaLayout::Piecewise { region_thetas, .. } => region_thetas.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidConfig("n and d must be at least 1".into()));
        }
        let check = |theta: &[f64]| -> Result<()> {
            if theta.len() < 2 {
                return Err(Error::InvalidTheta(format!("{} generators, at least 2 required", theta.len())));
            }
            match theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
                Some(t) => Err(Error::InvalidTheta(format!("{t} is not a positive finite score"))),
                None => Ok(()),
            }
        };
        match &self.theta {
            ThetaLayout::Shared(theta) => check(theta),
            ThetaLayout::Piecewise { region_thetas, clusters } => {
                if region_thetas.is_empty() {
                    return Err(Error::InvalidConfig("at least one region is required".into()));
                }
                let m = region_thetas[0].len();
                for theta in region_thetas {
                    check(theta)?;
                    if theta.len() != m {
                        return Err(Error::InvalidTheta("regions disagree on the number of generators".into()));
                    }
                }
                if *clusters < region_thetas.len() {
                    return Err(Error::InvalidConfig(format!(
                        "{clusters} clusters cannot cover {} regions",
                        region_thetas.len()
                    )));
                }
                if !(self.cluster_spread.is_finite() && self.cluster_spread > 0.0) {
                    return Err(Error::InvalidConfig("cluster spread must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// `m` scores geometrically spaced from `lo` to `hi` inclusive.
pub fn log_spaced(m: usize, lo: f64, hi: f64) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (m - 1) as f64;
    (0..m).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Two regions over `m` generators: generator 0 is best (score `high`) in the
/// first region, generator 1 in the second, and every other score is `low`.
pub fn swapped_regions(m: usize, high: f64, low: f64) -> Vec<Vec<f64>> {
    (0..2).map(|best| (0..m).map(|g| if g == best { high } else { low }).collect()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset<T> {
    pub config: SyntheticConfig,
    pub records: Vec<EmbeddingRecord<T>>,
    /// Latent true-output embedding of each sample. Estimators never see it.
    pub latent: Vec<Vec<T>>,
    pub theta_truth: Vec<Vec<f64>>,
    pub region_labels: Option<Vec<usize>>,
}

/// Ground truth written next to a simulated embedding file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub seed: u64,
    pub config: SyntheticConfig,
    pub generator_names: Vec<String>,
    pub sample_ids: Vec<String>,
    pub theta_truth: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_labels: Option<Vec<usize>>,
}

fn sample_id(x: usize, n: usize) -> String {
    let width = (n.max(2) - 1).to_string().len();
    format!("s{x:0width$}")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn centroids(count: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let scale = CENTROID_SEPARATION / 2f64.sqrt();
    if count <= d {
        // scaled basis vectors are exactly CENTROID_SEPARATION apart
        return (0..count)
            .map(|c| {
                let mut v = vec![0.0; d];
                v[c] = scale;
                v
            })
            .collect();
    }
    // too many clusters for orthogonal placement: random directions whose
    // pairwise distance concentrates at CENTROID_SEPARATION
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let sd = scale / (d as f64).sqrt();
    (0..count).map(|_| (0..d).map(|_| sd * normal(&mut rng)).collect()).collect()
}

/// Draws a dataset. Piecewise layouts with a single region are accepted here;
/// [`sample_piecewise`] insists on at least two.
pub fn sample_dataset<T: Scalar>(config: &SyntheticConfig) -> Result<SyntheticDataset<T>> {
    config.validate()?;
    let (n, d, m) = (config.n, config.d, config.m());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (placement, region_labels) = match &config.theta {
        ThetaLayout::Shared(_) => (None, None),
        ThetaLayout::Piecewise { region_thetas, clusters } => {
            let labels = (0..n).map(|x| (x % clusters) % region_thetas.len()).collect();
            (Some((centroids(*clusters, d, config.seed), *clusters)), Some(labels))
        }
    };
    let mut records = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    let mut theta_truth = Vec::with_capacity(n);
    for x in 0..n {
        let theta = match &config.theta {
            ThetaLayout::Shared(t) => t.clone(),
            ThetaLayout::Piecewise { region_thetas, clusters } => {
                region_thetas[(x % clusters) % region_thetas.len()].clone()
            }
        };
        let z: Vec<f64> = match &placement {
            None => (0..d).map(|_| normal(&mut rng)).collect(),
            Some((centers, clusters)) => {
                centers[x % clusters].iter().map(|c| c + config.cluster_spread * normal(&mut rng)).collect()
            }
        };
        let vectors = theta
            .iter()
            .map(|t| {
                let sd = (0.5 / t).sqrt();
                z.iter().map(|zc| T::of(zc + sd * normal(&mut rng))).collect()
            })
            .collect();
        let z: Vec<T> = z.into_iter().map(T::of).collect();
        records.push(EmbeddingRecord::new(sample_id(x, n), vectors, Some(z.clone()))?);
        latent.push(z);
        theta_truth.push(theta);
    }
    debug_assert!(theta_truth.iter().all(|t| t.len() == m));
    Ok(SyntheticDataset { config: config.clone(), records, latent, theta_truth, region_labels })
}

/// Draws a region-dependent dataset; at least two regions are required.
pub fn sample_piecewise<T: Scalar>(config: &SyntheticConfig) -> Result<SyntheticDataset<T>> {
    match &config.theta {
        ThetaLayout::Piecewise { region_thetas, .. } if region_thetas.len() >= 2 => sample_dataset(config),
        _ => Err(Error::InvalidConfig("piecewise sampling needs at least 2 regions".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMomentCheck {
    pub i: usize,
    pub j: usize,
    pub empirical: f64,
    pub analytic: f64,
    pub relative_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossTermCheck {
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub standard_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub generator: usize,
    pub empirical: f64,
    pub analytic: f64,
    pub relative_error: f64,
    pub draws: usize,
}

impl<T: Scalar> SyntheticDataset<T> {
    pub fn m(&self) -> usize {
        self.config.m()
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        EnsembleSpec::with_default_names(self.m(), self.config.d)
    }

    pub fn sample_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id().to_owned()).collect()
    }

    pub fn truth_sidecar(&self, generator_names: Vec<String>) -> TruthSidecar {
        TruthSidecar {
            seed: self.config.seed,
            config: self.config.clone(),
            generator_names,
            sample_ids: self.sample_ids(),
            theta_truth: self.theta_truth.clone(),
            region_labels: self.region_labels.clone(),
        }
    }

    /// The generator with the largest true score, per sample.
    pub fn optimal_generators(&self) -> Vec<usize> {
        self.theta_truth.iter().map(|t| argmax(t).unwrap_or(0)).collect()
    }

    /// Fraction of samples whose optimal generator is `choices[x]`.
    pub fn routing_accuracy(&self, choices: &[usize]) -> f64 {
        let optimal = self.optimal_generators();
        let hits = optimal.iter().zip(choices).filter(|(o, c)| o == c).count();
        hits as f64 / optimal.len() as f64
    }

    /// Best accuracy achievable by sending every sample to one generator.
    pub fn best_single_accuracy(&self) -> f64 {
        let n = self.records.len();
        (0..self.m()).map(|g| self.routing_accuracy(&vec![g; n])).fold(0.0, f64::max)
    }

    /// Empirical mean squared distance between generator pairs against the
    /// sum of the two generators' expected squared errors.
    pub fn pair_moments(&self) -> Vec<PairMomentCheck> {
        let m = self.m();
        let d = self.config.d as f64;
        let n = self.records.len() as f64;
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let empirical = self
                    .records
                    .iter()
                    .map(|r| crate::scalar::squared_distance(r.vector(i), r.vector(j)).as_f64())
                    .sum::<f64>()
                    / n;
                let analytic = self.theta_truth.iter().map(|t| d / (2.0 * t[i]) + d / (2.0 * t[j])).sum::<f64>() / n;
                out.push(PairMomentCheck {
                    i,
                    j,
                    empirical,
                    analytic,
                    relative_error: (empirical - analytic).abs() / analytic,
                });
            }
        }
        out
    }

    /// Mean and standard error of the inner product of two generators' errors.
    pub fn cross_terms(&self) -> Vec<CrossTermCheck> {
        let m = self.m();
        let n = self.records.len() as f64;
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let values: Vec<f64> = self
                    .records
                    .iter()
                    .zip(&self.latent)
                    .map(|(r, z)| {
                        r.vector(i)
                            .iter()
                            .zip(r.vector(j))
                            .zip(z)
                            .map(|((&a, &b), &zc)| ((a - zc) * (b - zc)).as_f64())
                            .sum::<f64>()
                    })
                    .collect();
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                out.push(CrossTermCheck { i, j, mean, standard_error: (var / n).sqrt() });
            }
        }
        out
    }

    /// Per-generator empirical variance of the coordinates of `embedding - latent`.
    pub fn noise_variance(&self) -> Vec<VarianceCheck> {
        let draws = self.records.len() * self.config.d;
        (0..self.m())
            .map(|g| {
                let residuals: Vec<f64> = self
                    .records
                    .iter()
                    .zip(&self.latent)
                    .flat_map(|(r, z)| r.vector(g).iter().zip(z).map(|(&a, &zc)| (a - zc).as_f64()))
                    .collect();
                let mean = residuals.iter().sum::<f64>() / draws as f64;
                let empirical =
                    residuals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0).max(1.0);
                let analytic = self.theta_truth.iter().map(|t| 0.5 / t[g]).sum::<f64>() / self.theta_truth.len() as f64;
                VarianceCheck {
                    generator: g,
                    empirical,
                    analytic,
                    relative_error: (empirical - analytic).abs() / analytic,
                    draws,
                }
            })
            .collect()
    }

    /// Fraction of samples whose nearest other sample (by input key) shares its region.
    pub fn region_recovery(&self, metric: Metric) -> Result<f64> {
        let labels =
            self.region_labels.as_ref().ok_or_else(|| Error::InvalidConfig("dataset has no regions".into()))?;
        let index = crate::model::local_index(&self.records, metric)?;
        let mut hits = 0usize;
        for (x, r) in self.records.iter().enumerate() {
            let nearest = index.query_indexed(r.id(), 1)?;
            hits += usize::from(labels[nearest[0].position] == labels[x]);
        }
        Ok(hits as f64 / self.records.len() as f64)
    }
}

/// Index over the latent points, for tests that need the true geometry.
pub fn latent_index<T: Scalar>(dataset: &SyntheticDataset<T>, metric: Metric) -> Result<NeighborIndex<T>> {
    NeighborIndex::build(&dataset.latent, &dataset.sample_ids(), metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swapped_regions_layout() {
        assert_eq!(swapped_regions(3, 8.0, 1.0), vec![vec![8.0, 1.0, 1.0], vec![1.0, 8.0, 1.0]]);
    }

    #[test]
    fn log_spacing() {
        let t = log_spaced(5, 0.5, 8.0);
        for (a, b) in t.iter().zip([0.5, 1.0, 2.0, 4.0, 8.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let config = SyntheticConfig::shared(50, 8, vec![1.0, 2.0, 3.0], 9);
        let a = sample_dataset::<f64>(&config).unwrap();
        let b = sample_dataset::<f64>(&config).unwrap();
        assert_eq!(a, b);
        let c = sample_dataset::<f64>(&SyntheticConfig { seed: 10, ..config }).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn huge_theta_tracks_latent() {
        let config = SyntheticConfig::shared(200, 16, vec![1e6, 1.0, 1.0], 1);
        let data = sample_dataset::<f64>(&config).unwrap();
        let worst = data
            .records
            .iter()
            .zip(&data.latent)
            .flat_map(|(r, z)| r.vector(0).iter().zip(z).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        // sd is 1/sqrt(2e6) ~ 7e-4; 3200 draws stay well inside 10 sd
        assert!(worst < 7.1e-3, "{worst}");
    }

    #[test]
    fn invalid_theta() {
        for theta in [vec![1.0, 0.0, 2.0], vec![1.0, -1.0, 2.0], vec![1.0, f64::NAN, 1.0], vec![1.0]] {
            assert!(sample_dataset::<f64>(&SyntheticConfig::shared(5, 2, theta, 0)).is_err());
        }
    }

    #[test]
    fn piecewise_needs_two_regions() {
        let one = SyntheticConfig::piecewise(10, 4, vec![vec![1.0, 2.0, 3.0]], 2, 0);
        assert!(sample_piecewise::<f64>(&one).is_err());
        assert!(sample_dataset::<f64>(&one).is_ok());
        let few_clusters =
            SyntheticConfig::piecewise(10, 4, vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![1.0, 1.0]], 2, 0);
        assert!(sample_piecewise::<f64>(&few_clusters).is_err());
    }

    #[test]
    fn equal_thetas_give_symmetric_analytic() {
        let data = sample_dataset::<f64>(&SyntheticConfig::shared(10, 6, vec![3.0, 3.0, 1.0], 2)).unwrap();
        let check = data.pair_moments()[0];
        assert_eq!((check.i, check.j), (0, 1));
        assert!((check.analytic - 6.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_centroids_are_separated() {
        let c = centroids(3, 5, 0);
        let dist = crate::scalar::squared_distance(&c[0], &c[2]).sqrt();
        assert!((dist - CENTROID_SEPARATION).abs() < 1e-12);
    }
}
