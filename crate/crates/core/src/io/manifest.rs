use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::jsonl::{read_generations, read_input_keys, read_labels, GenerationSet, LabelRow};
use super::output::read_json;
use crate::error::{Error, Result};
use crate::knn::Metric;
use crate::model::{EmbeddingRecord, EnsembleSpec, EstimationMode};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMetric {
    #[default]
    Contains,
    Rouge2,
}

impl std::fmt::Display for TaskMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskMetric::Contains => "contains",
            TaskMetric::Rouge2 => "rouge2",
        })
    }
}

/// Describes one dataset on disk. Relative paths resolve against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub ensemble: EnsembleSpec,
    pub embeddings_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_keys_path: Option<PathBuf>,
    #[serde(default)]
    pub task_metric: TaskMetric,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let mut manifest: DatasetManifest = read_json(path)?;
        // re-validate: deserialization bypasses EnsembleSpec::new
        manifest.ensemble =
            EnsembleSpec::new(manifest.ensemble.generator_names().to_vec(), manifest.ensemble.embedding_dim())?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut manifest.embeddings_path);
        manifest.generations_path.as_mut().map(resolve);
        manifest.labels_path.as_mut().map(resolve);
        manifest.input_keys_path.as_mut().map(resolve);
        for p in [
            Some(&manifest.embeddings_path),
            manifest.generations_path.as_ref(),
            manifest.labels_path.as_ref(),
            manifest.input_keys_path.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(Error::Format {
                    path: path.to_owned(),
                    reason: format!("referenced file {} does not exist", p.display()),
                });
            }
        }
        Ok(manifest)
    }
}

/// Everything needed to reproduce one command's output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<EstimationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_manifest: Option<PathBuf>,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub seed: u64,
    pub output_path: PathBuf,
    /// Input files and command-specific settings.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Some(EstimationMode::Local | EstimationMode::Train) if self.n0.unwrap_or(0) == 0 => {
                Err(Error::InvalidConfig("local and train modes need a positive n0".into()))
            }
            Some(EstimationMode::Train) if self.train_manifest.is_none() => {
                Err(Error::InvalidConfig("train mode needs a train manifest".into()))
            }
            _ => Ok(()),
        }
    }
}

/// For each id in `reference`, its position in `other`. Fails unless both hold the same ids.
pub fn align_to(reference: &[String], other: &[String], what: &str) -> Result<Vec<usize>> {
    if reference.len() != other.len() {
        return Err(Error::InvalidConfig(format!(
            "{what} has {} samples, embeddings have {}",
            other.len(),
            reference.len()
        )));
    }
    let positions: HashMap<&str, usize> = other.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    reference
        .iter()
        .map(|id| {
            positions
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidConfig(format!("{what} has no sample `{id}`")))
        })
        .collect()
}

/// A manifest's files, validated against each other and aligned to embedding order.
#[derive(Clone, Debug)]
pub struct LoadedDataset<T> {
    pub manifest: DatasetManifest,
    pub spec: EnsembleSpec,
    pub records: Vec<EmbeddingRecord<T>>,
    pub generations: Option<GenerationSet>,
    pub labels: Option<Vec<LabelRow>>,
}

impl<T: Scalar> LoadedDataset<T> {
    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id().to_owned()).collect()
    }
}

pub fn load_dataset<T: Scalar>(manifest_path: &Path) -> Result<LoadedDataset<T>> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let spec = manifest.ensemble.clone();
    let set = super::read_embeddings_any::<T>(&manifest.embeddings_path, Some(&spec))?;
    spec.check_records(&set.records)?;
    let mut records = set.records;
    let ids: Vec<String> = records.iter().map(|r| r.id().to_owned()).collect();

    if let Some(path) = &manifest.input_keys_path {
        let keys = read_input_keys(path)?;
        let key_ids: Vec<String> = keys.iter().map(|(id, _)| id.clone()).collect();
        let order = align_to(&ids, &key_ids, "input key file")?;
        records = records
            .into_iter()
            .zip(order)
            .map(|(r, pos)| {
                let (id, vectors, _) = r.into_parts();
                EmbeddingRecord::new(id, vectors, Some(keys[pos].1.iter().copied().map(T::of).collect()))
            })
            .collect::<Result<_>>()?;
    }

    let generations = match &manifest.generations_path {
        Some(path) => {
            let mut set = read_generations(path, Some(spec.generator_names()))?;
            let gen_ids: Vec<String> = set.rows.iter().map(|r| r.id.clone()).collect();
            let order = align_to(&ids, &gen_ids, "generations file")?;
            set.rows = order.into_iter().map(|p| set.rows[p].clone()).collect();
            Some(set)
        }
        None => None,
    };

    let labels = match &manifest.labels_path {
        Some(path) => {
            let rows = read_labels(path)?;
            let label_ids: Vec<String> = rows.iter().map(|r| r.id.clone()).collect();
            let order = align_to(&ids, &label_ids, "labels file")?;
            Some(order.into_iter().map(|p| rows[p].clone()).collect())
        }
        None => None,
    };

    Ok(LoadedDataset { manifest, spec, records, generations, labels })
}
