use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::manifest::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::EvalReport;

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json_atomic<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format { path: path.to_owned(), reason: e.to_string() })
}

/// Header stamped into every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub run: RunConfig,
}

impl Provenance {
    pub fn new(command: &str, run: RunConfig) -> Self {
        Self { tool: "ensroute".into(), version: env!("CARGO_PKG_VERSION").into(), command: command.into(), run }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub id: String,
    pub scores: Vec<f64>,
    pub mode: crate::model::EstimationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    pub clamped_triplets: usize,
}

impl<T: crate::Scalar> From<&crate::model::ThetaEstimate<T>> for EstimateRow {
    fn from(e: &crate::model::ThetaEstimate<T>) -> Self {
        Self {
            id: e.sample_id.clone(),
            scores: e.scores.iter().map(|s| s.as_f64()).collect(),
            mode: e.mode,
            n0: e.n0,
            clamped_triplets: e.clamped_triplets,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatesFile {
    pub provenance: Provenance,
    pub generator_names: Vec<String>,
    pub estimates: Vec<EstimateRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub id: String,
    pub chosen: usize,
    pub generator: String,
    pub scores: Vec<f64>,
    pub method: String,
    /// The routed generation, when generations were supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionsFile {
    pub provenance: Provenance,
    pub generator_names: Vec<String>,
    pub decisions: Vec<DecisionRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub provenance: Provenance,
    pub report: EvalReport,
}
