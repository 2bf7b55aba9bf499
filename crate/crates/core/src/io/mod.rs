//! On-disk formats: JSON Lines embedding/generation/label files, the SMB1
//! binary embedding format, dataset manifests and provenance-stamped outputs.

mod jsonl;
mod manifest;
mod output;
mod smb1;

pub use jsonl::{
    read_embeddings, read_generations, read_input_keys, read_labels, write_embeddings, write_generations, write_labels,
    EmbeddingSet, GenerationRow, GenerationSet, LabelRow,
};
pub use manifest::{align_to, load_dataset, DatasetManifest, LoadedDataset, RunConfig, TaskMetric};
pub use output::{
    read_json, write_atomic, write_json_atomic, DecisionRow, DecisionsFile, EstimateRow, EstimatesFile, Provenance,
    ReportFile,
};
pub use smb1::{read_smb1, write_smb1, SMB1_MAGIC};

use std::path::Path;

/// Reads an embedding file, choosing SMB1 for `.smb1`/`.bin` extensions and
/// JSON Lines otherwise.
pub fn read_embeddings_any<T: crate::Scalar>(
    path: &Path,
    ensemble: Option<&crate::EnsembleSpec>,
) -> crate::Result<EmbeddingSet<T>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("smb1" | "bin") => {
            let records: Vec<crate::EmbeddingRecord<T>> = read_smb1(path)?;
            let m = records.first().map_or(0, |r| r.m());
            let generator_names = match ensemble {
                Some(spec) => spec.generator_names().to_vec(),
                None => (0..m).map(|i| format!("g{i}")).collect(),
            };
            if generator_names.len() != m {
                return Err(crate::Error::Format {
                    path: path.to_owned(),
                    reason: format!("file has {m} generators, ensemble names {}", generator_names.len()),
                });
            }
            Ok(EmbeddingSet { generator_names, records })
        }
        _ => read_embeddings(path, ensemble),
    }
}
