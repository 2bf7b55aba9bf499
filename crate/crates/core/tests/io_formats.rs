use std::fs;
use std::path::Path;

use ensroute::io::*;
use ensroute::sim::{self, log_spaced, SyntheticConfig};
use ensroute::*;
use serde_json::json;

fn names(m: usize) -> Vec<String> {
    (0..m).map(|g| format!("gen{g}")).collect()
}

fn sample(n: usize, m: usize, d: usize) -> SyntheticDataset<f64> {
    sim::sample_dataset(&SyntheticConfig::shared(n, d, log_spaced(m, 0.5, 8.0), 9)).unwrap()
}

#[test]
fn jsonl_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.jsonl");
    let data = sample(50, 4, 7);
    write_embeddings(&path, &names(4), &data.records).unwrap();
    let set: EmbeddingSet<f64> = read_embeddings(&path, None).unwrap();
    assert_eq!(set.generator_names, names(4));
    assert_eq!(set.records, data.records);
}

#[test]
fn jsonl_respects_ensemble_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.jsonl");
    let data = sample(5, 3, 2);
    write_embeddings(&path, &names(3), &data.records).unwrap();
    let spec = EnsembleSpec::new(vec!["gen2".into(), "gen0".into(), "gen1".into()], 2).unwrap();
    let set: EmbeddingSet<f64> = read_embeddings(&path, Some(&spec)).unwrap();
    for (read, orig) in set.records.iter().zip(&data.records) {
        assert_eq!(read, &orig.permute_generators(&[2, 0, 1]).unwrap());
    }
}

fn write_lines(path: &Path, lines: &[serde_json::Value]) {
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text).unwrap();
}

#[test]
fn jsonl_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let good = json!({"id": "a", "embeddings": {"x": [1.0, 2.0], "y": [0.0, 1.0], "z": [3.0, 3.0]}});
    let short = json!({"id": "b", "embeddings": {"x": [1.0], "y": [0.0, 1.0], "z": [3.0, 3.0]}});
    write_lines(&path, &[good.clone(), short]);
    let err = read_embeddings::<f64>(&path, None).unwrap_err();
    assert!(err.to_string().contains("b"), "{err}");
    assert!(matches!(err, Error::Parse { line: 2, .. } | Error::InconsistentEmbeddings { .. }), "{err:?}");

    fs::write(&path, format!("{good}\n{{not json\n")).unwrap();
    assert!(matches!(read_embeddings::<f64>(&path, None), Err(Error::Parse { line: 2, .. })));

    write_lines(&path, &[good.clone(), good]);
    assert!(matches!(read_embeddings::<f64>(&path, None), Err(Error::DuplicateId(_))));
}

#[test]
fn two_generators_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.jsonl");
    write_lines(&path, &[json!({"id": "a", "embeddings": {"x": [1.0], "y": [2.0]}})]);
    assert!(matches!(read_embeddings::<f64>(&path, None), Err(Error::EnsembleTooSmall { m: 2 })));
}

#[test]
fn smb1_roundtrip_and_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.smb1");
    let data: SyntheticDataset<f32> =
        sim::sample_dataset(&SyntheticConfig::shared(20, 3, vec![1.0, 2.0, 4.0], 1)).unwrap();
    let records: Vec<EmbeddingRecord<f32>> =
        data.records.iter().map(|r| EmbeddingRecord::new(r.id(), r.vectors().to_vec(), None).unwrap()).collect();
    write_smb1(&path, &records).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], SMB1_MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 20);
    let id_len = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
    assert_eq!(&bytes[24..24 + id_len], records[0].id().as_bytes());
    let first = f32::from_le_bytes(bytes[24 + id_len..28 + id_len].try_into().unwrap());
    assert_eq!(first, records[0].vector(0)[0]);
    assert_eq!(bytes.len(), 20 + 20 * (4 + id_len + 9 * 4));
    assert_eq!(read_smb1::<f32>(&path).unwrap(), records);

    let set: EmbeddingSet<f32> = read_embeddings_any(&path, None).unwrap();
    assert_eq!(set.generator_names, vec!["g0", "g1", "g2"]);

    fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(read_smb1::<f32>(&path).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    fs::write(&path, &bad).unwrap();
    assert!(read_smb1::<f32>(&path).is_err());
}

fn write_manifest(dir: &Path, extra: serde_json::Value) -> std::path::PathBuf {
    let mut manifest = json!({
        "ensemble": {"generator_names": names(3), "embedding_dim": 2},
        "embeddings_path": "emb.jsonl",
    });
    manifest.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_string()).unwrap();
    path
}

#[test]
fn manifest_loads_and_aligns_companion_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(6, 3, 2);
    write_embeddings(&dir.path().join("emb.jsonl"), &names(3), &data.records).unwrap();
    let mut rows: Vec<GenerationRow> = data
        .records
        .iter()
        .map(|r| GenerationRow {
            id: r.id().into(),
            input: None,
            texts: vec![format!("a {}", r.id()), "b".into(), "c".into()],
        })
        .collect();
    rows.reverse();
    write_generations(&dir.path().join("gen.jsonl"), &GenerationSet { generator_names: names(3), rows }).unwrap();
    let path = write_manifest(dir.path(), json!({"generations_path": "gen.jsonl"}));
    let loaded: io::LoadedDataset<f64> = load_dataset(&path).unwrap();
    assert_eq!(loaded.records, data.records);
    let generations = loaded.generations.unwrap();
    for (row, rec) in generations.rows.iter().zip(&loaded.records) {
        assert_eq!(row.id, rec.id());
    }
}

#[test]
fn manifest_rejects_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(4, 3, 2);
    write_embeddings(&dir.path().join("emb.jsonl"), &names(3), &data.records).unwrap();
    let labels: Vec<LabelRow> = (0..4)
        .map(|i| LabelRow { id: format!("other{i}"), references: vec!["x".into()], ..Default::default() })
        .collect();
    write_labels(&dir.path().join("labels.jsonl"), &labels).unwrap();
    let path = write_manifest(dir.path(), json!({"labels_path": "labels.jsonl"}));
    let err = load_dataset::<f64>(&path).unwrap_err();
    assert!(err.to_string().contains("no sample `s0`"), "{err}");

    let path = write_manifest(dir.path(), json!({"labels_path": "missing.jsonl"}));
    assert!(load_dataset::<f64>(&path).is_err());
}

#[test]
fn manifest_dimension_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(4, 3, 5);
    write_embeddings(&dir.path().join("emb.jsonl"), &names(3), &data.records).unwrap();
    let path = write_manifest(dir.path(), json!({}));
    assert!(load_dataset::<f64>(&path).is_err());
}

#[test]
fn atomic_writes_replace_whole_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    write_json_atomic(&path, &json!({"a": 1})).unwrap();
    write_json_atomic(&path, &json!({"b": [1, 2]})).unwrap();
    let back: serde_json::Value = read_json(&path).unwrap();
    assert_eq!(back, json!({"b": [1, 2]}));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}
