use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::output::write_atomic;
use crate::error::{Error, Result};
use crate::model::{EmbeddingRecord, EnsembleSpec};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet<T> {
    pub generator_names: Vec<String>,
    pub records: Vec<EmbeddingRecord<T>>,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id().to_owned()).collect()
    }

    pub fn dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.dim())
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        EnsembleSpec::new(self.generator_names.clone(), self.dim())
    }
}

#[derive(Deserialize)]
struct EmbeddingLine {
    id: String,
    embeddings: Map<String, Value>,
    #[serde(default)]
    input_key: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct EmbeddingLineOut<'a> {
    id: &'a str,
    embeddings: Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_key: Option<Vec<f64>>,
}

fn lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, line)| line.map(|l| (i + 1, l)).map_err(|e| Error::io(path, e)))
        .filter(|item| !matches!(item, Ok((_, l)) if l.trim().is_empty())))
}

fn parse_error(path: &Path, line: usize, reason: impl ToString) -> Error {
    Error::Parse { path: path.to_owned(), line, reason: reason.to_string() }
}

fn to_scalars<T: Scalar>(values: Vec<f64>) -> Vec<T> {
    values.into_iter().map(T::of).collect()
}

fn to_f64s<T: Scalar>(values: &[T]) -> Vec<Value> {
    values.iter().map(|v| Value::from(v.as_f64())).collect()
}

/// Reads a JSON Lines embedding file.
///
/// Generator order follows `ensemble` when given, otherwise the key order of
/// the first line. Every line must name exactly the same generators.
pub fn read_embeddings<T: Scalar>(path: &Path, ensemble: Option<&EnsembleSpec>) -> Result<EmbeddingSet<T>> {
    let mut names: Option<Vec<String>> = ensemble.map(|s| s.generator_names().to_vec());
    let mut records: Vec<EmbeddingRecord<T>> = Vec::new();
    let mut seen = HashSet::new();
    let mut key_dim: Option<usize> = None;
    for item in lines(path)? {
        let (lineno, line) = item?;
        let parsed: EmbeddingLine = serde_json::from_str(&line).map_err(|e| parse_error(path, lineno, e))?;
        let order = names.get_or_insert_with(|| parsed.embeddings.keys().cloned().collect());
        if order.len() < 3 {
            return Err(Error::EnsembleTooSmall { m: order.len() });
        }
        if parsed.embeddings.len() != order.len() {
            return Err(Error::inconsistent(
                &parsed.id,
                format!("{} generators, expected {}", parsed.embeddings.len(), order.len()),
            ));
        }
        let mut vectors = Vec::with_capacity(order.len());
        for name in order.iter() {
            let value = parsed
                .embeddings
                .get(name)
                .ok_or_else(|| Error::inconsistent(&parsed.id, format!("missing generator `{name}`")))?;
            let v: Vec<f64> = serde_json::from_value(value.clone())
                .map_err(|e| parse_error(path, lineno, format!("generator `{name}`: {e}")))?;
            vectors.push(to_scalars(v));
        }
        if let Some(first) = records.first() {
            if vectors[0].len() != first.dim() {
                return Err(Error::inconsistent(
                    &parsed.id,
                    format!("dimension {}, expected {}", vectors[0].len(), first.dim()),
                ));
            }
        }
        if let Some(spec) = ensemble {
            if vectors[0].len() != spec.embedding_dim() {
                return Err(Error::inconsistent(
                    &parsed.id,
                    format!("dimension {}, ensemble has {}", vectors[0].len(), spec.embedding_dim()),
                ));
            }
        }
        if let Some(key) = &parsed.input_key {
            match key_dim {
                Some(kd) if kd != key.len() => {
                    return Err(Error::inconsistent(
                        &parsed.id,
                        format!("input key dimension {}, expected {kd}", key.len()),
                    ))
                }
                _ => key_dim = Some(key.len()),
            }
        }
        if !seen.insert(parsed.id.clone()) {
            return Err(Error::DuplicateId(parsed.id));
        }
        records.push(EmbeddingRecord::new(parsed.id, vectors, parsed.input_key.map(to_scalars))?);
    }
    if records.is_empty() {
        return Err(Error::Format { path: path.to_owned(), reason: "no records".into() });
    }
    Ok(EmbeddingSet { generator_names: names.unwrap_or_default(), records })
}

pub fn write_embeddings<T: Scalar>(
    path: &Path,
    generator_names: &[String],
    records: &[EmbeddingRecord<T>],
) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        if r.m() != generator_names.len() {
            return Err(Error::inconsistent(r.id(), "generator count differs from names"));
        }
        let embeddings =
            generator_names.iter().zip(r.vectors()).map(|(name, v)| (name.clone(), Value::Array(to_f64s(v)))).collect();
        let line = EmbeddingLineOut {
            id: r.id(),
            embeddings,
            input_key: r.input_key().map(|k| k.iter().map(|x| x.as_f64()).collect()),
        };
        serde_json::to_writer(&mut buf, &line)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

#[derive(Deserialize)]
struct InputKeyLine {
    id: String,
    input_key: Vec<f64>,
}

/// Reads `{"id", "input_key"}` lines into an id-ordered list.
pub fn read_input_keys(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for item in lines(path)? {
        let (lineno, line) = item?;
        let parsed: InputKeyLine = serde_json::from_str(&line).map_err(|e| parse_error(path, lineno, e))?;
        if !seen.insert(parsed.id.clone()) {
            return Err(Error::DuplicateId(parsed.id));
        }
        out.push((parsed.id, parsed.input_key));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRow {
    pub id: String,
    pub input: Option<String>,
    /// One text per generator, in `GenerationSet::generator_names` order.
    pub texts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationSet {
    pub generator_names: Vec<String>,
    pub rows: Vec<GenerationRow>,
}

#[derive(Serialize, Deserialize)]
struct GenerationLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    generations: Map<String, Value>,
}

pub fn read_generations(path: &Path, generator_names: Option<&[String]>) -> Result<GenerationSet> {
    let mut names: Option<Vec<String>> = generator_names.map(<[String]>::to_vec);
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for item in lines(path)? {
        let (lineno, line) = item?;
        let parsed: GenerationLine = serde_json::from_str(&line).map_err(|e| parse_error(path, lineno, e))?;
        let order = names.get_or_insert_with(|| parsed.generations.keys().cloned().collect());
        if parsed.generations.len() != order.len() {
            return Err(parse_error(
                path,
                lineno,
                format!("{} generations, expected {}", parsed.generations.len(), order.len()),
            ));
        }
        let texts = order
            .iter()
            .map(|name| match parsed.generations.get(name) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(_) => Err(parse_error(path, lineno, format!("generation `{name}` is not a string"))),
                None => Err(parse_error(path, lineno, format!("missing generation `{name}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert(parsed.id.clone()) {
            return Err(Error::DuplicateId(parsed.id));
        }
        rows.push(GenerationRow { id: parsed.id, input: parsed.input, texts });
    }
    Ok(GenerationSet { generator_names: names.unwrap_or_default(), rows })
}

pub fn write_generations(path: &Path, set: &GenerationSet) -> Result<()> {
    let mut buf = Vec::new();
    for row in &set.rows {
        let generations =
            set.generator_names.iter().zip(&row.texts).map(|(n, t)| (n.clone(), Value::String(t.clone()))).collect();
        serde_json::to_writer(&mut buf, &GenerationLine { id: row.id.clone(), input: row.input.clone(), generations })?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Labels for one sample: acceptable reference outputs and/or the measured
/// quality of each generator's output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<String>,
    /// Generator name to quality in `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<Map<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_key: Option<Vec<f64>>,
}

impl LabelRow {
    /// Quality vector in `generator_names` order, if this row carries one.
    pub fn quality_vector(&self, generator_names: &[String]) -> Result<Option<Vec<f64>>> {
        let Some(map) = &self.quality else { return Ok(None) };
        generator_names
            .iter()
            .map(|name| {
                map.get(name)
                    .and_then(Value::as_f64)
                    .filter(|q| q.is_finite())
                    .ok_or_else(|| Error::inconsistent(&self.id, format!("missing or invalid quality for `{name}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for item in lines(path)? {
        let (lineno, line) = item?;
        let parsed: LabelRow = serde_json::from_str(&line).map_err(|e| parse_error(path, lineno, e))?;
        if !seen.insert(parsed.id.clone()) {
            return Err(Error::DuplicateId(parsed.id));
        }
        out.push(parsed);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, row)?;
        buf.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}
