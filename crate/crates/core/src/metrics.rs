//! Evaluation metrics: answer containment, Rouge-2, Spearman correlation and
//! rank histograms of routed generations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::router::RoutingDecision;

fn normalize(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// 1 if any answer occurs in the generation after case folding and collapsing
/// whitespace, else 0. Answers that normalize to nothing never match.
pub fn accuracy_contains<S: AsRef<str>>(generation: &str, answers: &[S]) -> u8 {
    let haystack = normalize(generation);
    let hit = answers.iter().any(|a| {
        let needle = normalize(a.as_ref());
        !needle.is_empty() && haystack.contains(&needle)
    });
    u8::from(hit)
}

/// Lowercased whitespace tokens with leading and trailing punctuation removed.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.trim_matches(is_punctuation).to_lowercase()).filter(|t| !t.is_empty()).collect()
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c, '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{3001}'..='\u{3003}' | '\u{00A1}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}')
}

fn bigrams(tokens: &[String]) -> HashMap<(&str, &str), usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(2) {
        *counts.entry((w[0].as_str(), w[1].as_str())).or_insert(0) += 1;
    }
    counts
}

/// Bigram-overlap F1 between candidate and reference. Zero when either side
/// has fewer than two tokens.
pub fn rouge2_f1(candidate: &str, reference: &str) -> f64 {
    let cand = rouge_tokens(candidate);
    let refr = rouge_tokens(reference);
    if cand.len() < 2 || refr.len() < 2 {
        return 0.0;
    }
    let c = bigrams(&cand);
    let r = bigrams(&refr);
    let overlap: usize = c.iter().map(|(k, n)| (*n).min(*r.get(k).unwrap_or(&0))).sum();
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / (cand.len() - 1) as f64;
    let recall = overlap as f64 / (refr.len() - 1) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of the average-rank vectors.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::UndefinedCorrelation("non-finite observation".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean).powi(2);
        vb += (y - mean).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Standard competition rank (1 = best) of generator `chosen` within `qualities`.
pub fn competition_rank(qualities: &[f64], chosen: usize) -> usize {
    let q = qualities[chosen];
    1 + qualities.iter().filter(|&&other| other > q).count()
}

/// Counts of the competition rank of each chosen generation; entry `r - 1` holds rank `r`.
pub fn rank_histogram<T>(qualities: &[Vec<f64>], decisions: &[RoutingDecision<T>]) -> Result<Vec<usize>> {
    if qualities.len() != decisions.len() {
        return Err(Error::LengthMismatch { left: qualities.len(), right: decisions.len() });
    }
    let m = qualities.first().map_or(0, Vec::len);
    let mut counts = vec![0; m];
    for (row, decision) in qualities.iter().zip(decisions) {
        if row.len() != m {
            return Err(Error::LengthMismatch { left: row.len(), right: m });
        }
        if decision.chosen >= m {
            return Err(Error::InvalidConfig(format!(
                "sample `{}` routed to generator {} of {m}",
                decision.sample_id, decision.chosen
            )));
        }
        counts[competition_rank(row, decision.chosen) - 1] += 1;
    }
    Ok(counts)
}

/// Results of scoring one routing run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub metric: String,
    pub n: usize,
    /// Mean quality of the routed generations, 0-100.
    pub score: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generator_names: Vec<String>,
    /// Mean quality of every generator on its own, 0-100.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_generator: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_baseline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spearman: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_histogram: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_relative_error: Option<f64>,
}

impl EvalReport {
    /// Builds a report from per-sample qualities (in `[0, 1]`) and routing choices.
    pub fn from_qualities<T>(
        method: &str,
        metric: &str,
        generator_names: Vec<String>,
        qualities: &[Vec<f64>],
        decisions: &[RoutingDecision<T>],
    ) -> Result<Self> {
        let histogram = rank_histogram(qualities, decisions)?;
        let n = qualities.len();
        if n == 0 {
            return Err(Error::EmptyContext);
        }
        let score = qualities.iter().zip(decisions).map(|(q, d)| q[d.chosen]).sum::<f64>() / n as f64;
        let per_generator = crate::router::generator_means(qualities)?;
        let random = per_generator.iter().sum::<f64>() / per_generator.len().max(1) as f64;
        let oracle = qualities.iter().map(|q| q.iter().copied().fold(f64::MIN, f64::max)).sum::<f64>() / n as f64;
        Ok(Self {
            method: method.to_owned(),
            metric: metric.to_owned(),
            n,
            score: 100.0 * score,
            generator_names,
            per_generator: per_generator.into_iter().map(|v| 100.0 * v).collect(),
            random_baseline: Some(100.0 * random),
            oracle: Some(100.0 * oracle),
            spearman: None,
            rank_histogram: Some(histogram),
            max_relative_error: None,
        })
    }

    /// One header row and one value row: method, score, then each generator.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["method".to_owned(), self.metric.clone()];
        let mut row = vec![self.method.clone(), format!("{:.2}", self.score)];
        for (name, value) in self.generator_names.iter().zip(&self.per_generator) {
            header.push(name.clone());
            row.push(format!("{value:.2}"));
        }
        if let Some(r) = self.random_baseline {
            header.push("random".into());
            row.push(format!("{r:.2}"));
        }
        if let Some(o) = self.oracle {
            header.push("oracle".into());
            row.push(format!("{o:.2}"));
        }
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}
