use std::path::{Path, PathBuf};
use std::time::Instant;

use ensroute::io::{
    self, align_to, load_dataset, read_json, write_json_atomic, DatasetManifest, DecisionRow, DecisionsFile,
    EstimateRow, EstimatesFile, LabelRow, Provenance, ReportFile, RunConfig, TaskMetric,
};
use ensroute::metrics::{accuracy_contains, rank_histogram, rouge2_f1, spearman_rho, EvalReport};
use ensroute::model::local_index;
use ensroute::router::{self, argmax, LabeledExample, RoutingDecision};
use ensroute::sim::{self, SyntheticConfig, ThetaLayout, TruthSidecar};
use ensroute::{
    estimate_global, estimate_local, estimate_train, EmbeddingRecord, EnsembleSpec, Error, EstimationMode, Result,
    ThetaEstimate,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::{
    BaselineArg, Command, EstimateArgs, EstimationArgs, EvaluateArgs, FormatArg, InputArgs, RouteArgs, SimulateArgs,
};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Estimate(a) => estimate(a),
        Command::Route(a) => route(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

struct Input {
    spec: EnsembleSpec,
    records: Vec<EmbeddingRecord<f64>>,
    generations: Option<io::GenerationSet>,
}

fn load_input(input: &InputArgs) -> Result<Input> {
    match (&input.manifest, &input.embeddings) {
        (Some(manifest), _) => {
            let data = load_dataset::<f64>(manifest)?;
            Ok(Input { spec: data.spec, records: data.records, generations: data.generations })
        }
        (None, Some(path)) => {
            let set = io::read_embeddings_any::<f64>(path, None)?;
            let spec = set.ensemble_spec()?;
            Ok(Input { spec, records: set.records, generations: None })
        }
        (None, None) => Err(Error::InvalidConfig("either --manifest or --embeddings is required".into())),
    }
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

fn input_params(input: &InputArgs) -> Map<String, Value> {
    let mut params = Map::new();
    if let Some(p) = &input.manifest {
        params.insert("manifest".into(), path_value(p));
    }
    if let Some(p) = &input.embeddings {
        params.insert("embeddings".into(), path_value(p));
    }
    params
}

fn run_config(est: &EstimationArgs, out: &Path, params: Map<String, Value>) -> RunConfig {
    let mode: EstimationMode = est.mode.into();
    RunConfig {
        mode: Some(mode),
        n0: (mode != EstimationMode::Global).then_some(est.n0),
        train_manifest: est.train_manifest.clone(),
        metric: est.metric.into(),
        seed: est.seed,
        output_path: out.to_owned(),
        params,
    }
}

fn run_estimation(input: &Input, est: &EstimationArgs) -> Result<Vec<ThetaEstimate<f64>>> {
    match est.mode.into() {
        EstimationMode::Global => {
            let shared = estimate_global(&input.records, &input.spec)?;
            Ok(shared.broadcast(input.records.iter().map(|r| r.id())))
        }
        EstimationMode::Local => {
            let index = local_index(&input.records, est.metric.into())?;
            estimate_local(&input.records, &input.spec, &index, est.n0)
        }
        EstimationMode::Train => {
            let path = est
                .train_manifest
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("train mode needs --train-manifest".into()))?;
            let pool = load_dataset::<f64>(path)?;
            if pool.spec.generator_names() != input.spec.generator_names() {
                return Err(Error::InvalidConfig("train pool and test set name different generators".into()));
            }
            estimate_train(&input.records, &pool.records, &pool.spec, est.n0, est.metric.into())
        }
    }
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let run = run_config(&args.estimation, &args.out, input_params(&args.input));
    run.validate()?;
    let input = load_input(&args.input)?;
    let start = Instant::now();
    let estimates = run_estimation(&input, &args.estimation)?;
    let elapsed = start.elapsed().as_secs_f64();
    eprintln!(
        "estimated {} samples in {elapsed:.3} s ({:.3} s per 1000 samples)",
        estimates.len(),
        elapsed * 1000.0 / estimates.len().max(1) as f64
    );
    let file = EstimatesFile {
        provenance: Provenance::new("estimate", run),
        generator_names: input.spec.generator_names().to_vec(),
        estimates: estimates.iter().map(EstimateRow::from).collect(),
    };
    write_json_atomic(&args.out, &file)
}

fn labeled_examples(path: &Path, generator_names: &[String], limit: Option<usize>) -> Result<Vec<LabeledExample>> {
    let rows = io::read_labels(path)?;
    let take = limit.unwrap_or(rows.len()).min(rows.len());
    rows.into_iter()
        .take(take)
        .map(|row| {
            let quality = row
                .quality_vector(generator_names)?
                .ok_or_else(|| Error::InvalidConfig(format!("validation sample `{}` has no quality vector", row.id)))?;
            Ok(LabeledExample {
                sample_id: row.id,
                reference_output: row.references.into_iter().next().unwrap_or_default(),
                per_generator_quality: quality,
                key: row.input_key,
            })
        })
        .collect()
}

fn route(args: RouteArgs) -> Result<()> {
    let mut params = input_params(&args.input);
    let input = load_input(&args.input)?;
    let names = input.spec.generator_names().to_vec();
    let ids: Vec<String> = input.records.iter().map(|r| r.id().to_owned()).collect();
    let decisions: Vec<RoutingDecision<f64>> = match args.baseline {
        None => {
            let run = run_config(&args.estimation, &args.out, Map::new());
            run.validate()?;
            router::route_all(&run_estimation(&input, &args.estimation)?)
        }
        Some(BaselineArg::Random) => router::baseline_random(&ids, names.len(), args.estimation.seed)?,
        Some(baseline) => {
            let val_path = args
                .val_labels
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("this baseline needs --val-labels".into()))?;
            params.insert("val_labels".into(), path_value(val_path));
            if baseline == BaselineArg::BestOnVal {
                params.insert("val_size".into(), args.val_size.into());
                let val = labeled_examples(val_path, &names, Some(args.val_size))?;
                let chosen = router::baseline_best_on_val(&val)?;
                let rows: Vec<Vec<f64>> = val.iter().map(|e| e.per_generator_quality.clone()).collect();
                let scores = router::generator_means(&rows)?;
                ids.iter()
                    .map(|id| RoutingDecision {
                        sample_id: id.clone(),
                        chosen,
                        scores: scores.clone(),
                        method: "best-on-val".into(),
                    })
                    .collect()
            } else {
                params.insert("k".into(), args.k.into());
                let val = labeled_examples(val_path, &names, None)?;
                let test = input
                    .records
                    .iter()
                    .map(|r| {
                        let key = r.input_key().ok_or_else(|| Error::MissingInputKey(r.id().to_owned()))?;
                        Ok((r.id().to_owned(), key.to_vec()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                router::baseline_labeled_knn(&val, &test, args.k)?
            }
        }
    };
    if let Some(b) = args.baseline {
        params.insert("baseline".into(), format!("{b:?}").to_lowercase().into());
    }
    let mut run = run_config(&args.estimation, &args.out, params);
    if args.baseline.is_some() {
        run.mode = None;
        run.n0 = None;
    }
    let texts = input.generations.as_ref().map(|g| &g.rows);
    let rows = decisions
        .iter()
        .enumerate()
        .map(|(x, d)| DecisionRow {
            id: d.sample_id.clone(),
            chosen: d.chosen,
            generator: names[d.chosen].clone(),
            scores: d.scores.clone(),
            method: d.method.clone(),
            text: texts.map(|rows| rows[x].texts[d.chosen].clone()),
        })
        .collect();
    let file = DecisionsFile { provenance: Provenance::new("route", run), generator_names: names, decisions: rows };
    write_json_atomic(&args.out, &file)
}

#[derive(Serialize, Deserialize)]
struct Stamped<T> {
    provenance: Provenance,
    #[serde(flatten)]
    body: T,
}

fn parse_scores(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| Error::InvalidTheta(format!("`{t}`: {e}")))).collect()
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let theta = if args.region_theta.is_empty() {
        let shared = args.theta.clone().unwrap_or_else(|| sim::log_spaced(args.m, 0.5, 8.0));
        ThetaLayout::Shared(shared)
    } else {
        let region_thetas = args.region_theta.iter().map(|t| parse_scores(t)).collect::<Result<Vec<_>>>()?;
        let clusters = args.clusters.unwrap_or(region_thetas.len());
        ThetaLayout::Piecewise { region_thetas, clusters }
    };
    let config = SyntheticConfig { n: args.n, d: args.d, theta, seed: args.seed, cluster_spread: args.spread };
    if config.m() != args.m && (args.theta.is_some() || !args.region_theta.is_empty()) {
        eprintln!("note: using m = {} from the given scores", config.m());
    }
    let data = if config.regions() >= 2 {
        sim::sample_piecewise::<f64>(&config)?
    } else {
        sim::sample_dataset::<f64>(&config)?
    };
    let spec = data.ensemble_spec()?;
    let names = spec.generator_names().to_vec();
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io { path: args.out_dir.clone(), source: e })?;

    let mut manifest = DatasetManifest {
        ensemble: spec,
        embeddings_path: PathBuf::new(),
        generations_path: None,
        labels_path: None,
        input_keys_path: None,
        task_metric: TaskMetric::Contains,
    };
    match args.format {
        FormatArg::Jsonl => {
            manifest.embeddings_path = "embeddings.jsonl".into();
            io::write_embeddings(&args.out_dir.join("embeddings.jsonl"), &names, &data.records)?;
        }
        FormatArg::Smb1 => {
            manifest.embeddings_path = "embeddings.smb1".into();
            manifest.input_keys_path = Some("input_keys.jsonl".into());
            io::write_smb1(&args.out_dir.join("embeddings.smb1"), &data.records)?;
            let keys: Vec<LabelRow> = data
                .records
                .iter()
                .map(|r| LabelRow {
                    id: r.id().to_owned(),
                    input_key: r.input_key().map(<[f64]>::to_vec),
                    ..Default::default()
                })
                .collect();
            io::write_labels(&args.out_dir.join("input_keys.jsonl"), &keys)?;
        }
    }
    let mut params = Map::new();
    params.insert("config".into(), serde_json::to_value(&config)?);
    params.insert("format".into(), format!("{:?}", args.format).to_lowercase().into());
    let run = RunConfig { seed: args.seed, output_path: args.out_dir.clone(), params, ..Default::default() };
    let provenance = Provenance::new("simulate", run);
    write_json_atomic(
        &args.out_dir.join("truth.json"),
        &Stamped { provenance: provenance.clone(), body: data.truth_sidecar(names) },
    )?;
    write_json_atomic(&args.out_dir.join("manifest.json"), &Stamped { provenance, body: manifest })
}

/// Indicator of the truly best generator(s) per sample.
fn optimal_indicator(theta: &[f64]) -> Vec<f64> {
    let best = theta.iter().copied().fold(f64::MIN, f64::max);
    theta.iter().map(|&t| if t == best { 1.0 } else { 0.0 }).collect()
}

fn mean_spearman(scores: &[Vec<f64>], truth: &[Vec<f64>]) -> Option<f64> {
    let values: Vec<f64> = scores.iter().zip(truth).filter_map(|(s, t)| spearman_rho(s, t).ok()).collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let mut params = Map::new();
    for (key, value) in [
        ("against_truth", &args.against_truth),
        ("estimates", &args.estimates),
        ("decisions", &args.decisions),
        ("manifest", &args.manifest),
    ] {
        if let Some(p) = value {
            params.insert(key.into(), path_value(p));
        }
    }
    let report = match (&args.against_truth, &args.manifest) {
        (Some(truth_path), _) => evaluate_truth(&args, &read_json::<TruthSidecar>(truth_path)?)?,
        (None, Some(manifest)) => evaluate_labels(&args, manifest)?,
        (None, None) => return Err(Error::InvalidConfig("evaluate needs --against-truth or --manifest".into())),
    };
    let run = RunConfig { output_path: args.out.clone(), params, ..Default::default() };
    if let Some(csv) = &args.csv {
        io::write_atomic(csv, report.to_csv().as_bytes())?;
    }
    write_json_atomic(&args.out, &ReportFile { provenance: Provenance::new("evaluate", run), report })
}

/// Scores and choices per truth sample, read from estimates or decisions.
fn scored_choices(args: &EvaluateArgs, ids: &[String]) -> Result<(String, Vec<Vec<f64>>, Vec<usize>)> {
    if let Some(path) = &args.estimates {
        let file: EstimatesFile = read_json(path)?;
        let est_ids: Vec<String> = file.estimates.iter().map(|e| e.id.clone()).collect();
        let order = align_to(ids, &est_ids, "estimates file")?;
        let scores: Vec<Vec<f64>> = order.iter().map(|&p| file.estimates[p].scores.clone()).collect();
        let chosen = scores.iter().map(|s| argmax(s).unwrap_or(0)).collect();
        let method = file.estimates.first().map_or("global".into(), |e| e.mode.to_string());
        Ok((method, scores, chosen))
    } else if let Some(path) = &args.decisions {
        let file: DecisionsFile = read_json(path)?;
        let dec_ids: Vec<String> = file.decisions.iter().map(|d| d.id.clone()).collect();
        let order = align_to(ids, &dec_ids, "decisions file")?;
        let scores = order.iter().map(|&p| file.decisions[p].scores.clone()).collect();
        let chosen = order.iter().map(|&p| file.decisions[p].chosen).collect();
        let method = file.decisions.first().map_or(String::new(), |d| d.method.clone());
        Ok((method, scores, chosen))
    } else {
        Err(Error::InvalidConfig("evaluate needs --estimates or --decisions".into()))
    }
}

fn decisions_from(ids: &[String], chosen: &[usize], method: &str) -> Vec<RoutingDecision<f64>> {
    ids.iter()
        .zip(chosen)
        .map(|(id, &c)| RoutingDecision { sample_id: id.clone(), chosen: c, scores: Vec::new(), method: method.into() })
        .collect()
}

fn evaluate_truth(args: &EvaluateArgs, truth: &TruthSidecar) -> Result<EvalReport> {
    let ids = &truth.sample_ids;
    let (method, scores, chosen) = scored_choices(args, ids)?;
    let m = truth.generator_names.len();
    if let Some(bad) = scores.iter().find(|s| s.len() != m) {
        return Err(Error::LengthMismatch { left: bad.len(), right: m });
    }
    let decisions = decisions_from(ids, &chosen, &method);
    let indicator: Vec<Vec<f64>> = truth.theta_truth.iter().map(|t| optimal_indicator(t)).collect();
    let mut report =
        EvalReport::from_qualities(&method, "optimal-routing", truth.generator_names.clone(), &indicator, &decisions)?;
    report.rank_histogram = Some(rank_histogram(&truth.theta_truth, &decisions)?);
    if args.estimates.is_some() {
        report.spearman = mean_spearman(&scores, &truth.theta_truth);
        report.max_relative_error = scores
            .iter()
            .zip(&truth.theta_truth)
            .flat_map(|(s, t)| s.iter().zip(t).map(|(a, b)| (a - b).abs() / b))
            .reduce(f64::max);
    }
    Ok(report)
}

fn evaluate_labels(args: &EvaluateArgs, manifest_path: &Path) -> Result<EvalReport> {
    let data = load_dataset::<f64>(manifest_path)?;
    let labels = data.labels.as_ref().ok_or_else(|| Error::InvalidConfig("manifest has no labels file".into()))?;
    let names = data.spec.generator_names().to_vec();
    let task: TaskMetric = args.task_metric.map_or(data.manifest.task_metric, Into::into);
    let qualities = labels
        .iter()
        .enumerate()
        .map(|(x, row)| {
            if let Some(q) = row.quality_vector(&names)? {
                return Ok(q);
            }
            let generations = data.generations.as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!("sample `{}` has no quality vector and no generations", row.id))
            })?;
            if row.references.is_empty() {
                return Err(Error::InvalidConfig(format!("sample `{}` has no references", row.id)));
            }
            Ok(generations.rows[x]
                .texts
                .iter()
                .map(|text| match task {
                    TaskMetric::Contains => f64::from(accuracy_contains(text, &row.references)),
                    TaskMetric::Rouge2 => row.references.iter().map(|r| rouge2_f1(text, r)).fold(0.0, f64::max),
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let ids = data.ids();
    let (method, scores, chosen) = scored_choices(args, &ids)?;
    let decisions = decisions_from(&ids, &chosen, &method);
    let mut report = EvalReport::from_qualities(&method, &task.to_string(), names, &qualities, &decisions)?;
    report.spearman = mean_spearman(&scores, &qualities);
    Ok(report)
}
