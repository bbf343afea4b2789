//! Experiment specification, run reports and the commands behind the CLI:
//! `train`, `eval`, `infer-bench`, `scaling` and `gradcheck`.
//!
//! Specs use a `key = value` text format; `#` starts a comment. The same
//! keys are accepted as command-line overrides.
//!
//! ```text
//! edges = data/karate.edges
//! labels = data/karate.labels
//! model = twostage
//! layer_dims = 32,16
//! seeds = 0..10
//! k = labels
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::apam::{InferenceEngine, NewNode, Variant};
use crate::checkpoint::{Checkpoint, ModelKind};
use crate::clustering::{kmeans_fit, sweep_k, SweepRow, DEFAULT_RESTARTS};
use crate::error::{Error, Result};
use crate::gae::GaeModel;
use crate::graph::{load_edge_list, load_features, load_labels, CommunityAssignment, Graph};
use crate::metrics::{accuracy, modularity_score, nmi};
use crate::nn::{flatten, gradient_check, unflatten, DecoderNonlinearity, GradCheckReport, TrainingConfig};
use crate::onestage::OneStageModel;
use crate::rng;
use crate::synth::PlantedPartition;
use crate::twostage::TwoStageModel;
use crate::Matrix;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// How many communities to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KChoice {
    /// Number of distinct ground-truth labels.
    Labels,
    Fixed(usize),
    /// Highest-Q `k` in `min..=max`.
    Sweep { min: usize, max: usize },
}

impl FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad k {s:?}: expected an integer, a range a..b or `labels`"));
        if s == "labels" {
            return Ok(Self::Labels);
        }
        if let Some((a, b)) = s.split_once("..") {
            let min = a.trim().parse().map_err(|_| bad())?;
            let max = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            return Ok(Self::Sweep { min, max });
        }
        s.parse().map(Self::Fixed).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Generate a planted-partition graph of this size instead of reading
    /// `edges`.
    pub synthetic_nodes: Option<usize>,
    pub synthetic_degree: f64,
    pub graph_seed: u64,
    pub model: ModelKind,
    pub training: TrainingConfig,
    pub k: KChoice,
    pub seeds: Vec<u64>,
    pub restarts: usize,
    pub split_fraction: f64,
    /// Treat missing labels as an error in the report.
    pub require_nmi: bool,
    pub fine_tune_epochs: usize,
    pub fine_tune_lr_factor: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            edges: None,
            features: None,
            labels: None,
            synthetic_nodes: None,
            synthetic_degree: 10.0,
            graph_seed: 0,
            model: ModelKind::TwoStage,
            training: TrainingConfig::default(),
            k: KChoice::Labels,
            seeds: vec![0],
            restarts: DEFAULT_RESTARTS,
            split_fraction: 0.2,
            require_nmi: false,
            fine_tune_epochs: 20,
            fine_tune_lr_factor: 0.1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

/// `a..b`, `a..=b` or a comma-separated list.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let start: u64 = parse_value("seeds", a.trim())?;
        return match b.strip_prefix('=') {
            Some(end) => Ok((start..=parse_value("seeds", end.trim())?).collect()),
            None => Ok((start..parse_value("seeds", b.trim())?).collect()),
        };
    }
    parse_list("seeds", value)
}

impl ExperimentSpec {
    pub const KEYS: &'static [&'static str] = &[
        "edges",
        "features",
        "labels",
        "synthetic_nodes",
        "synthetic_degree",
        "graph_seed",
        "model",
        "layer_dims",
        "learning_rate",
        "epochs",
        "minibatch_size",
        "neighbor_samples",
        "decoder",
        "k",
        "seed",
        "seeds",
        "restarts",
        "split_fraction",
        "require_nmi",
        "fine_tune_epochs",
        "fine_tune_lr_factor",
    ];

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let t = &mut self.training;
        match key {
            "edges" => self.edges = Some(value.into()),
            "features" => self.features = Some(value.into()),
            "labels" => self.labels = Some(value.into()),
            "synthetic_nodes" => self.synthetic_nodes = Some(parse_value(key, value)?),
            "synthetic_degree" => self.synthetic_degree = parse_value(key, value)?,
            "graph_seed" => self.graph_seed = parse_value(key, value)?,
            "model" => self.model = value.parse()?,
            "layer_dims" => t.layer_dims = parse_list(key, value)?,
            "learning_rate" => t.learning_rate = parse_value(key, value)?,
            "epochs" => t.epochs = parse_value(key, value)?,
            "minibatch_size" => t.minibatch_size = parse_value(key, value)?,
            "neighbor_samples" => t.neighbor_samples = parse_value(key, value)?,
            "decoder" => t.decoder = value.parse::<DecoderNonlinearity>()?,
            "k" => self.k = value.parse()?,
            "seed" => self.seeds = vec![parse_value(key, value)?],
            "seeds" => self.seeds = parse_seeds(value)?,
            "restarts" => self.restarts = parse_value(key, value)?,
            "split_fraction" => self.split_fraction = parse_value(key, value)?,
            "require_nmi" => self.require_nmi = parse_value(key, value)?,
            "fine_tune_epochs" => self.fine_tune_epochs = parse_value(key, value)?,
            "fine_tune_lr_factor" => self.fine_tune_lr_factor = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of the defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut spec = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            spec.apply(key.trim(), value).map_err(|e| err(e.to_string()))?;
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(0.0..=0.5).contains(&self.split_fraction) {
            return Err(Error::Config(format!("split_fraction {} outside [0, 0.5]", self.split_fraction)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.edges.is_none() && self.synthetic_nodes.is_none() {
            return Err(Error::Config("set either edges or synthetic_nodes".into()));
        }
        match self.k {
            KChoice::Fixed(k) if k < 2 => Err(Error::Config(format!("k = {k}: at least two communities are needed"))),
            KChoice::Sweep { min, max } if min < 2 || min > max => {
                Err(Error::Config(format!("k range {min}..{max} must start at 2 or more and be non-empty")))
            }
            _ => Ok(()),
        }
    }

    pub fn load_graph(&self) -> Result<Graph> {
        if let Some(n) = self.synthetic_nodes {
            let planted = PlantedPartition { average_degree: self.synthetic_degree, ..PlantedPartition::benchmark(n) };
            return planted.generate(self.graph_seed);
        }
        let edges = self.edges.as_ref().ok_or_else(|| Error::Config("no edge list given".into()))?;
        let mut graph = load_edge_list(edges, false)?;
        if let Some(path) = &self.features {
            graph = load_features(path, graph)?;
        }
        if let Some(path) = &self.labels {
            graph = load_labels(path, graph)?;
        }
        Ok(graph)
    }

    fn config_for(&self, seed: u64) -> TrainingConfig {
        TrainingConfig { seed, ..self.training.clone() }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    OneStage(OneStageModel),
    TwoStage(TwoStageModel),
    Gae(GaeModel),
}

impl TrainedModel {
    pub fn train(kind: ModelKind, graph: &Graph, config: TrainingConfig) -> Result<Self> {
        let epochs = config.epochs;
        Ok(match kind {
            ModelKind::OneStage => {
                let mut m = OneStageModel::new(graph, config)?;
                m.fit(epochs)?;
                Self::OneStage(m)
            }
            ModelKind::TwoStage => {
                let mut m = TwoStageModel::new(graph, config.clone())?;
                m.fit(graph, epochs, config.learning_rate)?;
                Self::TwoStage(m)
            }
            ModelKind::Gae => {
                let mut m = GaeModel::new(graph, config)?;
                m.fit(epochs)?;
                Self::Gae(m)
            }
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint, graph: &Graph) -> Result<Self> {
        if ck.n_nodes != graph.n_nodes() || ck.feature_dim != graph.feature_dim() {
            return Err(Error::shape(
                "checkpoint graph",
                format!("{} nodes, {} features", ck.n_nodes, ck.feature_dim),
                format!("{} nodes, {} features", graph.n_nodes(), graph.feature_dim()),
            ));
        }
        let (config, weights) = (ck.config.clone(), ck.weights.clone());
        Ok(match ck.kind {
            ModelKind::OneStage => Self::OneStage(OneStageModel::from_weights(graph, config, weights)?),
            ModelKind::TwoStage => Self::TwoStage(TwoStageModel::from_weights(graph, config, weights)?),
            ModelKind::Gae => Self::Gae(GaeModel::from_weights(graph, config, weights)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::OneStage(_) => ModelKind::OneStage,
            Self::TwoStage(_) => ModelKind::TwoStage,
            Self::Gae(_) => ModelKind::Gae,
        }
    }

    pub fn embed(&self, graph: &Graph) -> Result<Matrix> {
        match self {
            Self::OneStage(m) => Ok(m.embed()),
            Self::TwoStage(m) => m.embed(graph),
            Self::Gae(m) => Ok(m.embed()),
        }
    }

    pub fn loss_trace(&self) -> &[f64] {
        match self {
            Self::OneStage(m) => &m.loss_trace,
            Self::TwoStage(m) => &m.loss_trace,
            Self::Gae(m) => &m.loss_trace,
        }
    }

    fn config(&self) -> &TrainingConfig {
        match self {
            Self::OneStage(m) => &m.config,
            Self::TwoStage(m) => &m.config,
            Self::Gae(m) => &m.config,
        }
    }

    pub fn checkpoint(&self, graph: &Graph) -> Checkpoint {
        let weights = match self {
            Self::OneStage(m) => m.weights.iter().map(|w| w.w.clone()).collect(),
            Self::TwoStage(m) => m.weights.iter().map(|w| w.w.clone()).collect(),
            Self::Gae(m) => m.weights.iter().map(|w| w.w.clone()).collect(),
        };
        Checkpoint {
            kind: self.kind(),
            n_nodes: graph.n_nodes(),
            feature_dim: graph.feature_dim(),
            config: self.config().clone(),
            weights,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub k: usize,
    pub q: f64,
    pub nmi: Option<f64>,
    pub accuracy: Option<f64>,
    pub final_loss: Option<f64>,
    pub loss_trace: Vec<f64>,
    /// Per-`k` table when `k` was swept.
    pub k_table: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median_q: f64,
    pub best_q: f64,
    pub median_nmi: Option<f64>,
    pub best_nmi: Option<f64>,
    pub median_accuracy: Option<f64>,
    pub best_accuracy: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

fn best(values: &[f64]) -> Option<f64> {
    values.iter().copied().max_by(f64::total_cmp)
}

impl Summary {
    pub fn from_seeds(seeds: &[SeedResult]) -> Self {
        let q: Vec<f64> = seeds.iter().map(|s| s.q).collect();
        let nmi: Vec<f64> = seeds.iter().filter_map(|s| s.nmi).collect();
        let ac: Vec<f64> = seeds.iter().filter_map(|s| s.accuracy).collect();
        Self {
            median_q: median(&q).unwrap_or(f64::NAN),
            best_q: best(&q).unwrap_or(f64::NAN),
            median_nmi: median(&nmi),
            best_nmi: best(&nmi),
            median_accuracy: median(&ac),
            best_accuracy: best(&ac),
        }
    }
}

/// Everything but wall-clock timings, which go to `timings.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub code_version: String,
    pub spec: ExperimentSpec,
    pub model: ModelKind,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub feature_dim: usize,
    pub synthetic: bool,
    pub untrained: bool,
    pub seeds: Vec<SeedResult>,
    pub summary: Summary,
    pub errors: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad report: {e}")))
    }

    pub fn metrics_rows(&self) -> Vec<MetricsRow> {
        self.seeds
            .iter()
            .map(|s| MetricsRow {
                seed: s.seed,
                k: s.k,
                q: s.q,
                nmi: s.nmi,
                accuracy: s.accuracy,
                final_loss: s.final_loss,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub k: usize,
    pub q: f64,
    pub nmi: Option<f64>,
    pub accuracy: Option<f64>,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub phase: String,
    pub seed: u64,
    pub seconds: f64,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

pub fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad csv: {e}")))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn embedding_text(graph: &Graph, z: &Matrix) -> String {
    let mut out = String::new();
    for (i, row) in z.rows().into_iter().enumerate() {
        out.push_str(graph.id_map().name(i));
        for x in row {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    out
}

fn n_label_communities(graph: &Graph) -> Option<usize> {
    graph.labels().map(|l| l.iter().max().map_or(0, |m| m + 1))
}

/// Clusters `z` and scores the result against `graph`.
fn cluster_and_score(
    z: &Matrix,
    graph: &Graph,
    spec: &ExperimentSpec,
    seed: u64,
    errors: &mut Vec<String>,
) -> Result<(CommunityAssignment, SeedResult)> {
    let (fit, k_table) = match spec.k {
        KChoice::Sweep { min, max } => {
            let sweep = sweep_k(z, graph, min..=max, spec.restarts, seed)?;
            (sweep.best, sweep.table)
        }
        KChoice::Fixed(k) => (kmeans_fit(z, k, spec.restarts, seed)?, Vec::new()),
        KChoice::Labels => {
            let k = n_label_communities(graph)
                .ok_or_else(|| Error::Config("k = labels needs a labels file; set k explicitly".into()))?;
            (kmeans_fit(z, k, spec.restarts, seed)?, Vec::new())
        }
    };
    let assignment = fit.to_assignment();
    let q = modularity_score(graph, &assignment)?;
    let (mut nmi_value, mut ac_value) = (None, None);
    match graph.labels() {
        Some(labels) => {
            let truth = CommunityAssignment::from_labels(labels.to_vec());
            nmi_value = Some(nmi(&assignment, &truth)?);
            match accuracy(&assignment, &truth) {
                Ok(ac) => ac_value = Some(ac),
                Err(e) => errors.push(format!("seed {seed}: accuracy: {e}")),
            }
        }
        None if spec.require_nmi => errors.push(Error::MissingLabels("NMI").to_string()),
        None => {}
    }
    let result = SeedResult {
        seed,
        k: assignment.k(),
        q,
        nmi: nmi_value,
        accuracy: ac_value,
        final_loss: None,
        loss_trace: Vec::new(),
        k_table,
    };
    Ok((assignment, result))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: RunReport,
    pub timings: Vec<TimingRow>,
}

fn report_shell(command: &str, spec: &ExperimentSpec, graph: &Graph, model: ModelKind) -> RunReport {
    RunReport {
        command: command.into(),
        code_version: CODE_VERSION.into(),
        spec: spec.clone(),
        model,
        n_nodes: graph.n_nodes(),
        n_edges: graph.n_edges(),
        feature_dim: graph.feature_dim(),
        synthetic: spec.synthetic_nodes.is_some(),
        untrained: false,
        seeds: Vec::new(),
        summary: Summary::from_seeds(&[]),
        errors: Vec::new(),
    }
}

fn dedup_errors(errors: &mut Vec<String>) {
    let mut seen = std::collections::HashSet::new();
    errors.retain(|e| seen.insert(e.clone()));
}

/// Trains one model per seed, clusters and scores it. With `out`, writes
/// `report.json`, `metrics.csv`, `timings.csv` and per-seed
/// `seed-<s>.ckpt`, `seed-<s>.assignment`, `seed-<s>.embedding`.
pub fn cmd_train(spec: &ExperimentSpec, out: Option<&Path>) -> Result<TrainOutcome> {
    spec.validate()?;
    let graph = spec.load_graph()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut report = report_shell("train", spec, &graph, spec.model);
    report.untrained = spec.training.epochs == 0;
    let mut timings = Vec::new();
    for &seed in &spec.seeds {
        let t = Instant::now();
        let model = TrainedModel::train(spec.model, &graph, spec.config_for(seed))?;
        timings.push(TimingRow { phase: "train".into(), seed, seconds: t.elapsed().as_secs_f64() });
        let t = Instant::now();
        let z = model.embed(&graph)?;
        let (assignment, mut result) = cluster_and_score(&z, &graph, spec, seed, &mut report.errors)?;
        timings.push(TimingRow { phase: "cluster".into(), seed, seconds: t.elapsed().as_secs_f64() });
        result.loss_trace = model.loss_trace().to_vec();
        result.final_loss = result.loss_trace.last().copied();
        if let Some(dir) = out {
            model.checkpoint(&graph).save(dir.join(format!("seed-{seed}.ckpt")))?;
            write(dir, &format!("seed-{seed}.assignment"), &assignment.to_text(graph.id_map()))?;
            write(dir, &format!("seed-{seed}.embedding"), &embedding_text(&graph, &z))?;
        }
        log::info!("seed {seed}: k {} Q {:.4} NMI {:?}", result.k, result.q, result.nmi);
        report.seeds.push(result);
    }
    dedup_errors(&mut report.errors);
    report.summary = Summary::from_seeds(&report.seeds);
    if let Some(dir) = out {
        write(dir, "report.json", &report.to_json())?;
        write(dir, "metrics.csv", &to_csv(&report.metrics_rows()))?;
        write(dir, "timings.csv", &to_csv(&timings))?;
    }
    Ok(TrainOutcome { report, timings })
}

/// Re-embeds the dataset with a saved checkpoint, clusters it per `spec.k`
/// and scores the result. With `out`, writes `report.json`, `metrics.csv`
/// and (for a `k` sweep) `sweep.csv`.
pub fn cmd_eval(spec: &ExperimentSpec, checkpoint: &Path, out: Option<&Path>) -> Result<RunReport> {
    spec.validate()?;
    let graph = spec.load_graph()?;
    let ck = Checkpoint::load(checkpoint)?;
    let model = TrainedModel::from_checkpoint(&ck, &graph)?;
    let mut report = report_shell("eval", spec, &graph, ck.kind);
    report.untrained = ck.config.epochs == 0;
    let seed = ck.config.seed;
    let z = model.embed(&graph)?;
    let (_, result) = cluster_and_score(&z, &graph, spec, seed, &mut report.errors)?;
    report.seeds.push(result);
    dedup_errors(&mut report.errors);
    report.summary = Summary::from_seeds(&report.seeds);
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(dir, "report.json", &report.to_json())?;
        write(dir, "metrics.csv", &to_csv(&report.metrics_rows()))?;
        if !report.seeds[0].k_table.is_empty() {
            write(dir, "sweep.csv", &to_csv(&report.seeds[0].k_table))?;
        }
    }
    Ok(report)
}

/// Inference variants compared by [`cmd_infer_bench`], fastest first.
pub const INFER_VARIANTS: [(&str, usize, Variant); 5] = [
    ("plain-1", 1, Variant::Plain),
    ("apam-1", 1, Variant::Attention),
    ("plain-2", 2, Variant::Plain),
    ("apam-2", 2, Variant::Attention),
    ("plain-3", 3, Variant::Plain),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferRow {
    pub seed: u64,
    pub variant: String,
    pub layers: usize,
    pub mean_latency_us: f64,
    /// `plain-3` latency divided by this variant's.
    pub speedup: f64,
    pub nmi: Option<f64>,
    /// Time to derive this variant's inference model; not part of latency.
    pub fine_tune_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferBenchReport {
    pub n_nodes: usize,
    pub n_held_out: usize,
    /// Held-out nodes without any edge into the retained graph.
    pub n_skipped: usize,
    pub synthetic: bool,
    pub rows: Vec<InferRow>,
    /// Per-variant means over seeds (`seed` is the seed count).
    pub mean: Vec<InferRow>,
}

struct Split {
    retained: Graph,
    held_out: Vec<(NewNode, Option<usize>)>,
    skipped: usize,
}

/// Node-wise uniform split; a held-out node's edges into the retained graph
/// become its stubs.
fn holdout_split(graph: &Graph, fraction: f64, seed: u64) -> Result<Split> {
    if fraction <= 0.0 {
        return Err(Error::Config("split_fraction must be positive for inference benchmarks".into()));
    }
    let n = graph.n_nodes();
    let n_held = (n as f64 * fraction).round() as usize;
    if n_held < 10 {
        return Err(Error::Config(format!("split holds out {n_held} nodes; at least 10 are needed")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "holdout-split", 0));
    let (held, keep) = order.split_at(n_held);
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let mut new_index = vec![usize::MAX; n];
    for (i, &v) in keep.iter().enumerate() {
        new_index[v] = i;
    }
    let mut held = held.to_vec();
    held.sort_unstable();
    let mut held_out = Vec::new();
    let mut skipped = 0;
    for v in held {
        let stubs: Vec<usize> =
            graph.neighbors(v).iter().map(|&u| new_index[u]).filter(|&u| u != usize::MAX).collect();
        if stubs.is_empty() {
            skipped += 1;
            continue;
        }
        let mut node = NewNode::new(stubs);
        if let Some(x) = graph.features() {
            node = node.with_features(x.row(v).to_owned());
        }
        held_out.push((node, graph.labels().map(|l| l[v])));
    }
    Ok(Split { retained: graph.induced_subgraph(&keep), held_out, skipped })
}

/// Held-out inference benchmark: trains a three-layer two-stage model on the
/// retained graph, derives 1- and 2-layer inference models from it and
/// times every variant in [`INFER_VARIANTS`] on the held-out nodes.
pub fn cmd_infer_bench(spec: &ExperimentSpec, out: Option<&Path>) -> Result<InferBenchReport> {
    spec.validate()?;
    if spec.training.layer_dims.len() != 3 {
        return Err(Error::Config("infer-bench trains a three-layer model; set layer_dims to three widths".into()));
    }
    let graph = spec.load_graph()?;
    let mut rows = Vec::new();
    let (mut n_held_out, mut n_skipped) = (0, 0);
    for &seed in &spec.seeds {
        let split = holdout_split(&graph, spec.split_fraction, seed)?;
        n_held_out = split.held_out.len() + split.skipped;
        n_skipped = split.skipped;
        let base = &split.retained;
        let config = spec.config_for(seed);
        let lr = config.learning_rate;
        let mut full = TwoStageModel::new(base, config.clone())?;
        full.fit(base, config.epochs, lr)?;

        let z3 = full.embed(base)?;
        let k = match spec.k {
            KChoice::Fixed(k) => k,
            KChoice::Labels => n_label_communities(base)
                .ok_or_else(|| Error::Config("k = labels needs labels; set k explicitly".into()))?,
            KChoice::Sweep { min, max } => sweep_k(&z3, base, min..=max, spec.restarts, seed)?.best_k,
        };
        let fit = kmeans_fit(&z3, k, spec.restarts, seed)?;
        let assignment = fit.to_assignment();

        let mut models = vec![];
        let mut centroid_sets: Vec<Matrix> = vec![];
        let mut fine_tune = vec![];
        for layers in 1..=2 {
            let t = Instant::now();
            let mut m = full.truncated(layers)?;
            m.fit(base, spec.fine_tune_epochs, lr * spec.fine_tune_lr_factor)?;
            let mut a = assignment.clone();
            a.refit_centroids(&m.embed(base)?)?;
            centroid_sets.push(a.centroids().expect("refit").clone());
            fine_tune.push(t.elapsed().as_secs_f64());
            models.push(m);
        }
        let engines = [
            InferenceEngine::new(&models[0], base, Some(&centroid_sets[0]), 1)?,
            InferenceEngine::new(&models[1], base, Some(&centroid_sets[1]), 2)?,
            InferenceEngine::new(&full, base, Some(&fit.centroids), 3)?,
        ];
        let truth: Option<Vec<usize>> = split.held_out.iter().map(|(_, l)| *l).collect();

        let mut seed_rows = Vec::new();
        for (name, layers, variant) in INFER_VARIANTS {
            let engine = &engines[layers - 1];
            for (i, (node, _)) in split.held_out.iter().take(5).enumerate() {
                engine.infer(node, variant, &mut rng::stream(seed, "infer-warmup", i as u64))?;
            }
            let mut total = 0.0;
            let mut predicted = Vec::with_capacity(split.held_out.len());
            for (i, (node, _)) in split.held_out.iter().enumerate() {
                let mut r = rng::stream(seed, "infer-node", i as u64);
                let t = Instant::now();
                let inference = engine.infer(node, variant, &mut r)?;
                total += t.elapsed().as_secs_f64();
                predicted.push(inference.community);
            }
            let nmi_value = match &truth {
                Some(t) => Some(nmi(
                    &CommunityAssignment::from_labels(predicted),
                    &CommunityAssignment::from_labels(t.clone()),
                )?),
                None => None,
            };
            seed_rows.push(InferRow {
                seed,
                variant: name.into(),
                layers,
                mean_latency_us: total / split.held_out.len() as f64 * 1e6,
                speedup: 0.0,
                nmi: nmi_value,
                fine_tune_seconds: if layers < 3 { fine_tune[layers - 1] } else { 0.0 },
            });
            log::info!("seed {seed} {name}: {:.1} us, NMI {:?}", seed_rows.last().unwrap().mean_latency_us, nmi_value);
        }
        let reference = seed_rows.last().expect("plain-3 row").mean_latency_us;
        for row in &mut seed_rows {
            row.speedup = reference / row.mean_latency_us;
        }
        rows.extend(seed_rows);
    }

    let n_seeds = spec.seeds.len() as f64;
    let mean = INFER_VARIANTS
        .iter()
        .map(|&(name, layers, _)| {
            let of: Vec<&InferRow> = rows.iter().filter(|r| r.variant == name).collect();
            let avg = |f: &dyn Fn(&InferRow) -> f64| of.iter().map(|r| f(r)).sum::<f64>() / n_seeds;
            InferRow {
                seed: spec.seeds.len() as u64,
                variant: name.into(),
                layers,
                mean_latency_us: avg(&|r| r.mean_latency_us),
                speedup: avg(&|r| r.speedup),
                nmi: of.iter().map(|r| r.nmi).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / n_seeds),
                fine_tune_seconds: avg(&|r| r.fine_tune_seconds),
            }
        })
        .collect();
    let report = InferBenchReport {
        n_nodes: graph.n_nodes(),
        n_held_out,
        n_skipped,
        synthetic: spec.synthetic_nodes.is_some(),
        rows,
        mean,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(dir, "infer_bench.json", &serde_json::to_string_pretty(&report).expect("serializes"))?;
        write(dir, "infer_bench.csv", &to_csv(&report.rows))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub n_list: Vec<usize>,
    pub average_degree: f64,
    pub kinds: Vec<ModelKind>,
    pub training: TrainingConfig,
    pub repeats: usize,
    pub graph_seed: u64,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            n_list: vec![1000, 2000, 4000, 8000],
            average_degree: 10.0,
            kinds: vec![ModelKind::TwoStage],
            training: TrainingConfig::default(),
            repeats: 3,
            graph_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub kind: ModelKind,
    pub n: usize,
    /// Median seconds per epoch over the repeats.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSlope {
    pub kind: ModelKind,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub slopes: Vec<ScalingSlope>,
}

/// Least-squares slope of `y` on `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn time_epoch(kind: ModelKind, graph: &Graph, config: &TrainingConfig, repeats: usize) -> Result<f64> {
    let mut times = Vec::with_capacity(repeats);
    let mut model = TrainedModel::train(kind, graph, TrainingConfig { epochs: 0, ..config.clone() })?;
    for epoch in 0..repeats {
        let t = Instant::now();
        match &mut model {
            TrainedModel::OneStage(m) => {
                m.step(epoch)?;
            }
            TrainedModel::TwoStage(m) => {
                m.train_epoch(graph, epoch, config.learning_rate)?;
            }
            TrainedModel::Gae(m) => {
                m.step(epoch)?;
            }
        }
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(median(&times).expect("repeats >= 1"))
}

/// Times one training epoch per `(N, kind)` on seeded planted-partition
/// graphs and fits log-log slopes.
pub fn cmd_scaling(spec: &ScalingSpec, out: Option<&Path>) -> Result<ScalingReport> {
    spec.training.validate()?;
    if spec.n_list.len() < 3 || spec.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("scaling needs at least three strictly ascending sizes".into()));
    }
    if spec.repeats == 0 || spec.kinds.is_empty() {
        return Err(Error::Config("scaling needs at least one repeat and one model kind".into()));
    }
    let mut points = Vec::new();
    for &n in &spec.n_list {
        let planted = PlantedPartition { average_degree: spec.average_degree, ..PlantedPartition::benchmark(n) };
        let graph = planted.generate(spec.graph_seed)?;
        for &kind in &spec.kinds {
            let seconds = time_epoch(kind, &graph, &spec.training, spec.repeats)?;
            log::info!("{kind} N={n}: {seconds:.4} s/epoch");
            points.push(ScalingPoint { kind, n, seconds });
        }
    }
    let slopes = spec
        .kinds
        .iter()
        .map(|&kind| {
            let (x, y): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|p| p.kind == kind)
                .map(|p| ((p.n as f64).ln(), p.seconds.ln()))
                .unzip();
            ScalingSlope { kind, slope: least_squares_slope(&x, &y) }
        })
        .collect();
    let report = ScalingReport { points, slopes };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(dir, "scaling.csv", &to_csv(&report.points))?;
        write(dir, "slopes.csv", &to_csv(&report.slopes))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub model: ModelKind,
    pub instance: usize,
    pub n_nodes: usize,
    pub feature_dim: usize,
    pub decoder: DecoderNonlinearity,
    pub report: GradCheckReport,
}

fn random_instance(index: usize, seed: u64) -> Graph {
    let mut r = rng::stream(seed, "gradcheck-graph", index as u64);
    let n = r.gen_range(4..=12);
    let mut pairs = vec![(0, 1)];
    for u in 0..n {
        for v in u + 1..n {
            if r.gen_bool(0.35) {
                pairs.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, pairs);
    if index % 2 == 1 {
        let x = Array2::from_shape_simple_fn((n, 3), || r.gen_range(-1.0..1.0));
        graph.with_features(x).expect("matching rows")
    } else {
        graph
    }
}

/// Finite-difference checks of the one-stage and two-stage losses on
/// `instances` random graphs each (N <= 12, every other one with features,
/// alternating decoders).
pub fn gradcheck_suite(instances: usize, seed: u64, tolerance: f64) -> Result<Vec<GradCheckCase>> {
    let mut cases = Vec::new();
    for i in 0..instances {
        let graph = random_instance(i, seed);
        let n = graph.n_nodes();
        let decoder = if i % 3 == 2 { DecoderNonlinearity::Tanh } else { DecoderNonlinearity::Identity };
        let config = TrainingConfig {
            layer_dims: vec![5, 3],
            seed: rng::derive_seed(seed, "gradcheck-init", i as u64),
            minibatch_size: n.min(6),
            neighbor_samples: 3,
            decoder,
            ..Default::default()
        };
        let case = |model, report| GradCheckCase {
            model,
            instance: i,
            n_nodes: n,
            feature_dim: graph.feature_dim(),
            decoder,
            report,
        };

        let one = OneStageModel::new(&graph, config.clone())?;
        let (_, grads) = one.objective()?;
        let shapes: Vec<_> = one.weights.iter().map(|w| w.w.dim()).collect();
        let params = flatten(&one.weights.iter().map(|w| w.w.clone()).collect::<Vec<_>>());
        let report = gradient_check(
            |p| {
                let m = OneStageModel::from_weights(&graph, config.clone(), unflatten(p, &shapes)).expect("shapes");
                m.objective().expect("valid model").0
            },
            &params,
            &flatten(&grads),
            tolerance,
        );
        cases.push(case(ModelKind::OneStage, report));

        let two = TwoStageModel::new(&graph, config.clone())?;
        let mut batch: Vec<usize> = (0..n).collect();
        batch.shuffle(&mut rng::stream(seed, "gradcheck-batch", i as u64));
        batch.truncate(config.minibatch_size);
        let sample_seed = rng::derive_seed(seed, "gradcheck-sample", i as u64);
        let (_, grads) = two.minibatch_objective(&graph, &batch, sample_seed)?;
        let shapes: Vec<_> = two.weights.iter().map(|w| w.w.dim()).collect();
        let params = flatten(&two.weights.iter().map(|w| w.w.clone()).collect::<Vec<_>>());
        let report = gradient_check(
            |p| {
                let m = TwoStageModel::from_weights(&graph, config.clone(), unflatten(p, &shapes)).expect("shapes");
                m.minibatch_objective(&graph, &batch, sample_seed).expect("valid model").0
            },
            &params,
            &flatten(&grads),
            tolerance,
        );
        cases.push(case(ModelKind::TwoStage, report));
    }
    Ok(cases)
}
