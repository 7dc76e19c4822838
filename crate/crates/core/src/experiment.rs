//! Experiment matrices: strategies × budgets × seeds, the perturbation
//! ablation and the centrality scaling study.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::al::{
    run_active_learning, AlConfig, AlOutcome, SelectionTrace, Strategy, StructureSignal,
};
use crate::centrality::{CentralityConfig, Metric};
use crate::error::{Error, Result};
use crate::gcn::GcnHyper;
use crate::graph::{generate_synthetic, load_graph, Graph, SyntheticParams};
use crate::metrics::{self, evaluate, EvalReport};
use crate::perturb::PerturbationConfig;
use crate::rng::{derive_seed, tag};
use crate::scoring::GammaSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(default)]
    pub synthetic: Option<SyntheticParams>,
    #[serde(default)]
    pub nodes: Option<PathBuf>,
    #[serde(default)]
    pub edges: Option<PathBuf>,
}

impl DatasetConfig {
    pub fn synthetic(name: &str, params: SyntheticParams) -> Self {
        DatasetConfig {
            name: name.into(),
            synthetic: Some(params),
            nodes: None,
            edges: None,
        }
    }

    pub fn load(&self) -> Result<Graph> {
        match (&self.synthetic, &self.nodes, &self.edges) {
            (Some(p), None, None) => generate_synthetic(p),
            (None, Some(n), Some(e)) => load_graph(n, e),
            _ => Err(config_err(
                "dataset",
                "give either `synthetic` or both `nodes` and `edges`",
            )),
        }
    }
}

fn default_batch_size() -> usize {
    5
}

fn default_initial_labeled() -> usize {
    2
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_true() -> bool {
    true
}

/// One self-contained JSON experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub strategies: Vec<Strategy>,
    pub budgets: Vec<usize>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_initial_labeled")]
    pub initial_labeled: usize,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub centrality: CentralityConfig,
    #[serde(default)]
    pub gcn: GcnHyper,
    #[serde(default)]
    pub schedule: GammaSchedule,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Wall-clock columns are written as 0 when false.
    #[serde(default = "default_true")]
    pub record_timing: bool,
    #[serde(default = "default_true")]
    pub write_traces: bool,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// The default polarized benchmark: budget 20, batches of 5, ten seeds.
    pub fn default_benchmark(strategies: Vec<Strategy>) -> Self {
        ExperimentConfig {
            dataset: DatasetConfig::synthetic("polarized", SyntheticParams::default()),
            strategies,
            budgets: vec![20],
            batch_size: 5,
            initial_labeled: 2,
            perturbation: PerturbationConfig::default(),
            centrality: CentralityConfig::default(),
            gcn: GcnHyper::default(),
            schedule: GammaSchedule::default(),
            seeds: (0..10).collect(),
            output_dir: default_output_dir(),
            record_timing: true,
            write_traces: true,
        }
    }

    /// Parses and validates a config. Relative paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            config_err(&field, e.into_inner().to_string())
        })?;
        for p in [&mut cfg.dataset.nodes, &mut cfg.dataset.edges]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base_dir.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(config_err("strategies", "must not be empty"));
        }
        if self.budgets.is_empty() {
            return Err(config_err("budgets", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "must not be empty"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be at least 1"));
        }
        if self.initial_labeled == 0 {
            return Err(config_err("initial_labeled", "must be at least 1"));
        }
        if let Some(&b) = self.budgets.iter().find(|&&b| b < self.initial_labeled) {
            return Err(config_err(
                "budgets",
                format!("budget {b} is below initial_labeled"),
            ));
        }
        let nested = |section: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::InvalidParam { field, message } => {
                    config_err(&format!("{section}.{field}"), message)
                }
                other => other,
            })
        };
        if let Some(p) = &self.dataset.synthetic {
            nested("dataset.synthetic", p.validate())?;
        }
        match (
            &self.dataset.synthetic,
            &self.dataset.nodes,
            &self.dataset.edges,
        ) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            _ => {
                return Err(config_err(
                    "dataset",
                    "give either `synthetic` or both `nodes` and `edges`",
                ))
            }
        }
        nested("perturbation", self.perturbation.validate())?;
        nested("centrality", self.centrality.validate())?;
        nested("gcn", self.gcn.validate())?;
        nested("schedule", self.schedule.validate())?;
        Ok(())
    }

    pub fn al_config(&self) -> AlConfig {
        AlConfig {
            initial_labeled: self.initial_labeled,
            batch_size: self.batch_size,
            perturbation: self.perturbation.clone(),
            centrality: self.centrality.clone(),
            gcn: self.gcn.clone(),
            schedule: self.schedule.clone(),
            record_timing: self.record_timing,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads for matrix cells; 0 uses the global pool.
    pub jobs: usize,
    pub seed_offset: u64,
}

/// One row of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub strategy: String,
    pub centrality: String,
    pub budget: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub elapsed_ms: u64,
}

/// One row of `aggregate.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub strategy: String,
    pub centrality: String,
    pub budget: usize,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
    pub std_defined: bool,
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub row: ResultRow,
    pub report: EvalReport,
    pub outcome: AlOutcome,
}

#[derive(Clone, Debug)]
pub struct MatrixOutput {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<AggregateRow>,
}

/// Runs one (strategy, budget, seed) cell: active learning, then evaluation
/// of a fresh GCN trained on the final labeled set.
pub fn run_cell(
    g: &Graph,
    dataset: &str,
    strategy: Strategy,
    budget: usize,
    seed: u64,
    cfg: &AlConfig,
) -> Result<CellResult> {
    let start = Instant::now();
    let outcome = run_active_learning(g, strategy, budget, cfg, seed)?;
    let hyper = GcnHyper {
        init_seed: derive_seed(seed, &[tag::EVAL]),
        ..cfg.gcn.clone()
    };
    let report = evaluate(g, &outcome.labeled, &hyper)?;
    let elapsed_ms = if cfg.record_timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(CellResult {
        row: ResultRow {
            dataset: dataset.to_string(),
            strategy: strategy.name(),
            centrality: strategy.metric().map_or("none", Metric::name).to_string(),
            budget,
            seed,
            accuracy: report.accuracy,
            macro_f1: report.macro_f1,
            elapsed_ms,
        },
        report,
        outcome,
    })
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| config_err("jobs", e.to_string()))?;
    Ok(pool.install(f))
}

/// Runs every cell of the matrix on `g`. Output order is strategies, then
/// budgets, then seeds, independent of scheduling.
pub fn run_matrix_on(g: &Graph, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<MatrixOutput> {
    let al = cfg.al_config();
    let pool = g.candidate_pool().len();
    if let Some(&b) = cfg.budgets.iter().find(|&&b| b > pool) {
        return Err(Error::BudgetExceedsPool { budget: b, pool });
    }
    let plan: Vec<(Strategy, usize, u64)> = cfg
        .strategies
        .iter()
        .flat_map(|&s| {
            cfg.budgets.iter().flat_map(move |&b| {
                cfg.seeds
                    .iter()
                    .map(move |&seed| (s, b, seed + opts.seed_offset))
            })
        })
        .collect();
    let cells = with_jobs(opts.jobs, || {
        plan.par_iter()
            .map(|&(s, b, seed)| run_cell(g, &cfg.dataset.name, s, b, seed, &al))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut aggregates = Vec::new();
    for chunk in cells.chunks(cfg.seeds.len()) {
        let reports: Vec<EvalReport> = chunk.iter().map(|c| c.report.clone()).collect();
        let agg = metrics::aggregate(&reports)?;
        let first = &chunk[0].row;
        aggregates.push(AggregateRow {
            dataset: first.dataset.clone(),
            strategy: first.strategy.clone(),
            centrality: first.centrality.clone(),
            budget: first.budget,
            runs: agg.runs,
            accuracy_mean: agg.accuracy_mean,
            accuracy_std: agg.accuracy_std,
            macro_f1_mean: agg.macro_f1_mean,
            macro_f1_std: agg.macro_f1_std,
            std_defined: agg.std_defined,
        });
    }
    Ok(MatrixOutput { cells, aggregates })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn trace_file_name(strategy: &str, budget: usize, seed: u64) -> String {
    format!("{strategy}_B{budget}_seed{seed}.jsonl")
}

/// Writes `results.csv`, `aggregate.csv` and `traces/*.jsonl` under `out_dir`.
pub fn write_matrix(out: &MatrixOutput, out_dir: &Path, traces: bool) -> Result<()> {
    create_dir(out_dir)?;
    let rows: Vec<&ResultRow> = out.cells.iter().map(|c| &c.row).collect();
    write_csv(&out_dir.join("results.csv"), &rows)?;
    write_csv(&out_dir.join("aggregate.csv"), &out.aggregates)?;
    if traces {
        let dir = out_dir.join("traces");
        create_dir(&dir)?;
        for c in &out.cells {
            c.outcome.trace.save(dir.join(trace_file_name(
                &c.row.strategy,
                c.row.budget,
                c.row.seed,
            )))?;
        }
    }
    Ok(())
}

/// Loads the dataset, runs the matrix and writes all outputs to `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<MatrixOutput> {
    let g = cfg.dataset.load()?;
    let out = run_matrix_on(&g, cfg, opts)?;
    write_matrix(&out, out_dir, cfg.write_traces)?;
    Ok(out)
}

/// One ablation arm.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationVariant {
    pub name: &'static str,
    pub counts: (usize, usize, usize),
    pub signal: StructureSignal,
}

/// Raw centrality with ten perturbed graphs, then sensitivity with 5, 10 and 15 graphs.
pub fn ablation_variants() -> Vec<AblationVariant> {
    vec![
        AblationVariant {
            name: "raw-10",
            counts: (4, 3, 3),
            signal: StructureSignal::RawCentrality,
        },
        AblationVariant {
            name: "perturb-5",
            counts: (2, 2, 1),
            signal: StructureSignal::Sensitivity,
        },
        AblationVariant {
            name: "perturb-10",
            counts: (4, 3, 3),
            signal: StructureSignal::Sensitivity,
        },
        AblationVariant {
            name: "perturb-15",
            counts: (6, 5, 4),
            signal: StructureSignal::Sensitivity,
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub perturbed_graphs: usize,
    #[serde(flatten)]
    pub aggregate: AggregateRow,
}

/// Runs every ablation variant for the perturbation strategies in `cfg`;
/// each variant gets its own results block under `out_dir/<variant>/` and a
/// combined `ablation.csv` summarizes all of them.
pub fn run_ablation(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<Vec<AblationRow>> {
    let metrics: Vec<Metric> = cfg
        .strategies
        .iter()
        .filter_map(|s| match s {
            Strategy::Perturbation { metric, .. } => Some(*metric),
            _ => None,
        })
        .fold(Vec::new(), |mut acc, m| {
            if !acc.contains(&m) {
                acc.push(m);
            }
            acc
        });
    if metrics.is_empty() {
        return Err(config_err(
            "strategies",
            "ablation needs at least one ours-* strategy",
        ));
    }
    let g = cfg.dataset.load()?;
    create_dir(out_dir)?;
    let mut rows = Vec::new();
    for variant in ablation_variants() {
        let (e, m, p) = variant.counts;
        let variant_cfg = ExperimentConfig {
            strategies: metrics
                .iter()
                .map(|&metric| Strategy::Perturbation {
                    metric,
                    signal: variant.signal,
                })
                .collect(),
            perturbation: PerturbationConfig {
                edge_drop_graphs: e,
                edge_add_graphs: m,
                path_drop_graphs: p,
                ..cfg.perturbation.clone()
            },
            ..cfg.clone()
        };
        let out = run_matrix_on(&g, &variant_cfg, opts)?;
        write_matrix(&out, &out_dir.join(variant.name), cfg.write_traces)?;
        rows.extend(out.aggregates.into_iter().map(|a| AblationRow {
            variant: variant.name.into(),
            perturbed_graphs: e + m + p,
            aggregate: a,
        }));
    }
    write_ablation_csv(&out_dir.join("ablation.csv"), &rows)?;
    Ok(rows)
}

fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    // csv cannot serialize flattened structs, so write the header by hand.
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "variant",
        "perturbed_graphs",
        "dataset",
        "strategy",
        "centrality",
        "budget",
        "runs",
        "accuracy_mean",
        "accuracy_std",
        "macro_f1_mean",
        "macro_f1_std",
        "std_defined",
    ])?;
    for r in rows {
        let a = &r.aggregate;
        w.write_record([
            r.variant.clone(),
            r.perturbed_graphs.to_string(),
            a.dataset.clone(),
            a.strategy.clone(),
            a.centrality.clone(),
            a.budget.to_string(),
            a.runs.to_string(),
            a.accuracy_mean.to_string(),
            a.accuracy_std.to_string(),
            a.macro_f1_mean.to_string(),
            a.macro_f1_std.to_string(),
            a.std_defined.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Synthetic graph with roughly `edges` edges for the scaling study.
pub fn scaling_params(edges: usize, seed: u64) -> SyntheticParams {
    const POSTS: f64 = 16.0;
    let users_per_side = ((edges as f64 / (2.0 * POSTS)).round() as usize).max(1);
    SyntheticParams {
        users_per_side,
        assertions_per_side: (users_per_side / 8).max(20),
        mean_posts_per_user: POSTS,
        in_side_probability: 0.9,
        seed,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub edges: usize,
    pub total_selection_time_ms: f64,
}

#[derive(Clone, Debug)]
pub struct ScalingOptions {
    pub budget: usize,
    pub al: AlConfig,
    pub seed: u64,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            budget: 20,
            al: AlConfig::default(),
            seed: 0,
        }
    }
}

/// Wall-clock time of a full budgeted selection with the perturbation
/// strategy for `metric`, on synthetic graphs of increasing size.
pub fn run_scaling(
    sizes: &[usize],
    metric: Metric,
    opts: &ScalingOptions,
) -> Result<Vec<ScalingRow>> {
    if sizes.len() < 2 {
        return Err(config_err("sizes", "at least two sizes are required"));
    }
    if metric == Metric::Degree {
        return Err(config_err(
            "metric",
            "scaling compares pagerank and betweenness",
        ));
    }
    let strategy = Strategy::Perturbation {
        metric,
        signal: StructureSignal::Sensitivity,
    };
    sizes
        .iter()
        .map(|&size| {
            let g = generate_synthetic(&scaling_params(size, opts.seed))?;
            Ok(ScalingRow {
                edges: g.edge_count(),
                total_selection_time_ms: time_selection(&g, strategy, opts)?.0,
            })
        })
        .collect()
}

/// Times one selection run on `g`, returning milliseconds and the trace.
pub fn time_selection(
    g: &Graph,
    strategy: Strategy,
    opts: &ScalingOptions,
) -> Result<(f64, SelectionTrace)> {
    let start = Instant::now();
    let out = run_active_learning(g, strategy, opts.budget, &opts.al, opts.seed)?;
    Ok((start.elapsed().as_secs_f64() * 1e3, out.trace))
}

pub fn write_scaling_csv(path: &Path, rows: &[ScalingRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_csv(path, rows)
}
