//! Pool-based active learning.
//!
//! Every strategy shares the same protocol: seed the labeled set with
//! `initial_labeled` random candidates, then repeatedly pick
//! `min(batch_size, remaining)` pool nodes, ask the oracle for their labels and
//! move them from the pool to the labeled set until the budget is spent.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centrality::{self, CentralityConfig, Metric};
use crate::error::{Error, Result};
use crate::gcn::{self, GcnHyper, Model};
use crate::graph::{Graph, NodeKind, Split};
use crate::perturb::{make_perturbation_set, PerturbationConfig};
use crate::rng::{self, derive_seed, tag};
use crate::scoring::{self, DistributionTensor, GammaSchedule, ScoreEntry, ScoreTable};

/// How the structural signal of the perturbation strategy is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StructureSignal {
    /// Variance of centrality across the perturbed graphs.
    Sensitivity,
    /// Centrality on the unperturbed graph (ablation).
    RawCentrality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Perturbation {
        metric: Metric,
        signal: StructureSignal,
    },
    Random,
    Centrality(Metric),
    Entropy,
}

impl Strategy {
    pub const OURS_PAGERANK: Strategy = Strategy::Perturbation {
        metric: Metric::PageRank,
        signal: StructureSignal::Sensitivity,
    };
    pub const OURS_BETWEENNESS: Strategy = Strategy::Perturbation {
        metric: Metric::Betweenness,
        signal: StructureSignal::Sensitivity,
    };

    pub fn name(&self) -> String {
        match self {
            Strategy::Perturbation { metric, signal } => match signal {
                StructureSignal::Sensitivity => format!("ours-{}", metric.name()),
                StructureSignal::RawCentrality => format!("ours-{}-raw", metric.name()),
            },
            Strategy::Random => "random".into(),
            Strategy::Centrality(m) => format!("centrality-{}", m.name()),
            Strategy::Entropy => "entropy".into(),
        }
    }

    /// Centrality metric used by the strategy, if any.
    pub fn metric(&self) -> Option<Metric> {
        match self {
            Strategy::Perturbation { metric, .. } | Strategy::Centrality(metric) => Some(*metric),
            Strategy::Random | Strategy::Entropy => None,
        }
    }

    pub fn uses_perturbation(&self) -> bool {
        matches!(self, Strategy::Perturbation { .. })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let ours = |metric, signal| Strategy::Perturbation { metric, signal };
        Ok(match s {
            "ours-pagerank" => ours(Metric::PageRank, StructureSignal::Sensitivity),
            "ours-betweenness" => ours(Metric::Betweenness, StructureSignal::Sensitivity),
            "ours-pagerank-raw" => ours(Metric::PageRank, StructureSignal::RawCentrality),
            "ours-betweenness-raw" => ours(Metric::Betweenness, StructureSignal::RawCentrality),
            "random" => Strategy::Random,
            "centrality-degree" => Strategy::Centrality(Metric::Degree),
            "centrality-pagerank" => Strategy::Centrality(Metric::PageRank),
            "centrality-betweenness" => Strategy::Centrality(Metric::Betweenness),
            "entropy" => Strategy::Entropy,
            other => {
                return Err(format!(
                    "unknown strategy `{other}`; expected one of ours-pagerank, ours-betweenness, \
                     random, centrality-degree, centrality-pagerank, centrality-betweenness, entropy"
                ))
            }
        })
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlConfig {
    pub initial_labeled: usize,
    pub batch_size: usize,
    pub perturbation: PerturbationConfig,
    pub centrality: CentralityConfig,
    pub gcn: GcnHyper,
    pub schedule: GammaSchedule,
    /// When false, phase timings are recorded as zero so traces are reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            initial_labeled: 2,
            batch_size: 5,
            perturbation: PerturbationConfig::default(),
            centrality: CentralityConfig::default(),
            gcn: GcnHyper::default(),
            schedule: GammaSchedule::default(),
            record_timing: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseMs {
    pub train: f64,
    pub perturb: f64,
    pub centrality: f64,
    pub inference: f64,
    pub select: f64,
}

impl PhaseMs {
    pub fn total(&self) -> f64 {
        self.train + self.perturb + self.centrality + self.inference + self.select
    }
}

/// One line of the selection trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub queried: Vec<String>,
    /// Number of perturbed graphs built this round.
    pub perturbations: usize,
    pub phase_ms: PhaseMs,
    pub scores: Vec<ScoreEntry>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectionTrace {
    pub strategy: String,
    pub initial: Vec<String>,
    pub rounds: Vec<RoundRecord>,
}

impl SelectionTrace {
    /// All ids queried after the initial seed, in order.
    pub fn queried(&self) -> impl Iterator<Item = &str> {
        self.rounds
            .iter()
            .flat_map(|r| r.queried.iter().map(String::as_str))
    }

    pub fn total_ms(&self) -> f64 {
        self.rounds.iter().map(|r| r.phase_ms.total()).sum()
    }

    /// Writes one JSON object per round.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(text: &str) -> Result<Vec<RoundRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct AlOutcome {
    /// Final labeled set as `(node, class)` in acquisition order.
    pub labeled: Vec<(usize, usize)>,
    pub trace: SelectionTrace,
}

impl AlOutcome {
    pub fn labeled_nodes(&self) -> BTreeSet<usize> {
        self.labeled.iter().map(|&(n, _)| n).collect()
    }
}

/// Simulated oracle: reveals the stored label of a non-test assertion.
pub fn oracle_label(g: &Graph, node: usize) -> Result<usize> {
    let refuse = |reason| Error::Oracle {
        node: g.id(node).to_string(),
        reason,
    };
    if g.kind(node) != NodeKind::Assertion {
        return Err(refuse("only assertions can be labeled"));
    }
    if g.split(node) == Some(Split::Test) {
        return Err(refuse("test-split nodes are never queryable"));
    }
    g.label(node)
        .ok_or_else(|| refuse("node has no ground-truth label"))
}

/// `k` pool nodes uniformly without replacement.
pub fn baseline_random(pool: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > pool.len() {
        return Err(Error::BudgetExceedsPool {
            budget: k,
            pool: pool.len(),
        });
    }
    let mut rng = rng::stream(seed);
    Ok(index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

/// Top-`k` pool nodes by `scores` (indexed by node), ties to the smaller node.
pub fn top_k(scores: &[f64], pool: &[usize], k: usize) -> Vec<usize> {
    let mut order = pool.to_vec();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Top-`k` pool nodes by centrality on the unperturbed graph.
pub fn baseline_centrality(
    g: &Graph,
    pool: &[usize],
    k: usize,
    metric: Metric,
    cfg: &CentralityConfig,
) -> Result<Vec<usize>> {
    let scores = centrality::compute(g, metric, cfg)?;
    Ok(top_k(&scores, pool, k.min(pool.len())))
}

/// Top-`k` pool nodes by entropy of the model's prediction on the unperturbed graph.
pub fn baseline_entropy(model: &Model, g: &Graph, pool: &[usize], k: usize) -> Result<Vec<usize>> {
    let probs = gcn::predict_distributions(model, g)?;
    let mut scores = vec![0.0; g.node_count()];
    for &v in pool {
        scores[v] = scoring::entropy(probs.row(v).as_slice().expect("contiguous rows"));
    }
    Ok(top_k(&scores, pool, k.min(pool.len())))
}

struct Timer {
    enabled: bool,
}

impl Timer {
    fn time<T>(&self, slot: &mut f64, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            *slot += start.elapsed().as_secs_f64() * 1e3;
        }
        out
    }
}

/// Runs one active-learning experiment and returns the final labeled set with
/// the per-round trace. The budget counts the initial labeled nodes.
pub fn run_active_learning(
    g: &Graph,
    strategy: Strategy,
    budget: usize,
    cfg: &AlConfig,
    master_seed: u64,
) -> Result<AlOutcome> {
    if cfg.batch_size == 0 {
        return Err(Error::param("batch_size", "must be at least 1"));
    }
    if cfg.initial_labeled == 0 {
        return Err(Error::param("initial_labeled", "must be at least 1"));
    }
    if budget < cfg.initial_labeled {
        return Err(Error::param(
            "budget",
            format!(
                "budget {budget} is smaller than the {} initial labels",
                cfg.initial_labeled
            ),
        ));
    }
    cfg.gcn.validate()?;
    cfg.schedule.validate()?;
    if strategy.uses_perturbation() {
        cfg.perturbation.validate()?;
    }
    if strategy.metric() == Some(Metric::PageRank) {
        cfg.centrality.validate()?;
    }

    let full_pool = g.candidate_pool();
    if budget > full_pool.len() {
        return Err(Error::BudgetExceedsPool {
            budget,
            pool: full_pool.len(),
        });
    }
    let mut pool: BTreeSet<usize> = full_pool.iter().copied().collect();
    let mut labeled: Vec<(usize, usize)> = Vec::with_capacity(budget);
    for v in baseline_random(
        &full_pool,
        cfg.initial_labeled,
        derive_seed(master_seed, &[tag::INITIAL]),
    )? {
        labeled.push((v, oracle_label(g, v)?));
        pool.remove(&v);
    }

    let mut trace = SelectionTrace {
        strategy: strategy.name(),
        initial: labeled.iter().map(|&(v, _)| g.id(v).to_string()).collect(),
        rounds: Vec::new(),
    };
    let rounds_total = (budget - cfg.initial_labeled).div_ceil(cfg.batch_size);
    let schedule = GammaSchedule {
        total_rounds: rounds_total.max(1),
        ..cfg.schedule.clone()
    };
    let timer = Timer {
        enabled: cfg.record_timing,
    };
    // Structure-only scores of the unperturbed graph do not change between rounds.
    let mut base_scores: Option<Vec<f64>> = None;

    for t in 1..=rounds_total {
        let remaining = budget - labeled.len();
        let b = cfg.batch_size.min(remaining);
        let candidates: Vec<usize> = pool.iter().copied().collect();
        let mut phase = PhaseMs::default();
        let round_seed = t as u64;
        let hyper = GcnHyper {
            init_seed: derive_seed(master_seed, &[tag::TRAIN, round_seed]),
            ..cfg.gcn.clone()
        };

        let mut record = RoundRecord {
            round: t,
            beta: None,
            gamma: None,
            queried: Vec::new(),
            perturbations: 0,
            phase_ms: PhaseMs::default(),
            scores: Vec::new(),
        };

        let query = match strategy {
            Strategy::Random => timer.time(&mut phase.select, || {
                baseline_random(
                    &candidates,
                    b,
                    derive_seed(master_seed, &[tag::BASELINE, round_seed]),
                )
            })?,
            Strategy::Centrality(metric) => {
                if base_scores.is_none() {
                    base_scores = Some(timer.time(&mut phase.centrality, || {
                        centrality::compute(g, metric, &cfg.centrality)
                    })?);
                }
                let scores = base_scores.as_deref().expect("computed above");
                timer.time(&mut phase.select, || top_k(scores, &candidates, b))
            }
            Strategy::Entropy => {
                let model = timer.time(&mut phase.train, || gcn::train(g, &labeled, &hyper))?;
                timer.time(&mut phase.select, || {
                    baseline_entropy(&model, g, &candidates, b)
                })?
            }
            Strategy::Perturbation { metric, signal } => {
                let model = timer.time(&mut phase.train, || gcn::train(g, &labeled, &hyper))?;
                let perturb_cfg = PerturbationConfig {
                    master_seed: derive_seed(
                        master_seed,
                        &[tag::PERTURB, cfg.perturbation.master_seed],
                    ),
                    ..cfg.perturbation.clone()
                };
                let set = timer.time(&mut phase.perturb, || {
                    make_perturbation_set(g, &perturb_cfg, round_seed)
                })?;
                record.perturbations = set.len();

                let predictions = timer.time(&mut phase.inference, || {
                    set.graphs
                        .par_iter()
                        .map(|pg| gcn::predict_distributions(&model, pg))
                        .collect::<Result<Vec<_>>>()
                })?;
                let tensor = DistributionTensor::from_predictions(&candidates, &predictions)?;
                let inst = scoring::instability(&tensor)?;

                let sens = timer.time(&mut phase.centrality, || -> Result<Vec<f64>> {
                    match signal {
                        StructureSignal::Sensitivity => {
                            let per_graph = set
                                .graphs
                                .par_iter()
                                .map(|pg| centrality::compute(pg, metric, &cfg.centrality))
                                .collect::<Result<Vec<_>>>()?;
                            Ok(scoring::sensitivity(&per_graph, &candidates))
                        }
                        StructureSignal::RawCentrality => {
                            if base_scores.is_none() {
                                base_scores =
                                    Some(centrality::compute(g, metric, &cfg.centrality)?);
                            }
                            let base = base_scores.as_deref().expect("computed above");
                            Ok(candidates.iter().map(|&v| base[v]).collect())
                        }
                    }
                })?;

                let beta = schedule.beta(t);
                let gamma = scoring::sample_gamma(
                    beta,
                    derive_seed(master_seed, &[tag::GAMMA, round_seed]),
                )?;
                let ids: Vec<String> = candidates.iter().map(|&v| g.id(v).to_string()).collect();
                let (table, query) = timer.time(&mut phase.select, || -> Result<_> {
                    let table = ScoreTable::new(&candidates, &ids, &inst, &sens, gamma, beta)?;
                    let query = scoring::select_batch(&table, b)?;
                    Ok((table, query))
                })?;
                record.beta = Some(beta);
                record.gamma = Some(gamma);
                record.scores = table.entries;
                query
            }
        };

        for &v in &query {
            if !pool.remove(&v) {
                return Err(Error::param(
                    "strategy",
                    format!("selected node {} outside the pool", g.id(v)),
                ));
            }
            labeled.push((v, oracle_label(g, v)?));
        }
        record.queried = query.iter().map(|&v| g.id(v).to_string()).collect();
        record.phase_ms = phase;
        trace.rounds.push(record);
    }
    debug_assert_eq!(labeled.len(), budget);
    Ok(AlOutcome { labeled, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, GraphBuilder, SyntheticParams};

    fn graph() -> Graph {
        generate_synthetic(&SyntheticParams {
            users_per_side: 40,
            assertions_per_side: 20,
            mean_posts_per_user: 3.0,
            in_side_probability: 0.9,
            seed: 5,
        })
        .unwrap()
    }

    fn fast_cfg() -> AlConfig {
        AlConfig {
            gcn: GcnHyper {
                epochs: 30,
                ..Default::default()
            },
            record_timing: false,
            ..Default::default()
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for name in [
            "ours-pagerank",
            "ours-betweenness",
            "ours-pagerank-raw",
            "random",
            "centrality-degree",
            "centrality-pagerank",
            "centrality-betweenness",
            "entropy",
        ] {
            assert_eq!(name.parse::<Strategy>().unwrap().name(), name);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }

    #[test]
    fn oracle_protocol() {
        let g = graph();
        let train = g.candidate_pool()[0];
        assert_eq!(oracle_label(&g, train).unwrap(), g.label(train).unwrap());
        let user = g.users().next().unwrap();
        assert!(oracle_label(&g, user).is_err());
        let test = g.test_nodes()[0];
        assert!(oracle_label(&g, test).is_err());
    }

    #[test]
    fn random_baseline_cases() {
        let pool: Vec<usize> = (10..20).collect();
        let mut all = baseline_random(&pool, 10, 3).unwrap();
        all.sort();
        assert_eq!(all, pool);
        assert!(baseline_random(&pool, 0, 3).unwrap().is_empty());
        assert_eq!(
            baseline_random(&pool, 4, 9).unwrap(),
            baseline_random(&pool, 4, 9).unwrap()
        );
        assert!(baseline_random(&pool, 11, 3).is_err());
    }

    #[test]
    fn centrality_baseline_cases() {
        // Star: user hub at node 0, pool contains the hub's index deliberately.
        let mut b = GraphBuilder::new();
        b.add_node("hub", NodeKind::Assertion, Some(0), Some(Split::Train))
            .unwrap();
        for i in 0..3 {
            let u = b
                .add_node(format!("u{i}"), NodeKind::User, None, None)
                .unwrap();
            b.add_edge(0, u, 1.0).unwrap();
        }
        let g = b.build().unwrap();
        let cfg = CentralityConfig::default();
        assert_eq!(
            baseline_centrality(&g, &[0, 1, 2, 3], 1, Metric::Degree, &cfg).unwrap(),
            vec![0]
        );
        let mut all = baseline_centrality(&g, &[0, 1, 2, 3], 4, Metric::Degree, &cfg).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);

        // 4-cycle: every PageRank score is equal, so the order is by node index.
        let mut b = GraphBuilder::new();
        for i in 0..2 {
            b.add_node(
                format!("a{i}"),
                NodeKind::Assertion,
                Some(0),
                Some(Split::Train),
            )
            .unwrap();
            b.add_node(format!("u{i}"), NodeKind::User, None, None)
                .unwrap();
        }
        for (x, y) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            b.add_edge(x, y, 1.0).unwrap();
        }
        let g = b.build().unwrap();
        assert_eq!(
            baseline_centrality(&g, &[2, 0], 2, Metric::PageRank, &cfg).unwrap(),
            vec![0, 2]
        );
    }

    #[test]
    fn top_k_on_triangle_pagerank_uses_index_order() {
        let tri =
            crate::centrality::UndirectedGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let pr = crate::centrality::pagerank(&tri, &CentralityConfig::default()).unwrap();
        let rounded: Vec<f64> = pr.scores.iter().map(|s| (s * 1e9).round()).collect();
        assert_eq!(top_k(&rounded, &[2, 1, 0], 3), vec![0, 1, 2]);
    }

    #[test]
    fn entropy_baseline_prefers_uncertain_nodes() {
        let g = graph();
        let pool = g.candidate_pool();
        let model = gcn::train(
            &g,
            &[(pool[0], g.label(pool[0]).unwrap())],
            &GcnHyper {
                epochs: 20,
                ..Default::default()
            },
        )
        .unwrap();
        let probs = gcn::predict_distributions(&model, &g).unwrap();
        let picked = baseline_entropy(&model, &g, &pool, 1).unwrap()[0];
        let h = |v: usize| scoring::entropy(probs.row(v).as_slice().unwrap());
        assert!(pool.iter().all(|&v| h(v) <= h(picked)));
    }

    #[test]
    fn budget_arithmetic() {
        let g = graph();
        let out = run_active_learning(&g, Strategy::Random, 20, &fast_cfg(), 1).unwrap();
        let sizes: Vec<usize> = out.trace.rounds.iter().map(|r| r.queried.len()).collect();
        assert_eq!(sizes, vec![5, 5, 5, 3]);
        assert_eq!(out.labeled.len(), 20);
    }

    #[test]
    fn budget_equal_to_pool_exhausts_it() {
        let g = graph();
        let pool: BTreeSet<usize> = g.candidate_pool().into_iter().collect();
        let cfg = AlConfig {
            batch_size: 10,
            ..fast_cfg()
        };
        for strategy in [
            Strategy::Random,
            Strategy::Centrality(Metric::Degree),
            Strategy::OURS_PAGERANK,
        ] {
            let out = run_active_learning(&g, strategy, pool.len(), &cfg, 2).unwrap();
            assert_eq!(out.labeled_nodes(), pool);
        }
    }

    #[test]
    fn budget_errors() {
        let g = graph();
        let pool = g.candidate_pool().len();
        assert!(matches!(
            run_active_learning(&g, Strategy::Random, pool + 1, &fast_cfg(), 0),
            Err(Error::BudgetExceedsPool { .. })
        ));
        assert!(run_active_learning(&g, Strategy::Random, 1, &fast_cfg(), 0).is_err());
        let cfg = AlConfig {
            batch_size: 0,
            ..fast_cfg()
        };
        assert!(run_active_learning(&g, Strategy::Random, 10, &cfg, 0).is_err());
    }

    #[test]
    fn budget_equal_to_initial_runs_no_rounds() {
        let g = graph();
        let out = run_active_learning(&g, Strategy::OURS_PAGERANK, 2, &fast_cfg(), 0).unwrap();
        assert!(out.trace.rounds.is_empty());
        assert_eq!(out.labeled.len(), 2);
    }

    #[test]
    fn perturbation_strategy_records_scores() {
        let g = graph();
        let out = run_active_learning(&g, Strategy::OURS_BETWEENNESS, 12, &fast_cfg(), 4).unwrap();
        let pool_size = g.candidate_pool().len();
        for (i, r) in out.trace.rounds.iter().enumerate() {
            assert_eq!(r.perturbations, 10);
            assert_eq!(r.scores.len(), pool_size - 2 - 5 * i);
            let gamma = r.gamma.unwrap();
            for e in &r.scores {
                let expect = gamma * e.perc_inst + (1.0 - gamma) * e.perc_sens;
                assert!((e.combined - expect).abs() < 1e-15);
            }
        }
        let betas: Vec<f64> = out.trace.rounds.iter().map(|r| r.beta.unwrap()).collect();
        assert_eq!(betas, vec![9.0, 0.25]);
    }

    #[test]
    fn raw_signal_uses_base_centrality() {
        let g = graph();
        let strategy: Strategy = "ours-pagerank-raw".parse().unwrap();
        let out = run_active_learning(&g, strategy, 7, &fast_cfg(), 4).unwrap();
        let base = centrality::pagerank(&g, &CentralityConfig::default())
            .unwrap()
            .scores;
        let round = &out.trace.rounds[0];
        let raw: Vec<f64> = round.scores.iter().map(|e| base[e.node]).collect();
        let perc = scoring::percentile(&raw);
        for (e, p) in round.scores.iter().zip(perc) {
            assert_eq!(e.sens, base[e.node]);
            assert_eq!(e.perc_sens, p);
        }
    }

    #[test]
    fn trace_jsonl_round_trip() {
        let g = graph();
        let out = run_active_learning(&g, Strategy::OURS_PAGERANK, 7, &fast_cfg(), 4).unwrap();
        let mut buf = Vec::new();
        out.trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["round", "beta", "gamma", "queried", "phase_ms", "scores"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        let score = &first["scores"][0];
        for key in ["id", "inst", "sens", "perc_inst", "perc_sens", "combined"] {
            assert!(score.get(key).is_some(), "missing {key}");
        }
        let records = SelectionTrace::read_jsonl(&text).unwrap();
        assert_eq!(records.len(), out.trace.rounds.len());
        assert_eq!(records[0].queried, out.trace.rounds[0].queried);
    }
}
