//! Perturbation-based active learning for semi-supervised node classification
//! on bipartite user/assertion graphs.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: immutable bipartite graphs, file IO and a synthetic polarized generator
//! - [`perturb`]: edge dropping, random edge addition and random-walk path dropping
//! - [`centrality`]: PageRank, Brandes betweenness and degree
//! - [`gcn`]: a two-layer graph convolutional classifier trained with Adam
//! - [`scoring`]: instability (generalized JSD), sensitivity, percentile fusion, batch selection
//! - [`al`]: the active-learning loop and baseline strategies
//! - [`metrics`]: accuracy / macro-F1 evaluation and aggregation
//! - [`experiment`]: experiment matrices, ablation and the centrality scaling study

pub mod al;
pub mod centrality;
pub mod experiment;
pub mod gcn;
pub mod graph;
pub mod metrics;
pub mod perturb;
pub mod rng;
pub mod scoring;

mod error;

pub use al::{
    baseline_centrality, baseline_entropy, baseline_random, oracle_label, run_active_learning,
    AlConfig, AlOutcome, RoundRecord, SelectionTrace, Strategy,
};
pub use centrality::{betweenness, degree_vector, pagerank, CentralityConfig, Metric, PageRank};
pub use error::{Error, Result};
pub use gcn::{GcnHyper, Model, NormalizedAdjacency};
pub use graph::{
    generate_synthetic, load_graph, save_graph, Features, Graph, GraphBuilder, NodeKind, Split,
    SyntheticParams,
};
pub use metrics::{aggregate, evaluate, Aggregate, EvalReport};
pub use perturb::{make_perturbation_set, PerturbationConfig, PerturbationKind, PerturbedGraphSet};
pub use scoring::{DistributionTensor, GammaSchedule, ScoreEntry, ScoreTable};
