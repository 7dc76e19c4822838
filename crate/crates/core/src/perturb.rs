//! Structural graph perturbations.
//!
//! Three operators change only the edge set: Bernoulli edge dropping, uniform
//! addition of absent user-assertion edges, and removal of edges traversed by
//! short random walks. Nodes are never dropped.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeKind};
use crate::rng::{self, derive_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub edge_drop_graphs: usize,
    pub edge_add_graphs: usize,
    pub path_drop_graphs: usize,
    pub drop_probability: f64,
    /// Edges added per graph, as a fraction of the base edge count.
    pub add_fraction: f64,
    /// Random-walk starts per graph, as a fraction of the node count.
    pub walk_starts_fraction: f64,
    pub walk_length: usize,
    pub master_seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            edge_drop_graphs: 4,
            edge_add_graphs: 3,
            path_drop_graphs: 3,
            drop_probability: 0.1,
            add_fraction: 0.1,
            walk_starts_fraction: 0.05,
            walk_length: 5,
            master_seed: 0,
        }
    }
}

impl PerturbationConfig {
    /// `(a_e, a_m, a_p)` counts with default strengths.
    pub fn with_counts(edge_drop: usize, edge_add: usize, path_drop: usize) -> Self {
        PerturbationConfig {
            edge_drop_graphs: edge_drop,
            edge_add_graphs: edge_add,
            path_drop_graphs: path_drop,
            ..Default::default()
        }
    }

    pub fn total(&self) -> usize {
        self.edge_drop_graphs + self.edge_add_graphs + self.path_drop_graphs
    }

    pub fn validate(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::param(
                "perturbation",
                "at least one perturbed graph is required",
            ));
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::param("drop_probability", "must lie in [0, 1]"));
        }
        if !(self.add_fraction.is_finite() && self.add_fraction >= 0.0) {
            return Err(Error::param("add_fraction", "must be a finite value >= 0"));
        }
        if !(self.walk_starts_fraction.is_finite() && self.walk_starts_fraction >= 0.0) {
            return Err(Error::param(
                "walk_starts_fraction",
                "must be a finite value >= 0",
            ));
        }
        if self.walk_length == 0 {
            return Err(Error::param("walk_length", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    EdgeDrop,
    EdgeAdd,
    PathDrop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub kind: PerturbationKind,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct PerturbedGraphSet {
    pub graphs: Vec<Graph>,
    pub provenance: Vec<Provenance>,
}

impl PerturbedGraphSet {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// Keeps each edge independently with probability `1 - p`.
pub fn drop_edges(g: &Graph, p: f64, stream_seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("drop_probability", "must lie in [0, 1]"));
    }
    let mut rng = rng::stream(stream_seed);
    let kept = g
        .edges()
        .iter()
        .filter(|_| !rng.random_bool(p))
        .copied()
        .collect();
    Ok(g.with_edges(kept))
}

/// Adds exactly `k` distinct absent user-assertion edges of weight 1, sampled
/// uniformly without replacement.
pub fn add_random_edges(g: &Graph, k: usize, stream_seed: u64) -> Result<Graph> {
    if k == 0 {
        return Ok(g.clone());
    }
    let users: Vec<usize> = g.users().collect();
    let assertions: Vec<usize> = g.assertions().collect();
    let total_pairs = users.len() * assertions.len();
    let available = total_pairs - g.edge_count();
    if k > available {
        return Err(Error::NotEnoughAbsentPairs {
            requested: k,
            available,
        });
    }

    let mut rng = rng::stream(stream_seed);
    let mut edges = g.edges().to_vec();
    if g.edge_count() + k <= total_pairs / 2 {
        // Sparse regime: rejection sampling over all pairs.
        let mut added = HashSet::with_capacity(k);
        while added.len() < k {
            let pair = rng.random_range(0..total_pairs);
            let (u, a) = (
                users[pair / assertions.len()],
                assertions[pair % assertions.len()],
            );
            if !g.has_edge(u, a) && added.insert(pair) {
                edges.push(Edge::new(u, a, 1.0));
            }
        }
    } else {
        let absent: Vec<(usize, usize)> = users
            .iter()
            .flat_map(|&u| assertions.iter().map(move |&a| (u, a)))
            .filter(|&(u, a)| !g.has_edge(u, a))
            .collect();
        for i in index::sample(&mut rng, absent.len(), k) {
            let (u, a) = absent[i];
            edges.push(Edge::new(u, a, 1.0));
        }
    }
    Ok(g.with_edges(edges))
}

/// Runs `starts` random walks from uniformly chosen nodes and removes every
/// edge they traverse.
pub fn drop_paths(g: &Graph, starts: usize, walk_length: usize, stream_seed: u64) -> Result<Graph> {
    if walk_length == 0 {
        return Err(Error::param("walk_length", "must be at least 1"));
    }
    if starts == 0 || g.node_count() == 0 {
        return Ok(g.clone());
    }
    let mut rng = rng::stream(stream_seed);
    let origins: Vec<usize> = (0..starts)
        .map(|_| rng.random_range(0..g.node_count()))
        .collect();
    Ok(drop_paths_from(g, &origins, walk_length, &mut rng))
}

/// Walks are taken on the base graph; a walk stops early at an isolated node.
pub(crate) fn drop_paths_from(
    g: &Graph,
    origins: &[usize],
    walk_length: usize,
    rng: &mut impl Rng,
) -> Graph {
    let mut removed: HashSet<(usize, usize)> = HashSet::new();
    for &start in origins {
        let mut at = start;
        for _ in 0..walk_length {
            let nb = g.neighbors(at);
            if nb.is_empty() {
                break;
            }
            let next = nb[rng.random_range(0..nb.len())];
            removed.insert((at.min(next), at.max(next)));
            at = next;
        }
    }
    let kept = g
        .edges()
        .iter()
        .filter(|e| !removed.contains(&(e.u, e.v)))
        .copied()
        .collect();
    g.with_edges(kept)
}

/// Builds the perturbed set for one active-learning round: edge-drop graphs,
/// then edge-add graphs, then path-drop graphs. Graph `i` uses the stream
/// derived from `(master_seed, round, i)`.
pub fn make_perturbation_set(
    g: &Graph,
    cfg: &PerturbationConfig,
    round: u64,
) -> Result<PerturbedGraphSet> {
    cfg.validate()?;
    let plan: Vec<Provenance> =
        std::iter::repeat_n(PerturbationKind::EdgeDrop, cfg.edge_drop_graphs)
            .chain(std::iter::repeat_n(
                PerturbationKind::EdgeAdd,
                cfg.edge_add_graphs,
            ))
            .chain(std::iter::repeat_n(
                PerturbationKind::PathDrop,
                cfg.path_drop_graphs,
            ))
            .enumerate()
            .map(|(i, kind)| Provenance {
                kind,
                seed: derive_seed(cfg.master_seed, &[round, i as u64]),
            })
            .collect();

    let add_count = (cfg.add_fraction * g.edge_count() as f64).round() as usize;
    let walk_starts = (cfg.walk_starts_fraction * g.node_count() as f64).round() as usize;
    let graphs = plan
        .par_iter()
        .map(|p| match p.kind {
            PerturbationKind::EdgeDrop => drop_edges(g, cfg.drop_probability, p.seed),
            PerturbationKind::EdgeAdd => add_random_edges(g, add_count, p.seed),
            PerturbationKind::PathDrop => drop_paths(g, walk_starts, cfg.walk_length, p.seed),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbedGraphSet {
        graphs,
        provenance: plan,
    })
}

/// Counts user/assertion pairs with no edge.
pub fn absent_pair_count(g: &Graph) -> usize {
    let users = (0..g.node_count())
        .filter(|&i| g.kind(i) == NodeKind::User)
        .count();
    users * (g.node_count() - users) - g.edge_count()
}
