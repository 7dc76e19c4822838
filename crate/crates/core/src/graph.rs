//! Bipartite user/assertion graphs.
//!
//! A [`Graph`] is immutable once built. Node metadata (ids, kinds, labels,
//! splits, features) lives behind an `Arc` so perturbed variants share it with
//! their base graph and only carry their own edge set.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    User,
    Assertion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Node feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Features {
    /// `X = I`, so the feature width equals the node count.
    Identity,
    /// Row-major `n × width` matrix.
    Dense { width: usize, data: Vec<f64> },
}

impl Features {
    pub fn width(&self, node_count: usize) -> usize {
        match self {
            Features::Identity => node_count,
            Features::Dense { width, .. } => *width,
        }
    }
}

/// An undirected edge stored with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, weight: f64) -> Self {
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        Edge { u, v, weight }
    }
}

#[derive(Debug, PartialEq)]
struct NodeTable {
    ids: Vec<String>,
    kinds: Vec<NodeKind>,
    labels: Vec<Option<usize>>,
    splits: Vec<Option<Split>>,
    class_count: usize,
    features: Features,
}

#[derive(Clone, Debug)]
pub struct Graph {
    nodes: Arc<NodeTable>,
    index: Arc<HashMap<String, usize>>,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Graph {
    fn from_parts(
        nodes: Arc<NodeTable>,
        index: Arc<HashMap<String, usize>>,
        mut edges: Vec<Edge>,
    ) -> Self {
        edges.sort_by_key(|e| (e.u, e.v));
        edges.dedup_by(|b, a| a.u == b.u && a.v == b.v);

        let n = nodes.ids.len();
        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.u] += 1;
            degree[e.v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for e in &edges {
            neighbors[cursor[e.u]] = e.v;
            weights[cursor[e.u]] = e.weight;
            cursor[e.u] += 1;
            neighbors[cursor[e.v]] = e.u;
            weights[cursor[e.v]] = e.weight;
            cursor[e.v] += 1;
        }
        for i in 0..n {
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            let mut pairs: Vec<(usize, f64)> = neighbors[lo..hi]
                .iter()
                .copied()
                .zip(weights[lo..hi].iter().copied())
                .collect();
            pairs.sort_by_key(|p| p.0);
            for (k, (nb, w)) in pairs.into_iter().enumerate() {
                neighbors[lo + k] = nb;
                weights[lo + k] = w;
            }
        }

        Graph {
            nodes,
            index,
            edges,
            offsets,
            neighbors,
            weights,
        }
    }

    /// Builds a graph with the same nodes as `self` and the given edges.
    ///
    /// Edges must reference existing nodes and connect a user to an assertion;
    /// duplicates are collapsed.
    pub(crate) fn with_edges(&self, edges: Vec<Edge>) -> Graph {
        debug_assert!(edges
            .iter()
            .all(|e| e.u < e.v && e.v < self.node_count() && self.kind(e.u) != self.kind(e.v)));
        Graph::from_parts(Arc::clone(&self.nodes), Arc::clone(&self.index), edges)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.ids.len()
    }

    pub fn class_count(&self) -> usize {
        self.nodes.class_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn id(&self, node: usize) -> &str {
        &self.nodes.ids[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.nodes.kinds[node]
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.nodes.labels[node]
    }

    pub fn split(&self, node: usize) -> Option<Split> {
        self.nodes.splits[node]
    }

    pub fn features(&self) -> &Features {
        &self.nodes.features
    }

    pub fn feature_width(&self) -> usize {
        self.nodes.features.width(self.node_count())
    }

    /// Sorted neighbor list of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Edge weights aligned with [`Graph::neighbors`].
    pub fn neighbor_weights(&self, node: usize) -> &[f64] {
        &self.weights[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Unweighted degree.
    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn is_weighted(&self) -> bool {
        self.edges.iter().any(|e| e.weight != 1.0)
    }

    /// True when both graphs share the same node metadata.
    pub fn same_nodes(&self, other: &Graph) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes == other.nodes
    }

    pub fn users(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&i| self.kind(i) == NodeKind::User)
    }

    pub fn assertions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&i| self.kind(i) == NodeKind::Assertion)
    }

    /// Labeled train-split assertions, in node order.
    pub fn candidate_pool(&self) -> Vec<usize> {
        self.assertions()
            .filter(|&i| self.split(i) == Some(Split::Train) && self.label(i).is_some())
            .collect()
    }

    /// Labeled test-split assertions, in node order.
    pub fn test_nodes(&self) -> Vec<usize> {
        self.assertions()
            .filter(|&i| self.split(i) == Some(Split::Test) && self.label(i).is_some())
            .collect()
    }

    pub fn average_degree(&self) -> f64 {
        if self.node_count() == 0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }
}

/// Incremental constructor enforcing the graph invariants.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    ids: Vec<String>,
    kinds: Vec<NodeKind>,
    labels: Vec<Option<usize>>,
    splits: Vec<Option<Split>>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    class_count: Option<usize>,
    features: Option<Features>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fixes the class count instead of inferring it from the largest label.
    pub fn class_count(mut self, c: usize) -> Self {
        self.class_count = Some(c);
        self
    }

    pub fn features(mut self, features: Features) -> Self {
        self.features = Some(features);
        self
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn add_node(
        &mut self,
        id: impl Into<String>,
        kind: NodeKind,
        label: Option<usize>,
        split: Option<Split>,
    ) -> Result<usize> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(Error::InvalidGraph(format!("duplicate node id `{id}`")));
        }
        let idx = self.ids.len();
        self.index.insert(id.clone(), idx);
        self.ids.push(id);
        self.kinds.push(kind);
        self.labels.push(label);
        self.splits.push(split);
        Ok(idx)
    }

    pub fn add_edge(&mut self, a: usize, b: usize, weight: f64) -> Result<()> {
        let n = self.ids.len();
        if a >= n || b >= n {
            return Err(Error::InvalidGraph(format!(
                "edge ({a}, {b}) references a node out of range"
            )));
        }
        if a == b {
            return Err(Error::InvalidGraph(format!(
                "self-loop on `{}`",
                self.ids[a]
            )));
        }
        if self.kinds[a] == self.kinds[b] {
            return Err(Error::InvalidGraph(format!(
                "edge ({}, {}) connects two {:?} nodes",
                self.ids[a], self.ids[b], self.kinds[a]
            )));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidGraph(format!(
                "edge weight {weight} must be positive and finite"
            )));
        }
        self.edges.push(Edge::new(a, b, weight));
        Ok(())
    }

    pub fn add_edge_by_id(&mut self, a: &str, b: &str, weight: f64) -> Result<()> {
        let lookup = |id: &str| {
            self.index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidGraph(format!("edge references unknown node `{id}`")))
        };
        let (a, b) = (lookup(a)?, lookup(b)?);
        self.add_edge(a, b, weight)
    }

    pub fn build(self) -> Result<Graph> {
        let max_label = self.labels.iter().flatten().max().copied();
        let class_count = match self.class_count {
            Some(c) => {
                if let Some(m) = max_label.filter(|&m| m >= c) {
                    return Err(Error::InvalidGraph(format!(
                        "label {m} out of range for {c} classes"
                    )));
                }
                c
            }
            None => max_label.map_or(1, |m| m + 1),
        };
        let features = self.features.unwrap_or(Features::Identity);
        if let Features::Dense { width, data } = &features {
            if data.len() != width * self.ids.len() {
                return Err(Error::DimensionMismatch(format!(
                    "feature matrix has {} entries, expected {} x {width}",
                    data.len(),
                    self.ids.len()
                )));
            }
        }
        let nodes = NodeTable {
            ids: self.ids,
            kinds: self.kinds,
            labels: self.labels,
            splits: self.splits,
            class_count,
            features,
        };
        Ok(Graph::from_parts(
            Arc::new(nodes),
            Arc::new(self.index),
            self.edges,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    kind: NodeKind,
    label: Option<i64>,
    split: Option<Split>,
}

/// Reads a graph from a JSON Lines node file and a `src,dst,weight` CSV edge file.
pub fn load_graph(nodes_path: impl AsRef<Path>, edges_path: impl AsRef<Path>) -> Result<Graph> {
    let nodes_path = nodes_path.as_ref();
    let edges_path = edges_path.as_ref();
    let mut builder = GraphBuilder::new();

    let file = File::open(nodes_path).map_err(|e| Error::io(nodes_path, e))?;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(nodes_path, e))?;
        let parse_err = |message: String| Error::Parse {
            path: nodes_path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        if line.trim().is_empty() {
            continue;
        }
        let rec: NodeRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let label = match rec.label {
            Some(l) if l < 0 => return Err(parse_err(format!("label {l} out of range"))),
            Some(l) => Some(l as usize),
            None => None,
        };
        builder
            .add_node(rec.id, rec.kind, label, rec.split)
            .map_err(|e| parse_err(e.to_string()))?;
    }

    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(edges_path)
        .map_err(|e| Error::Parse {
            path: edges_path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
    let header_ok = reader
        .headers()
        .map(|h| {
            h.get(0) == Some("src")
                && h.get(1) == Some("dst")
                && h.get(2).is_none_or(|w| w == "weight")
        })
        .unwrap_or(false);
    if !header_ok {
        return Err(Error::Parse {
            path: edges_path.to_path_buf(),
            line: 1,
            message: "expected header `src,dst,weight`".into(),
        });
    }
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: edges_path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse {
            path: edges_path.to_path_buf(),
            line,
            message,
        };
        if record.len() < 2 || record.len() > 3 {
            return Err(parse_err(format!(
                "expected 2 or 3 fields, found {}",
                record.len()
            )));
        }
        let weight = match record.get(2) {
            None | Some("") => 1.0,
            Some(w) => w
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad weight `{w}`: {e}")))?,
        };
        builder
            .add_edge_by_id(&record[0], &record[1], weight)
            .map_err(|e| parse_err(e.to_string()))?;
    }

    builder.build()
}

/// Writes `g` in the formats read by [`load_graph`].
pub fn save_graph(
    g: &Graph,
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
) -> Result<()> {
    let nodes_path = nodes_path.as_ref();
    let edges_path = edges_path.as_ref();
    let file = File::create(nodes_path).map_err(|e| Error::io(nodes_path, e))?;
    let mut out = BufWriter::new(file);
    for i in 0..g.node_count() {
        let rec = NodeRecord {
            id: g.id(i).to_string(),
            kind: g.kind(i),
            label: g.label(i).map(|l| l as i64),
            split: g.split(i),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::io(nodes_path, e))?;
    }
    out.flush().map_err(|e| Error::io(nodes_path, e))?;

    let mut writer = csv::Writer::from_path(edges_path)?;
    writer.write_record(["src", "dst", "weight"])?;
    for e in g.edges() {
        writer.write_record([g.id(e.u), g.id(e.v), &e.weight.to_string()])?;
    }
    writer.flush().map_err(|e| Error::io(edges_path, e))?;
    Ok(())
}

/// Per-node degree; sums edge weights, so unweighted graphs get plain degree.
pub fn degree_vector(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|i| g.neighbor_weights(i).iter().sum())
        .collect()
}

/// Parameters of the two-community polarized generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    pub users_per_side: usize,
    pub assertions_per_side: usize,
    /// Mean number of distinct assertions a user posts (at least 1).
    pub mean_posts_per_user: f64,
    pub in_side_probability: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            users_per_side: 400,
            assertions_per_side: 250,
            mean_posts_per_user: 4.0,
            in_side_probability: 0.9,
            seed: 7,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.users_per_side == 0 {
            return Err(Error::param("users_per_side", "must be at least 1"));
        }
        if self.assertions_per_side == 0 {
            return Err(Error::param("assertions_per_side", "must be at least 1"));
        }
        if !(self.mean_posts_per_user.is_finite() && self.mean_posts_per_user >= 1.0) {
            return Err(Error::param(
                "mean_posts_per_user",
                "must be a finite value >= 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.in_side_probability) {
            return Err(Error::param("in_side_probability", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Generates a polarized bipartite graph with two sides.
///
/// Assertions `a0..` come first (side 0 then side 1), followed by users
/// `u0..`. Assertion labels equal their side; users are unlabeled. Each user
/// posts `1 + Poisson(mean - 1)` distinct assertions, each drawn from the
/// user's own side with probability `in_side_probability`.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<Graph> {
    params.validate()?;
    let mut rng = rng::stream(params.seed);
    let per_side = params.assertions_per_side;
    let total_assertions = 2 * per_side;

    let mut split_order: Vec<usize> = (0..total_assertions).collect();
    split_order.shuffle(&mut rng);
    let n_train = total_assertions * 7 / 10;
    let n_val = total_assertions / 10;
    let mut splits = vec![Split::Test; total_assertions];
    for (rank, &a) in split_order.iter().enumerate() {
        splits[a] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let mut builder = GraphBuilder::new().class_count(2);
    for (a, &split) in splits.iter().enumerate() {
        builder.add_node(
            format!("a{a}"),
            NodeKind::Assertion,
            Some(a / per_side),
            Some(split),
        )?;
    }
    let user_base = total_assertions;
    for u in 0..2 * params.users_per_side {
        builder.add_node(format!("u{u}"), NodeKind::User, None, None)?;
    }

    let extra = params.mean_posts_per_user - 1.0;
    let poisson = (extra > 0.0)
        .then(|| {
            Poisson::new(extra).map_err(|e| Error::param("mean_posts_per_user", e.to_string()))
        })
        .transpose()?;
    let mut taken = vec![false; total_assertions];
    for u in 0..2 * params.users_per_side {
        let side = u / params.users_per_side;
        let extra_posts = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        let k = (1 + extra_posts).min(total_assertions);
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        let mut per_side_taken = [0usize; 2];
        while chosen.len() < k {
            let mut target_side = if rng.random::<f64>() < params.in_side_probability {
                side
            } else {
                1 - side
            };
            if per_side_taken[target_side] == per_side {
                target_side = 1 - target_side;
            }
            let a = target_side * per_side + rng.random_range(0..per_side);
            if !taken[a] {
                taken[a] = true;
                per_side_taken[target_side] += 1;
                chosen.push(a);
            }
        }
        for &a in &chosen {
            taken[a] = false;
            builder.add_edge(user_base + u, a, 1.0)?;
        }
    }
    builder.build()
}
