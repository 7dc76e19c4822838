//! Node centrality on unweighted graphs.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub use crate::graph::degree_vector;

/// Read-only undirected adjacency, so the metrics also run on general
/// (non-bipartite) graphs.
pub trait Topology: Sync {
    fn node_count(&self) -> usize;
    /// Neighbors of `node`, without duplicates or self-loops.
    fn neighbors(&self, node: usize) -> &[usize];
    fn degree(&self, node: usize) -> usize {
        self.neighbors(node).len()
    }
}

impl Topology for Graph {
    fn node_count(&self) -> usize {
        Graph::node_count(self)
    }

    fn neighbors(&self, node: usize) -> &[usize] {
        Graph::neighbors(self, node)
    }
}

/// A plain simple undirected graph.
#[derive(Clone, Debug, PartialEq)]
pub struct UndirectedGraph {
    adjacency: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    /// Builds from an edge list; self-loops and duplicate edges are ignored.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(UndirectedGraph { adjacency })
    }
}

impl Topology for UndirectedGraph {
    fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    PageRank,
    Betweenness,
    Degree,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::PageRank => "pagerank",
            Metric::Betweenness => "betweenness",
            Metric::Degree => "degree",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CentralityConfig {
    pub damping: f64,
    /// L1 change between iterates below which PageRank stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CentralityConfig {
    fn default() -> Self {
        CentralityConfig {
            damping: 0.85,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

impl CentralityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::param("damping", "must lie in (0, 1)"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PageRank {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// PageRank by power iteration.
///
/// Mass held by degree-0 nodes is spread uniformly over all nodes, so the
/// result stays a probability vector.
pub fn pagerank<G: Topology + ?Sized>(g: &G, cfg: &CentralityConfig) -> Result<PageRank> {
    cfg.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Empty("pagerank needs at least one node"));
    }
    let rho = cfg.damping;
    let inv_n = 1.0 / n as f64;
    let inv_degree: Vec<f64> = (0..n)
        .map(|i| match g.degree(i) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect();

    let mut rank = vec![inv_n; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| g.degree(i) == 0).map(|i| rank[i]).sum();
        let base = (1.0 - rho) * inv_n + rho * dangling * inv_n;
        for (i, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = g
                .neighbors(i)
                .iter()
                .map(|&j| rank[j] * inv_degree[j])
                .sum();
            *slot = base + rho * inflow;
        }
        // Renormalize away accumulated rounding so the sum stays at 1.
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(PageRank {
        scores: rank,
        iterations,
        converged,
    })
}

// Sources are split into a fixed number of chunks so the floating-point
// reduction order does not depend on the thread count.
const BRANDES_CHUNKS: usize = 64;

/// Unnormalized betweenness over unordered endpoint pairs (Brandes).
pub fn betweenness<G: Topology + ?Sized>(g: &G) -> Vec<f64> {
    let n = g.node_count();
    if n < 3 {
        return vec![0.0; n];
    }
    let chunk = n.div_ceil(BRANDES_CHUNKS);
    let partials: Vec<Vec<f64>> = (0..n)
        .step_by(chunk)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|lo| {
            let mut acc = vec![0.0; n];
            let mut work = BrandesWork::new(n);
            for s in lo..(lo + chunk).min(n) {
                work.accumulate(g, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    // Each unordered pair was counted from both endpoints.
    total.iter_mut().for_each(|x| *x *= 0.5);
    total
}

struct BrandesWork {
    dist: Vec<u32>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
    /// Shortest-path DAG edges `(v, w)` with `dist[w] = dist[v] + 1`, in discovery order.
    dag: Vec<(u32, u32)>,
}

const UNSEEN: u32 = u32::MAX;

impl BrandesWork {
    fn new(n: usize) -> Self {
        BrandesWork {
            dist: vec![UNSEEN; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
            dag: Vec::new(),
        }
    }

    fn accumulate<G: Topology + ?Sized>(&mut self, g: &G, s: usize, acc: &mut [f64]) {
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            let next = self.dist[v] + 1;
            let sv = self.sigma[v];
            for &w in g.neighbors(v) {
                if self.dist[w] == UNSEEN {
                    self.dist[w] = next;
                    self.queue.push_back(w);
                }
                if self.dist[w] == next {
                    self.sigma[w] += sv;
                    self.dag.push((v as u32, w as u32));
                }
            }
        }
        // Reverse discovery order finalizes delta[w] before any edge into w is used.
        for &(v, w) in self.dag.iter().rev() {
            let (v, w) = (v as usize, w as usize);
            self.delta[v] += self.sigma[v] / self.sigma[w] * (1.0 + self.delta[w]);
        }
        for &v in &self.order {
            if v != s {
                acc[v] += self.delta[v];
            }
            self.dist[v] = UNSEEN;
            self.sigma[v] = 0.0;
            self.delta[v] = 0.0;
        }
        self.order.clear();
        self.dag.clear();
    }
}

/// Centrality vector for `metric`. PageRank non-convergence is not an error here.
pub fn compute(g: &Graph, metric: Metric, cfg: &CentralityConfig) -> Result<Vec<f64>> {
    match metric {
        Metric::PageRank => pagerank(g, cfg).map(|pr| pr.scores),
        Metric::Betweenness => Ok(betweenness(g)),
        Metric::Degree => Ok(degree_vector(g)),
    }
}
