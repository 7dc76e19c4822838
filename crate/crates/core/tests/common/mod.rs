//! Independent reference implementations used as test oracles. None of these
//! call into the code paths they check.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{HashSet, VecDeque};

use graphal_core::{Graph, GraphBuilder, NodeKind, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random probability vector of length `k`.
pub fn random_simplex(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Generalized JSD as the mean KL divergence to the mixture.
pub fn jsd_via_kl(dists: &[Vec<f64>]) -> f64 {
    let n = dists.len() as f64;
    let k = dists[0].len();
    let mixture: Vec<f64> = (0..k)
        .map(|j| dists.iter().map(|d| d[j]).sum::<f64>() / n)
        .collect();
    dists
        .iter()
        .map(|d| {
            d.iter()
                .zip(&mixture)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &m)| p * (p / m).ln())
                .sum::<f64>()
        })
        .sum::<f64>()
        / n
}

/// Adjacency lists of a random simple graph on `n` nodes.
pub fn random_adjacency(rng: &mut impl Rng, n: usize, p: f64) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Random bipartite [`Graph`]: `users` user nodes then `assertions` assertions.
pub fn random_bipartite(rng: &mut impl Rng, users: usize, assertions: usize, p: f64) -> Graph {
    let mut b = GraphBuilder::new().class_count(2);
    for u in 0..users {
        b.add_node(format!("u{u}"), NodeKind::User, None, None)
            .unwrap();
    }
    for a in 0..assertions {
        b.add_node(
            format!("a{a}"),
            NodeKind::Assertion,
            Some(a % 2),
            Some(Split::Train),
        )
        .unwrap();
    }
    for u in 0..users {
        for a in 0..assertions {
            if rng.random_bool(p) {
                b.add_edge(u, users + a, 1.0).unwrap();
            }
        }
    }
    b.build().unwrap()
}

pub fn adjacency_of(g: &Graph) -> Vec<Vec<usize>> {
    (0..g.node_count())
        .map(|i| g.neighbors(i).to_vec())
        .collect()
}

/// Solves `(I - ρM) x = (1-ρ)/n · 1` densely, where `M` is the column-stochastic
/// random-walk matrix with dangling columns replaced by the uniform vector.
pub fn pagerank_linear_solve(adj: &[Vec<usize>], rho: f64) -> Vec<f64> {
    let n = adj.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        a[i][i] = 1.0;
        a[i][n] = (1.0 - rho) / n as f64;
    }
    for j in 0..n {
        if adj[j].is_empty() {
            for row in a.iter_mut() {
                row[j] -= rho / n as f64;
            }
        } else {
            for &i in &adj[j] {
                a[i][j] -= rho / adj[j].len() as f64;
            }
        }
    }
    gaussian_solve(a)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub fn gaussian_solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..=n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][n] - s) / a[row][row];
    }
    x
}

fn bfs_dist(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(dist[v].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    dist
}

/// Betweenness by explicitly enumerating every shortest path of every
/// unordered pair.
pub fn betweenness_brute_force(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let dists: Vec<Vec<Option<usize>>> = (0..n).map(|s| bfs_dist(adj, s)).collect();
    let mut score = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let Some(d) = dists[s][t] else { continue };
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(path) = stack.pop() {
                let last = *path.last().unwrap();
                if last == t {
                    paths.push(path);
                    continue;
                }
                for &w in &adj[last] {
                    // Stay on shortest paths: each step moves one closer to t.
                    if dists[w][t] == Some(d - path.len()) {
                        let mut next = path.clone();
                        next.push(w);
                        stack.push(next);
                    }
                }
            }
            let total = paths.len() as f64;
            for v in 0..n {
                if v != s && v != t {
                    let through = paths.iter().filter(|p| p.contains(&v)).count() as f64;
                    score[v] += through / total;
                }
            }
        }
    }
    score
}

/// All size-`b` index subsets of `0..n`, in lexicographic order.
pub fn combinations(n: usize, b: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, b: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == b {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, b, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, b, &mut Vec::new(), &mut out);
    out
}

/// Percentile by direct counting.
pub fn percentile_by_count(scores: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .map(|s| scores.iter().filter(|x| *x < s).count() as f64 / scores.len() as f64)
        .collect()
}

pub fn two_pass_variance(values: &[f64], denominator_offset: f64) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - denominator_offset)
}

/// Bipartite graph shaped like the Eurovision dataset: 537 assertions, 992
/// users and 3081 distinct edges.
pub fn eurovision_shaped(seed: u64) -> Graph {
    let (assertions, users, edges) = (537, 992, 3081);
    let mut rng = rng(seed);
    let mut b = GraphBuilder::new().class_count(2);
    for a in 0..assertions {
        let split = match a % 10 {
            0..=6 => Split::Train,
            7 => Split::Val,
            _ => Split::Test,
        };
        b.add_node(
            format!("a{a}"),
            NodeKind::Assertion,
            Some(a % 2),
            Some(split),
        )
        .unwrap();
    }
    for u in 0..users {
        b.add_node(format!("u{u}"), NodeKind::User, None, None)
            .unwrap();
    }
    let mut seen = HashSet::new();
    // Give every user one edge first so none is isolated, then fill at random.
    for u in 0..users {
        let a = rng.random_range(0..assertions);
        seen.insert((u, a));
    }
    while seen.len() < edges {
        seen.insert((rng.random_range(0..users), rng.random_range(0..assertions)));
    }
    let mut pairs: Vec<_> = seen.into_iter().collect();
    pairs.sort();
    for (u, a) in pairs {
        b.add_edge(assertions + u, a, 1.0).unwrap();
    }
    b.build().unwrap()
}
