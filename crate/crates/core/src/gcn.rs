//! Two-layer graph convolutional classifier.
//!
//! Forward pass: `softmax(Â · relu(Â · X · W1) · W2 · W3 + b)` where
//! `Â = D̃^-1/2 (A + I) D̃^-1/2`. The 32→16 convolution stack is followed by a
//! linear head producing one logit per class. Training minimizes the mean
//! cross-entropy over labeled nodes with full-batch Adam and coupled L2 decay.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Features, Graph};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GcnHyper {
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub init_seed: u64,
}

impl Default for GcnHyper {
    fn default() -> Self {
        GcnHyper {
            hidden_dim: 32,
            embed_dim: 16,
            learning_rate: 0.02,
            weight_decay: 0.005,
            epochs: 200,
            init_seed: 0,
        }
    }
}

impl GcnHyper {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::param("hidden_dim", "must be at least 1"));
        }
        if self.embed_dim == 0 {
            return Err(Error::param("embed_dim", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::param("weight_decay", "must be >= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be at least 1"));
        }
        Ok(())
    }
}

/// Symmetrically normalized adjacency with self-loops, in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(g: &Graph) -> Self {
        let n = g.node_count();
        let degree: Vec<f64> = (0..n)
            .map(|i| 1.0 + g.neighbor_weights(i).iter().sum::<f64>())
            .collect();
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut columns = Vec::with_capacity(n + 2 * g.edge_count());
        let mut values = Vec::with_capacity(n + 2 * g.edge_count());
        offsets.push(0);
        for i in 0..n {
            let mut row: Vec<(usize, f64)> = g
                .neighbors(i)
                .iter()
                .zip(g.neighbor_weights(i))
                .map(|(&j, &w)| (j, w * inv_sqrt[i] * inv_sqrt[j]))
                .collect();
            row.push((i, inv_sqrt[i] * inv_sqrt[i]));
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                columns.push(j);
                values.push(v);
            }
            offsets.push(columns.len());
        }
        NormalizedAdjacency {
            offsets,
            columns,
            values,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Entry `(i, j)`; zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = self.offsets[i]..self.offsets[i + 1];
        self.columns[row.clone()]
            .binary_search(&j)
            .map_or(0.0, |k| self.values[row.start + k])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.node_count();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for k in self.offsets[i]..self.offsets[i + 1] {
                out[[i, self.columns[k]]] = self.values[k];
            }
        }
        out
    }

    /// `Â · m`. `Â` is symmetric, so this also computes `Âᵀ · m`.
    pub fn matmul(&self, m: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.node_count(), m.ncols()));
        for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            for k in self.offsets[i]..self.offsets[i + 1] {
                row.scaled_add(self.values[k], &m.row(self.columns[k]));
            }
        }
        out
    }
}

/// Trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

impl Params {
    fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
    }

    pub fn init(feature_width: usize, classes: usize, hyper: &GcnHyper) -> Self {
        let mut rng = rng::stream(hyper.init_seed);
        Params {
            w1: Self::glorot(feature_width, hyper.hidden_dim, &mut rng),
            w2: Self::glorot(hyper.hidden_dim, hyper.embed_dim, &mut rng),
            w3: Self::glorot(hyper.embed_dim, classes, &mut rng),
            b3: Array1::zeros(classes),
        }
    }

    fn blocks(&self) -> [(&'static str, &[usize], &[f64]); 4] {
        [
            ("w1", self.w1.shape(), self.w1.as_slice().unwrap()),
            ("w2", self.w2.shape(), self.w2.as_slice().unwrap()),
            ("w3", self.w3.shape(), self.w3.as_slice().unwrap()),
            ("b3", self.b3.shape(), self.b3.as_slice().unwrap()),
        ]
    }

    fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.w3.as_slice_mut().unwrap(),
            self.b3.as_slice_mut().unwrap(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|(_, _, d)| d.iter().all(|x| x.is_finite()))
    }
}

/// Intermediate activations kept for backpropagation.
struct Forward {
    z1: Array2<f64>,
    h1: Array2<f64>,
    z2: Array2<f64>,
    probs: Array2<f64>,
}

fn first_layer_input(features: &Features, w1: &Array2<f64>) -> Array2<f64> {
    match features {
        // X = I: X · W1 is W1 itself.
        Features::Identity => w1.clone(),
        Features::Dense { width, data } => {
            let x = ArrayView2::from_shape((data.len() / width, *width), data)
                .expect("validated at build");
            x.dot(w1)
        }
    }
}

fn forward(adj: &NormalizedAdjacency, features: &Features, p: &Params) -> Forward {
    let xw = first_layer_input(features, &p.w1);
    let z1 = adj.matmul(xw.view());
    let h1 = z1.mapv(|v| v.max(0.0));
    let z2 = adj.matmul(h1.dot(&p.w2).view());
    let mut logits = z2.dot(&p.w3);
    logits += &p.b3;
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    Forward {
        z1,
        h1,
        z2,
        probs: logits,
    }
}

fn cross_entropy(probs: &Array2<f64>, labeled: &[(usize, usize)]) -> f64 {
    let total: f64 = labeled.iter().map(|&(i, y)| -probs[[i, y]].ln()).sum();
    total / labeled.len() as f64
}

fn backward(
    adj: &NormalizedAdjacency,
    features: &Features,
    p: &Params,
    fwd: &Forward,
    labeled: &[(usize, usize)],
) -> Params {
    let scale = 1.0 / labeled.len() as f64;
    let mut dlogits = Array2::zeros(fwd.probs.raw_dim());
    for &(i, y) in labeled {
        let mut row = dlogits.row_mut(i);
        row += &fwd.probs.row(i);
        row[y] -= 1.0;
    }
    dlogits *= scale;

    let dw3 = fwd.z2.t().dot(&dlogits);
    let db3 = dlogits.sum_axis(Axis(0));
    let dz2 = dlogits.dot(&p.w3.t());
    let dp2 = adj.matmul(dz2.view());
    let dw2 = fwd.h1.t().dot(&dp2);
    let mut dz1 = dp2.dot(&p.w2.t());
    Zip::from(&mut dz1).and(&fwd.z1).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    let dxw = adj.matmul(dz1.view());
    let dw1 = match features {
        Features::Identity => dxw,
        Features::Dense { width, data } => {
            let x = ArrayView2::from_shape((data.len() / width, *width), data)
                .expect("validated at build");
            x.t().dot(&dxw)
        }
    };
    Params {
        w1: dw1,
        w2: dw2,
        w3: dw3,
        b3: db3,
    }
}

/// Mean cross-entropy over `labeled` and its gradient with respect to every
/// parameter block (no weight decay).
pub fn loss_and_gradient(g: &Graph, params: &Params, labeled: &[(usize, usize)]) -> (f64, Params) {
    let adj = NormalizedAdjacency::new(g);
    let fwd = forward(&adj, g.features(), params);
    let loss = cross_entropy(&fwd.probs, labeled);
    (loss, backward(&adj, g.features(), params, &fwd, labeled))
}

/// Mean cross-entropy over `labeled` for arbitrary parameters.
pub fn loss(g: &Graph, params: &Params, labeled: &[(usize, usize)]) -> f64 {
    let adj = NormalizedAdjacency::new(g);
    cross_entropy(&forward(&adj, g.features(), params).probs, labeled)
}

struct Adam {
    m: [Vec<f64>; 4],
    v: [Vec<f64>; 4],
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(p: &Params) -> Self {
        let sizes = p.blocks().map(|(_, _, d)| d.len());
        Adam {
            m: sizes.map(|n| vec![0.0; n]),
            v: sizes.map(|n| vec![0.0; n]),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Params, grads: &Params, lr: f64, weight_decay: f64) {
        self.step += 1;
        let bias1 = 1.0 - Self::BETA1.powi(self.step);
        let bias2 = 1.0 - Self::BETA2.powi(self.step);
        let grads = grads.blocks();
        for (b, theta) in params.blocks_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[b], &mut self.v[b], grads[b].2);
            for k in 0..theta.len() {
                let grad = g[k] + weight_decay * theta[k];
                m[k] = Self::BETA1 * m[k] + (1.0 - Self::BETA1) * grad;
                v[k] = Self::BETA2 * v[k] + (1.0 - Self::BETA2) * grad * grad;
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                theta[k] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
            }
        }
    }
}

/// A trained classifier plus the normalized adjacency of its training graph.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: Params,
    pub adjacency: NormalizedAdjacency,
    /// Training loss before each update, one entry per epoch.
    pub loss_history: Vec<f64>,
    node_count: usize,
    feature_width: usize,
}

impl Model {
    pub fn feature_width(&self) -> usize {
        self.feature_width
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Class distributions on the training graph.
    pub fn training_distributions(&self, g: &Graph) -> Result<Array2<f64>> {
        self.check_graph(g)?;
        Ok(forward(&self.adjacency, g.features(), &self.params).probs)
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.node_count() != self.node_count || g.feature_width() != self.feature_width {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} nodes with {} features, graph has {} nodes with {}",
                self.node_count,
                self.feature_width,
                g.node_count(),
                g.feature_width()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            blocks: self
                .params
                .blocks()
                .iter()
                .map(|(name, shape, data)| Block {
                    name: (*name).into(),
                    shape: shape.to_vec(),
                    data: data.to_vec(),
                })
                .collect(),
        };
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &ckpt)?;
        Ok(())
    }

    /// Restores parameters saved by [`Model::save`] for use on graph `g`.
    pub fn load(path: impl AsRef<Path>, g: &Graph) -> Result<Model> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::DimensionMismatch(format!(
                "unknown checkpoint format `{}`",
                ckpt.format
            )));
        }
        let find = |name: &str, rank: usize| -> Result<&Block> {
            let b = ckpt.blocks.iter().find(|b| b.name == name).ok_or_else(|| {
                Error::DimensionMismatch(format!("checkpoint lacks block `{name}`"))
            })?;
            if b.shape.len() != rank || b.shape.iter().product::<usize>() != b.data.len() {
                return Err(Error::DimensionMismatch(format!(
                    "block `{name}` has inconsistent shape"
                )));
            }
            Ok(b)
        };
        let mat = |b: &Block| {
            Array2::from_shape_vec((b.shape[0], b.shape[1]), b.data.clone()).expect("checked")
        };
        let (w1, w2, w3, b3) = (
            find("w1", 2)?,
            find("w2", 2)?,
            find("w3", 2)?,
            find("b3", 1)?,
        );
        let params = Params {
            w1: mat(w1),
            w2: mat(w2),
            w3: mat(w3),
            b3: Array1::from(b3.data.clone()),
        };
        let consistent = params.w1.ncols() == params.w2.nrows()
            && params.w2.ncols() == params.w3.nrows()
            && params.w3.ncols() == params.b3.len();
        if !consistent || params.w1.nrows() != g.feature_width() {
            return Err(Error::DimensionMismatch(
                "checkpoint blocks do not chain or match the graph".into(),
            ));
        }
        Ok(Model {
            params,
            adjacency: NormalizedAdjacency::new(g),
            loss_history: Vec::new(),
            node_count: g.node_count(),
            feature_width: g.feature_width(),
        })
    }
}

const CHECKPOINT_FORMAT: &str = "gcn-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    blocks: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
struct Block {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Trains from scratch on `labeled` `(node, class)` pairs.
pub fn train(g: &Graph, labeled: &[(usize, usize)], hyper: &GcnHyper) -> Result<Model> {
    hyper.validate()?;
    if labeled.is_empty() {
        return Err(Error::Empty("training needs at least one labeled node"));
    }
    let classes = g.class_count();
    for &(i, y) in labeled {
        if i >= g.node_count() || y >= classes {
            return Err(Error::param(
                "labeled",
                format!("({i}, {y}) is not a valid node/class pair"),
            ));
        }
    }

    let adjacency = NormalizedAdjacency::new(g);
    let features = g.features();
    let mut params = Params::init(g.feature_width(), classes, hyper);
    let mut adam = Adam::new(&params);
    let mut loss_history = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let fwd = forward(&adjacency, features, &params);
        let loss = cross_entropy(&fwd.probs, labeled);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: epoch + 1,
                loss,
            });
        }
        loss_history.push(loss);
        let grads = backward(&adjacency, features, &params, &fwd, labeled);
        adam.update(&mut params, &grads, hyper.learning_rate, hyper.weight_decay);
    }
    if !params.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: hyper.epochs,
            loss: f64::NAN,
        });
    }
    Ok(Model {
        params,
        adjacency,
        loss_history,
        node_count: g.node_count(),
        feature_width: g.feature_width(),
    })
}

/// Row-stochastic `n × c` class distributions of `m` evaluated on `g`.
///
/// `g` may be a perturbed variant of the training graph: the trained weights
/// are reused with `g`'s normalized adjacency.
pub fn predict_distributions(m: &Model, g: &Graph) -> Result<Array2<f64>> {
    m.check_graph(g)?;
    let adj = NormalizedAdjacency::new(g);
    Ok(forward(&adj, g.features(), &m.params).probs)
}
