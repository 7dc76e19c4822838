//! Downstream evaluation on test-split assertions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{self, GcnHyper};
use crate::graph::Graph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScores>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
    pub train_ms: f64,
    pub predict_ms: f64,
}

/// Accuracy, per-class precision/recall/F1 and macro-F1 over `c` classes.
///
/// A class with no true or predicted members gets F1 = 0 and still counts
/// toward the macro average.
pub fn classification_report(
    truth: &[usize],
    predicted: &[usize],
    classes: usize,
) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} truths vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("no test nodes to evaluate"));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= classes || p >= classes {
            return Err(Error::param(
                "class",
                format!("class index out of range for {classes} classes"),
            ));
        }
        confusion[t][p] += 1;
    }
    let total = truth.len();
    let correct: usize = (0..classes).map(|k| confusion[k][k]).sum();
    let per_class: Vec<ClassScores> = (0..classes)
        .map(|k| {
            let tp = confusion[k][k] as f64;
            let actual: usize = confusion[k].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[k]).sum();
            let precision = if predicted == 0 {
                0.0
            } else {
                tp / predicted as f64
            };
            let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScores {
                precision,
                recall,
                f1,
                support: actual,
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / classes as f64;
    Ok(EvalReport {
        accuracy: correct as f64 / total as f64,
        macro_f1,
        per_class,
        confusion,
        total,
        train_ms: 0.0,
        predict_ms: 0.0,
    })
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &p)| {
            if p > best.1 {
                (k, p)
            } else {
                best
            }
        })
        .0
}

/// Trains a fresh GCN on `labeled` and scores argmax predictions on the test assertions.
pub fn evaluate(g: &Graph, labeled: &[(usize, usize)], hyper: &GcnHyper) -> Result<EvalReport> {
    let test = g.test_nodes();
    if test.is_empty() {
        return Err(Error::Empty("test split has no labeled assertions"));
    }
    let start = Instant::now();
    let model = gcn::train(g, labeled, hyper)?;
    let train_ms = start.elapsed().as_secs_f64() * 1e3;
    let start = Instant::now();
    let probs = gcn::predict_distributions(&model, g)?;
    let truth: Vec<usize> = test
        .iter()
        .map(|&v| g.label(v).expect("test nodes are labeled"))
        .collect();
    let predicted: Vec<usize> = test.iter().map(|&v| argmax(probs.row(v))).collect();
    let predict_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut report = classification_report(&truth, &predicted, g.class_count())?;
    report.train_ms = train_ms;
    report.predict_ms = predict_ms;
    Ok(report)
}

/// Mean and sample standard deviation of a set of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
    /// False when there was a single run and the deviation is reported as 0.
    pub std_defined: bool,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(reports: &[EvalReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::Empty("nothing to aggregate"));
    }
    let acc: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let f1: Vec<f64> = reports.iter().map(|r| r.macro_f1).collect();
    let (accuracy_mean, accuracy_std) = mean_std(&acc);
    let (macro_f1_mean, macro_f1_std) = mean_std(&f1);
    Ok(Aggregate {
        runs: reports.len(),
        accuracy_mean,
        accuracy_std,
        macro_f1_mean,
        macro_f1_std,
        std_defined: reports.len() > 1,
    })
}
