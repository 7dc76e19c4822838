//! Candidate scoring: instability, sensitivity, percentile fusion and the
//! mixing-weight schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Shannon entropy in nats, with `0 · ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Generalized Jensen-Shannon divergence: entropy of the mean distribution
/// minus the mean entropy.
pub fn jsd<P: AsRef<[f64]>>(distributions: &[P]) -> Result<f64> {
    let first = distributions
        .first()
        .ok_or(Error::Empty("jsd needs at least one distribution"))?;
    let width = first.as_ref().len();
    let count = distributions.len() as f64;
    let mut mean = vec![0.0; width];
    let mut mean_entropy = 0.0;
    for d in distributions {
        let d = d.as_ref();
        if d.len() != width {
            return Err(Error::DimensionMismatch(format!(
                "distribution of length {} where {width} expected",
                d.len()
            )));
        }
        for (m, &x) in mean.iter_mut().zip(d) {
            *m += x;
        }
        mean_entropy += entropy(d);
    }
    mean.iter_mut().for_each(|m| *m /= count);
    // Rounding can push the difference a hair below zero.
    Ok((entropy(&mean) - mean_entropy / count).max(0.0))
}

/// Per-candidate label distributions across the perturbed graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionTensor {
    pub candidates: Vec<usize>,
    pub classes: usize,
    /// `rows[i][j]` is candidate `i`'s distribution on perturbed graph `j`.
    pub rows: Vec<Vec<Vec<f64>>>,
}

impl DistributionTensor {
    /// Assembles the tensor from one `n × c` prediction matrix per perturbed graph.
    pub fn from_predictions(
        candidates: &[usize],
        predictions: &[ndarray::Array2<f64>],
    ) -> Result<Self> {
        let classes = predictions
            .first()
            .ok_or(Error::Empty(
                "at least one perturbed prediction is required",
            ))?
            .ncols();
        let rows = candidates
            .iter()
            .map(|&v| predictions.iter().map(|p| p.row(v).to_vec()).collect())
            .collect();
        let t = DistributionTensor {
            candidates: candidates.to_vec(),
            classes,
            rows,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, per_graph) in self.rows.iter().enumerate() {
            for row in per_graph {
                if row.len() != self.classes {
                    return Err(Error::DimensionMismatch(format!(
                        "candidate {i} row has {} classes",
                        row.len()
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                    return Err(Error::param(
                        "distribution",
                        format!("candidate {i} row sums to {sum}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// JSD of each candidate's distributions across perturbed graphs.
pub fn instability(t: &DistributionTensor) -> Result<Vec<f64>> {
    t.rows.iter().map(|rows| jsd(rows)).collect()
}

/// Population variance of each candidate's centrality across perturbed graphs.
pub fn sensitivity<V: AsRef<[f64]>>(centrality_per_graph: &[V], candidates: &[usize]) -> Vec<f64> {
    let count = centrality_per_graph.len() as f64;
    candidates
        .iter()
        .map(|&v| {
            let values = centrality_per_graph.iter().map(|c| c.as_ref()[v]);
            let mean = values.clone().sum::<f64>() / count;
            values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / count
        })
        .collect()
}

/// Fraction of candidates with a strictly smaller score.
pub fn percentile(scores: &[f64]) -> Vec<f64> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = scores.len() as f64;
    scores
        .iter()
        .map(|s| sorted.partition_point(|x| x.total_cmp(s).is_lt()) as f64 / n)
        .collect()
}

/// Inverse-CDF draw from `Beta(1, beta)` for a given uniform `u ∈ [0, 1)`.
pub fn gamma_from_uniform(beta: f64, u: f64) -> f64 {
    1.0 - u.powf(1.0 / beta)
}

pub fn sample_gamma(beta: f64, stream_seed: u64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", "must be positive and finite"));
    }
    let u: f64 = rng::stream(stream_seed).random();
    Ok(gamma_from_uniform(beta, u))
}

/// Linear decrease of `β` from `beta_start` at round 1 to `beta_end` at round `total_rounds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSchedule {
    pub beta_start: f64,
    pub beta_end: f64,
    #[serde(skip)]
    pub total_rounds: usize,
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule {
            beta_start: 9.0,
            beta_end: 0.25,
            total_rounds: 1,
        }
    }
}

impl GammaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_end > 0.0 && self.beta_end.is_finite()) {
            return Err(Error::param("beta_end", "must be positive"));
        }
        if !(self.beta_start >= self.beta_end && self.beta_start.is_finite()) {
            return Err(Error::param("beta_start", "must be finite and >= beta_end"));
        }
        Ok(())
    }

    /// `β_t` for round `t` (1-based), clamped to `[1, total_rounds]`.
    pub fn beta(&self, t: usize) -> f64 {
        let span = self.total_rounds.max(2) - 1;
        let t = t.clamp(1, self.total_rounds.max(1));
        self.beta_start + (t - 1) as f64 * (self.beta_end - self.beta_start) / span as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    #[serde(skip)]
    pub node: usize,
    pub id: String,
    pub inst: f64,
    pub sens: f64,
    pub perc_inst: f64,
    pub perc_sens: f64,
    pub combined: f64,
}

/// Scores of every pool candidate for one round.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub gamma: f64,
    pub beta: f64,
    pub entries: Vec<ScoreEntry>,
}

impl ScoreTable {
    /// Fuses raw instability and sensitivity through their percentiles in the pool.
    pub fn new(
        candidates: &[usize],
        ids: &[String],
        inst: &[f64],
        sens: &[f64],
        gamma: f64,
        beta: f64,
    ) -> Result<Self> {
        if candidates.len() != inst.len()
            || candidates.len() != sens.len()
            || candidates.len() != ids.len()
        {
            return Err(Error::DimensionMismatch(
                "score vectors must align with the candidates".into(),
            ));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::param("gamma", "must lie in [0, 1]"));
        }
        let perc_inst = percentile(inst);
        let perc_sens = percentile(sens);
        let entries = (0..candidates.len())
            .map(|i| ScoreEntry {
                node: candidates[i],
                id: ids[i].clone(),
                inst: inst[i],
                sens: sens[i],
                perc_inst: perc_inst[i],
                perc_sens: perc_sens[i],
                combined: gamma * perc_inst[i] + (1.0 - gamma) * perc_sens[i],
            })
            .collect();
        Ok(ScoreTable {
            gamma,
            beta,
            entries,
        })
    }
}

/// The `b` candidates with the largest combined score, ties to the smaller node index.
///
/// The batch objective is a sum of per-node terms, so this is its exact maximizer.
pub fn select_batch(table: &ScoreTable, b: usize) -> Result<Vec<usize>> {
    if table.entries.is_empty() {
        return Err(Error::Empty("candidate pool is empty"));
    }
    if b > table.entries.len() {
        return Err(Error::BudgetExceedsPool {
            budget: b,
            pool: table.entries.len(),
        });
    }
    let mut order: Vec<&ScoreEntry> = table.entries.iter().collect();
    order.sort_by(|x, y| y.combined.total_cmp(&x.combined).then(x.node.cmp(&y.node)));
    Ok(order[..b].iter().map(|e| e.node).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn jsd_identical_and_disjoint() {
        let p = vec![0.2, 0.3, 0.5];
        assert!(jsd(&[p.clone(), p.clone(), p]).unwrap().abs() < 1e-12);
        assert!(close(
            jsd(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            std::f64::consts::LN_2,
            1e-12
        ));
        assert_eq!(jsd(&[vec![0.4, 0.6]]).unwrap(), 0.0);
    }

    #[test]
    fn jsd_errors() {
        let empty: [Vec<f64>; 0] = [];
        assert!(matches!(jsd(&empty), Err(Error::Empty(_))));
        assert!(matches!(
            jsd(&[vec![1.0], vec![0.5, 0.5]]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn tensor(rows: Vec<Vec<Vec<f64>>>) -> DistributionTensor {
        DistributionTensor {
            candidates: (0..rows.len()).collect(),
            classes: rows[0][0].len(),
            rows,
        }
    }

    #[test]
    fn instability_cases() {
        let t = tensor(vec![
            vec![vec![0.7, 0.3]; 4],
            vec![
                vec![0.6, 0.4],
                vec![0.8, 0.2],
                vec![0.6, 0.4],
                vec![0.8, 0.2],
            ],
            vec![
                vec![0.4, 0.6],
                vec![1.0, 0.0],
                vec![0.4, 0.6],
                vec![1.0, 0.0],
            ],
        ]);
        let s = instability(&t).unwrap();
        assert!(s[0].abs() < 1e-15);
        // Same mean (0.7, 0.3), increasingly spread rows.
        assert!(s[1] > s[0] && s[2] > s[1]);

        let single = tensor(vec![vec![vec![0.1, 0.9]], vec![vec![0.5, 0.5]]]);
        assert_eq!(instability(&single).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn tensor_rejects_non_distributions() {
        let t = tensor(vec![vec![vec![0.5, 0.6]]]);
        assert!(t.validate().is_err());
    }

    #[test]
    fn sensitivity_cases() {
        let graphs = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(sensitivity(&graphs, &[0, 1]), vec![0.0, 0.25]);
    }

    #[test]
    fn percentile_cases() {
        let p = percentile(&[0.1, 0.5, 0.9]);
        assert_eq!(p, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(percentile(&[4.0; 5]), vec![0.0; 5]);
        let scores: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let p = percentile(&scores);
        let argmax = scores.iter().position(|&s| s == 99.0).unwrap();
        assert_eq!(p[argmax], 0.99);
    }

    #[test]
    fn gamma_uniform_case() {
        assert_eq!(gamma_from_uniform(1.0, 0.5), 0.5);
        assert!(sample_gamma(0.0, 1).is_err());
        let g = sample_gamma(2.0, 42).unwrap();
        assert_eq!(g, sample_gamma(2.0, 42).unwrap());
        assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn gamma_mean_vanishes_for_large_beta() {
        let mean = (0..2000)
            .map(|s| sample_gamma(1e6, s).unwrap())
            .sum::<f64>()
            / 2000.0;
        assert!(mean < 1e-4);
    }

    #[test]
    fn schedule_cases() {
        let one = GammaSchedule {
            total_rounds: 1,
            ..Default::default()
        };
        assert_eq!(one.beta(1), 9.0);
        let four = GammaSchedule {
            total_rounds: 4,
            ..Default::default()
        };
        let betas: Vec<f64> = (1..=4).map(|t| four.beta(t)).collect();
        let expect = [9.0, 9.0 - 8.75 / 3.0, 9.0 - 2.0 * 8.75 / 3.0, 0.25];
        for (b, e) in betas.iter().zip(expect) {
            assert!(close(*b, e, 1e-12));
        }
        assert!(close(betas[1], 6.083333333333333, 1e-12));
        assert!(close(betas[2], 3.1666666666666665, 1e-12));
        let means: Vec<f64> = betas.iter().map(|b| 1.0 / (1.0 + b)).collect();
        assert!(means.windows(2).all(|w| w[0] < w[1]));
        assert!(GammaSchedule {
            beta_start: 0.1,
            beta_end: 1.0,
            total_rounds: 3
        }
        .validate()
        .is_err());
    }

    fn table(inst: &[f64], sens: &[f64], gamma: f64) -> ScoreTable {
        let ids: Vec<String> = (0..inst.len()).map(|i| format!("a{i}")).collect();
        let nodes: Vec<usize> = (0..inst.len()).collect();
        ScoreTable::new(&nodes, &ids, inst, sens, gamma, 1.0).unwrap()
    }

    fn top_by(values: &[f64], b: usize) -> Vec<usize> {
        let p = percentile(values);
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&x, &y| p[y].total_cmp(&p[x]).then(x.cmp(&y)));
        idx.truncate(b);
        idx
    }

    #[test]
    fn degenerate_gamma_selects_single_signal() {
        let inst = [0.3, 0.9, 0.1, 0.5, 0.7];
        let sens = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(
            select_batch(&table(&inst, &sens, 1.0), 2).unwrap(),
            top_by(&inst, 2)
        );
        assert_eq!(
            select_batch(&table(&inst, &sens, 0.0), 2).unwrap(),
            top_by(&sens, 2)
        );
    }

    #[test]
    fn selection_breaks_ties_by_node() {
        let t = table(&[1.0; 4], &[1.0; 4], 0.5);
        assert_eq!(select_batch(&t, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn selection_errors() {
        let empty = ScoreTable {
            gamma: 0.5,
            beta: 1.0,
            entries: vec![],
        };
        assert!(matches!(select_batch(&empty, 1), Err(Error::Empty(_))));
        assert!(select_batch(&table(&[1.0], &[1.0], 0.5), 2).is_err());
        assert!(ScoreTable::new(&[0], &["a".into()], &[1.0], &[1.0], 1.5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn jsd_bounds(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..8)) {
            let dists: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum::<f64>() + 1e-9;
                    r.iter().map(|x| (x + 1e-9 / 3.0) / s).collect()
                })
                .collect();
            let v = jsd(&dists).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= (dists.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn monotone_transform_preserves_selection(
            inst in prop::collection::vec(0.0f64..1.0, 1..30),
            gamma in 0.0f64..=1.0,
            b in 1usize..5,
        ) {
            let sens: Vec<f64> = inst.iter().rev().map(|x| x * 3.0 + 0.1).collect();
            let b = b.min(inst.len());
            let t1 = table(&inst, &sens, gamma);
            let inst2: Vec<f64> = inst.iter().map(|x| (5.0 * x).exp() - 2.0).collect();
            let sens2: Vec<f64> = sens.iter().map(|x| x.powi(3)).collect();
            let t2 = table(&inst2, &sens2, gamma);
            for (e1, e2) in t1.entries.iter().zip(&t2.entries) {
                prop_assert_eq!(e1.perc_inst, e2.perc_inst);
                prop_assert_eq!(e1.perc_sens, e2.perc_sens);
                prop_assert!((0.0..=1.0).contains(&e1.combined));
            }
            prop_assert_eq!(select_batch(&t1, b).unwrap(), select_batch(&t2, b).unwrap());
        }
    }
}
