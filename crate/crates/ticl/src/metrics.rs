//! Evaluation: partially-directed-graph structural Hamming distance with the
//! full per-cell breakdown, edge-level precision/recall/F1, the structural
//! intervention distance, and intervention-target F1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bayesnet::InterventionFamily;
use crate::graphlib::{consistent_extension, d_separated, Dag, GraphError, Pdag};

/// Per-pair outcome counts. Rows of the underlying table are the true edge
/// status (directed, undirected, absent), columns the predicted one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeOutcomeCounts {
    /// True directed edge predicted with the right direction.
    pub directed_right: usize,
    /// True directed edge predicted with the wrong direction.
    pub directed_wrong: usize,
    /// True directed edge predicted undirected.
    pub undirected_on_identifiable: usize,
    /// True directed edge missing from the prediction.
    pub missing_identifiable: usize,
    /// True undirected edge predicted directed (either way).
    pub directed_on_unidentifiable: usize,
    /// True undirected edge predicted undirected.
    pub undirected_right: usize,
    /// True undirected edge missing from the prediction.
    pub missing_unidentifiable: usize,
    /// Predicted directed edge with no true edge.
    pub spurious_directed: usize,
    /// Predicted undirected edge with no true edge.
    pub spurious_undirected: usize,
}

impl EdgeOutcomeCounts {
    /// Sum of the error cells.
    pub fn shd(&self) -> usize {
        self.directed_wrong
            + self.undirected_on_identifiable
            + self.missing_identifiable
            + self.directed_on_unidentifiable
            + self.missing_unidentifiable
            + self.spurious_directed
            + self.spurious_undirected
    }

    pub fn true_skeleton_edges(&self) -> usize {
        self.directed_right
            + self.directed_wrong
            + self.undirected_on_identifiable
            + self.missing_identifiable
            + self.directed_on_unidentifiable
            + self.undirected_right
            + self.missing_unidentifiable
    }
}

/// Structural Hamming distance between two partially directed graphs over
/// the same node set, with the per-cell breakdown.
pub fn shd_icpdag(truth: &Pdag, pred: &Pdag) -> Result<(usize, EdgeOutcomeCounts), GraphError> {
    if truth.n() != pred.n() {
        return Err(GraphError::SizeMismatch(truth.n(), pred.n()));
    }
    let mut counts = EdgeOutcomeCounts::default();
    let n = truth.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let t_dir = if truth.has_directed(i, j) {
                Some((i, j))
            } else if truth.has_directed(j, i) {
                Some((j, i))
            } else {
                None
            };
            let t_und = truth.has_undirected(i, j);
            let p_dir = if pred.has_directed(i, j) {
                Some((i, j))
            } else if pred.has_directed(j, i) {
                Some((j, i))
            } else {
                None
            };
            let p_und = pred.has_undirected(i, j);
            match (t_dir, t_und) {
                (Some(t), false) => match (p_dir, p_und) {
                    (Some(p), false) if p == t => counts.directed_right += 1,
                    (Some(_), false) => counts.directed_wrong += 1,
                    (None, true) => counts.undirected_on_identifiable += 1,
                    (None, false) => counts.missing_identifiable += 1,
                    _ => unreachable!("a pair holds at most one mark"),
                },
                (None, true) => match (p_dir, p_und) {
                    (Some(_), false) => counts.directed_on_unidentifiable += 1,
                    (None, true) => counts.undirected_right += 1,
                    (None, false) => counts.missing_unidentifiable += 1,
                    _ => unreachable!(),
                },
                (None, false) => match (p_dir, p_und) {
                    (Some(_), false) => counts.spurious_directed += 1,
                    (None, true) => counts.spurious_undirected += 1,
                    (None, false) => {}
                    _ => unreachable!(),
                },
                (Some(_), true) => unreachable!("a pair holds at most one mark"),
            }
        }
    }
    Ok((counts.shd(), counts))
}

/// Edge-level precision, recall, and F1 over identifiable edges.
///
/// Precision is the true-positive rate over the truth's directed edges;
/// recall is one minus the false-discovery rate over the prediction's
/// directed edges. Empty denominators yield zero.
pub fn f1_icpdag(truth: &Pdag, pred: &Pdag) -> Result<(f64, f64, f64), GraphError> {
    let (_, c) = shd_icpdag(truth, pred)?;
    let tp = c.directed_right as f64;
    let truth_directed = (c.directed_right
        + c.directed_wrong
        + c.undirected_on_identifiable
        + c.missing_identifiable) as f64;
    let pred_directed = (c.directed_right
        + c.directed_wrong
        + c.directed_on_unidentifiable
        + c.spurious_directed) as f64;
    let precision = if truth_directed > 0.0 {
        tp / truth_directed
    } else {
        0.0
    };
    let recall = if pred_directed > 0.0 {
        tp / pred_directed
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, f1))
}

/// Nodes on proper causal paths from `i` to `j`, excluding `i`.
fn causal_path_nodes(truth: &Dag, i: usize, j: usize) -> BTreeSet<usize> {
    truth
        .descendants_of(i)
        .into_iter()
        .filter(|&w| w == j || truth.descendants_of(w).contains(&j))
        .collect()
}

/// Whether parent adjustment under the estimate graph correctly recovers the
/// interventional distribution of `j` under `do(i)` in the truth, for every
/// positive Markov parameterization.
fn pair_correct(truth: &Dag, adj: &BTreeSet<usize>, i: usize, j: usize) -> bool {
    if adj.contains(&j) {
        // The estimate claims no effect beyond observing the marginal.
        return !truth.descendants_of(i).contains(&j);
    }
    let cn = causal_path_nodes(truth, i, j);
    let mut forbidden: BTreeSet<usize> = cn.clone();
    for &w in &cn {
        forbidden.extend(truth.descendants_of(w));
    }
    if adj.iter().any(|z| forbidden.contains(z)) {
        return false;
    }
    // Proper backdoor graph: cut the first edge of every causal path.
    let mut pbd = truth.clone();
    for c in truth.children_of(i) {
        if cn.contains(&c) {
            pbd.remove_edge(i, c);
        }
    }
    d_separated(&pbd, i, j, adj)
}

/// Structural intervention distance between a true DAG and a partially
/// directed estimate: the number of ordered pairs whose interventional
/// distribution the estimate's parent adjustment gets wrong. The estimate is
/// first resolved through one deterministic consistent extension.
pub fn sid(truth: &Dag, pred: &Pdag) -> Result<usize, GraphError> {
    if truth.n() != pred.n() {
        return Err(GraphError::SizeMismatch(truth.n(), pred.n()));
    }
    let ext = consistent_extension(pred)?;
    let n = truth.n();
    let mut wrong = 0usize;
    for i in 0..n {
        let adj = ext.parents_of(i).clone();
        for j in 0..n {
            if i == j {
                continue;
            }
            if !pair_correct(truth, &adj, i, j) {
                wrong += 1;
            }
        }
    }
    Ok(wrong)
}

/// Intervention-target detection scores at the edge level: one edge per
/// (regime, target) pair. Empty denominators yield zero.
pub fn f1_targets(
    truth_fam: &InterventionFamily,
    predicted: &BTreeMap<usize, BTreeSet<usize>>,
) -> (f64, f64, f64) {
    let mut truth_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (k, regime) in truth_fam.regimes.iter().enumerate().skip(1) {
        for &t in &regime.targets {
            truth_edges.insert((k, t));
        }
    }
    let mut pred_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (&k, targets) in predicted {
        for &t in targets {
            pred_edges.insert((k, t));
        }
    }
    let hit = truth_edges.intersection(&pred_edges).count() as f64;
    let precision = if pred_edges.is_empty() {
        0.0
    } else {
        hit / pred_edges.len() as f64
    };
    let recall = if truth_edges.is_empty() {
        0.0
    } else {
        hit / truth_edges.len() as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// One dataset's evaluation summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub shd: usize,
    pub sid: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub target_precision: f64,
    pub target_recall: f64,
    pub target_f1: f64,
    pub breakdown: EdgeOutcomeCounts,
}

impl EvaluationReport {
    pub fn csv_header() -> &'static str {
        "dataset,shd,sid,precision,recall,f1,target_precision,target_recall,target_f1"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            self.dataset,
            self.shd,
            self.sid.map_or_else(|| "na".into(), |s| s.to_string()),
            self.precision,
            self.recall,
            self.f1,
            self.target_precision,
            self.target_recall,
            self.target_f1
        )
    }
}
