//! A small deterministic gradient-boosted tree ensemble with logistic loss:
//! histogram split finding on quantile bins, depth-limited regression trees
//! on gradient/hessian targets, serde persistence that reproduces
//! probabilities bit-exactly on reload.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub n_bins: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
            n_bins: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node {
    /// Split feature, or -1 for a leaf.
    feature: i32,
    /// Split boundary; rows with `x[feature] <= threshold` go left.
    threshold: f64,
    left: usize,
    right: usize,
    /// Leaf weight (zero on internal nodes).
    weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            let node = &self.nodes[at];
            if node.feature < 0 {
                return node.weight;
            }
            at = if x[node.feature as usize] <= node.threshold {
                node.left
            } else {
                node.right
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: GbdtParams,
    base_score: f64,
    trees: Vec<Tree>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Quantile thresholds per feature; deduped, so constant features get none.
fn quantile_thresholds(column: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut out = Vec::new();
    for q in 1..n_bins {
        let pos = (q * n) / n_bins;
        let v = sorted[pos.min(n - 1)];
        if out.last().is_none_or(|&last| v > last) {
            out.push(v);
        }
    }
    out.dedup();
    out
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl GbdtModel {
    /// Fits the ensemble. Labels are 0/1; rows are dense feature vectors of
    /// equal length. Deterministic: no subsampling, ties broken by the first
    /// (feature, bin) encountered.
    pub fn fit(rows: &[Vec<f64>], labels: &[bool], params: &GbdtParams) -> GbdtModel {
        assert_eq!(rows.len(), labels.len());
        assert!(!rows.is_empty());
        let n = rows.len();
        let dim = rows[0].len();

        let thresholds: Vec<Vec<f64>> = (0..dim)
            .map(|f| {
                let col: Vec<f64> = rows.iter().map(|r| r[f]).collect();
                quantile_thresholds(&col, params.n_bins)
            })
            .collect();
        // Bin index = number of thresholds strictly below the value, so
        // `bin(v) <= b` matches `v <= thresholds[b]`.
        let binned: Vec<Vec<u8>> = rows
            .iter()
            .map(|r| {
                (0..dim)
                    .map(|f| thresholds[f].partition_point(|&t| t < r[f]) as u8)
                    .collect()
            })
            .collect();

        let pos = labels.iter().filter(|&&y| y).count();
        let p0 = (pos as f64 / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let base_score = (p0 / (1.0 - p0)).ln();

        let mut margins = vec![base_score; n];
        let mut trees = Vec::with_capacity(params.rounds);
        let mut grad = vec![0.0f64; n];
        let mut hess = vec![0.0f64; n];
        for _ in 0..params.rounds {
            for i in 0..n {
                let p = sigmoid(margins[i]);
                grad[i] = p - if labels[i] { 1.0 } else { 0.0 };
                hess[i] = (p * (1.0 - p)).max(1e-12);
            }
            let tree = grow_tree(&binned, &thresholds, &grad, &hess, params);
            for i in 0..n {
                margins[i] += rows_eval(&tree, &binned[i], &thresholds);
            }
            trees.push(tree);
        }
        GbdtModel {
            params: params.clone(),
            base_score,
            trees,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let margin: f64 = self.base_score + self.trees.iter().map(|t| t.eval(x)).sum::<f64>();
        sigmoid(margin)
    }
}

/// Tree evaluation over pre-binned rows during training; equivalent to
/// `Tree::eval` on the raw values by the bin/threshold correspondence.
fn rows_eval(tree: &Tree, bins: &[u8], thresholds: &[Vec<f64>]) -> f64 {
    let mut at = 0usize;
    loop {
        let node = &tree.nodes[at];
        if node.feature < 0 {
            return node.weight;
        }
        let f = node.feature as usize;
        let split_bin = thresholds[f].partition_point(|&t| t < node.threshold);
        at = if (bins[f] as usize) <= split_bin {
            node.left
        } else {
            node.right
        };
    }
}

fn grow_tree(
    binned: &[Vec<u8>],
    thresholds: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
) -> Tree {
    let dim = thresholds.len();
    let mut nodes: Vec<Node> = Vec::new();
    // Work queue of (node index, depth, rows).
    let all_rows: Vec<u32> = (0..binned.len() as u32).collect();
    nodes.push(Node {
        feature: -1,
        threshold: 0.0,
        left: 0,
        right: 0,
        weight: 0.0,
    });
    let mut queue: Vec<(usize, usize, Vec<u32>)> = vec![(0, 0, all_rows)];

    while let Some((at, depth, rows)) = queue.pop() {
        let g_total: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
        let h_total: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
        let make_leaf = |nodes: &mut Vec<Node>| {
            nodes[at].feature = -1;
            nodes[at].weight = -params.learning_rate * g_total / (h_total + params.lambda);
        };
        if depth >= params.max_depth || rows.len() < 2 {
            make_leaf(&mut nodes);
            continue;
        }
        let parent_obj = g_total * g_total / (h_total + params.lambda);
        let mut best: Option<SplitCandidate> = None;
        for f in 0..dim {
            let n_thresh = thresholds[f].len();
            if n_thresh == 0 {
                continue;
            }
            let mut g_bin = vec![0.0f64; n_thresh + 1];
            let mut h_bin = vec![0.0f64; n_thresh + 1];
            for &r in &rows {
                let b = binned[r as usize][f] as usize;
                g_bin[b] += grad[r as usize];
                h_bin[b] += hess[r as usize];
            }
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            for b in 0..n_thresh {
                g_left += g_bin[b];
                h_left += h_bin[b];
                let g_right = g_total - g_left;
                let h_right = h_total - h_left;
                if h_left < params.min_child_weight || h_right < params.min_child_weight {
                    continue;
                }
                let gain = g_left * g_left / (h_left + params.lambda)
                    + g_right * g_right / (h_right + params.lambda)
                    - parent_obj;
                if gain > 1e-12 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(SplitCandidate { gain, feature: f, bin: b });
                }
            }
        }
        match best {
            None => make_leaf(&mut nodes),
            Some(split) => {
                let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
                for &r in &rows {
                    if (binned[r as usize][split.feature] as usize) <= split.bin {
                        left_rows.push(r);
                    } else {
                        right_rows.push(r);
                    }
                }
                debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
                let left = nodes.len();
                let right = nodes.len() + 1;
                for _ in 0..2 {
                    nodes.push(Node {
                        feature: -1,
                        threshold: 0.0,
                        left: 0,
                        right: 0,
                        weight: 0.0,
                    });
                }
                nodes[at] = Node {
                    feature: split.feature as i32,
                    threshold: thresholds[split.feature][split.bin],
                    left,
                    right,
                    weight: 0.0,
                };
                queue.push((left, depth + 1, left_rows));
                queue.push((right, depth + 1, right_rows));
            }
        }
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand_chacha::rand_core::SeedableRng;

    fn toy_problem(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x0: f64 = rng.gen_range(-2.0..2.0);
            let x1: f64 = rng.gen_range(-2.0..2.0);
            let noise: f64 = rng.gen_range(-0.3..0.3);
            rows.push(vec![x0, x1, rng.gen_range(-1.0..1.0)]);
            labels.push(x0 + 0.5 * x1 + noise > 0.0);
        }
        (rows, labels)
    }

    #[test]
    fn learns_a_linear_boundary() {
        let (rows, labels) = toy_problem(2000, 1);
        let model = GbdtModel::fit(&rows, &labels, &GbdtParams::default());
        let (test_rows, test_labels) = toy_problem(500, 2);
        let correct = test_rows
            .iter()
            .zip(&test_labels)
            .filter(|(r, &y)| (model.predict_proba(r) >= 0.5) == y)
            .count();
        assert!(correct >= 450, "accuracy {}/500", correct);
    }

    #[test]
    fn training_is_deterministic() {
        let (rows, labels) = toy_problem(300, 3);
        let a = GbdtModel::fit(&rows, &labels, &GbdtParams::default());
        let b = GbdtModel::fit(&rows, &labels, &GbdtParams::default());
        assert_eq!(a, b);
        for r in rows.iter().take(20) {
            assert_eq!(a.predict_proba(r).to_bits(), b.predict_proba(r).to_bits());
        }
    }

    #[test]
    fn persistence_round_trips_bit_exactly() {
        let (rows, labels) = toy_problem(300, 4);
        let model = GbdtModel::fit(&rows, &labels, &GbdtParams::default());
        let json = serde_json::to_string(&model).unwrap();
        let back: GbdtModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        for r in rows.iter().take(50) {
            assert_eq!(
                model.predict_proba(r).to_bits(),
                back.predict_proba(r).to_bits()
            );
        }
    }

    #[test]
    fn binned_and_raw_evaluation_agree() {
        let (rows, labels) = toy_problem(400, 5);
        let params = GbdtParams {
            rounds: 15,
            ..GbdtParams::default()
        };
        let model = GbdtModel::fit(&rows, &labels, &params);
        // Refitting on the same data must leave margins consistent: spot
        // check that probabilities are calibrated-ish on training data.
        let mean_pos: f64 = rows
            .iter()
            .zip(&labels)
            .filter(|(_, &y)| y)
            .map(|(r, _)| model.predict_proba(r))
            .sum::<f64>()
            / labels.iter().filter(|&&y| y).count() as f64;
        let mean_neg: f64 = rows
            .iter()
            .zip(&labels)
            .filter(|(_, &y)| !y)
            .map(|(r, _)| model.predict_proba(r))
            .sum::<f64>()
            / labels.iter().filter(|&&y| !y).count() as f64;
        assert!(mean_pos > mean_neg + 0.2);
    }
}
