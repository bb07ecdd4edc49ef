//! Boosted models: discrete AdaBoost over stumps and gradient-boosted
//! regression trees with logistic loss. Both default to a 0.01 learning rate.

use super::tree::{Tree, TreeParams};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdaBoost {
    pub stumps: Vec<Tree>,
    pub alphas: Vec<f64>,
    pub learning_rate: f64,
}

impl AdaBoost {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[u8],
        n_rounds: usize,
        learning_rate: f64,
        seed: u64,
    ) -> AdaBoost {
        let n = rows.len();
        let mut weights = vec![1.0 / n as f64; n];
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let params = TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        };
        let mut stumps = Vec::new();
        let mut alphas = Vec::new();
        for _ in 0..n_rounds {
            let stump = Tree::fit(rows, labels, &weights, params, &mut rng);
            let err: f64 = rows
                .iter()
                .zip(labels)
                .zip(&weights)
                .filter(|((x, y), _)| stump.predict(x) != **y)
                .map(|(_, w)| *w)
                .sum();
            if err >= 0.5 {
                // The weak learner stopped helping; keep what we have.
                if stumps.is_empty() {
                    stumps.push(stump);
                    alphas.push(1.0);
                }
                break;
            }
            let bounded = err.max(1e-10);
            let alpha = learning_rate * ((1.0 - bounded) / bounded).ln();
            for ((x, y), w) in rows.iter().zip(labels).zip(weights.iter_mut()) {
                if stump.predict(x) != *y {
                    *w *= alpha.exp();
                }
            }
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            stumps.push(stump);
            alphas.push(alpha);
            if err <= 1e-10 {
                break;
            }
        }
        AdaBoost {
            stumps,
            alphas,
            learning_rate,
        }
    }

    /// Positive share of the weighted stump vote, in [0, 1].
    pub fn score(&self, x: &[f64]) -> f64 {
        let total: f64 = self.alphas.iter().sum();
        if total <= 0.0 {
            return 0.5;
        }
        let positive: f64 = self
            .stumps
            .iter()
            .zip(&self.alphas)
            .filter(|(s, _)| s.predict(x) == 1)
            .map(|(_, a)| *a)
            .sum();
        positive / total
    }
}

/// Regression tree for gradient boosting: variance-reduction splits on the
/// residuals, Newton-step leaf values for the logistic loss.
#[derive(Clone, Debug, Serialize, Deserialize)]
enum RegNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RegTree {
    nodes: Vec<RegNode>,
}

impl RegTree {
    fn fit(rows: &[Vec<f64>], residual: &[f64], hessian: &[f64], max_depth: usize) -> RegTree {
        let mut t = RegTree { nodes: Vec::new() };
        let idx: Vec<usize> = (0..rows.len()).collect();
        t.grow(rows, residual, hessian, idx, 0, max_depth);
        t
    }

    fn grow(
        &mut self,
        rows: &[Vec<f64>],
        residual: &[f64],
        hessian: &[f64],
        idx: Vec<usize>,
        depth: usize,
        max_depth: usize,
    ) -> usize {
        let leaf_value = |ids: &[usize]| -> f64 {
            let num: f64 = ids.iter().map(|&i| residual[i]).sum();
            let den: f64 = ids.iter().map(|&i| hessian[i]).sum();
            if den <= 1e-12 {
                0.0
            } else {
                (num / den).clamp(-4.0, 4.0)
            }
        };
        if depth >= max_depth || idx.len() < 2 {
            let value = leaf_value(&idx);
            self.nodes.push(RegNode::Leaf { value });
            return self.nodes.len() - 1;
        }
        let Some((feature, threshold)) = best_mse_split(rows, residual, &idx) else {
            let value = leaf_value(&idx);
            self.nodes.push(RegNode::Leaf { value });
            return self.nodes.len() - 1;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| rows[i][feature] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(RegNode::Leaf { value: 0.0 });
        let left = self.grow(rows, residual, hessian, l, depth + 1, max_depth);
        let right = self.grow(rows, residual, hessian, r, depth + 1, max_depth);
        self.nodes[slot] = RegNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn best_mse_split(rows: &[Vec<f64>], residual: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
    let n_features = rows[0].len();
    let total_sum: f64 = idx.iter().map(|&i| residual[i]).sum();
    let total_n = idx.len() as f64;
    let mut best = None;
    let mut best_gain = 1e-12;
    let mut sorted: Vec<usize> = Vec::with_capacity(idx.len());
    for feature in 0..n_features {
        sorted.clear();
        sorted.extend_from_slice(idx);
        sorted.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]));
        let mut left_sum = 0.0;
        for k in 0..sorted.len() - 1 {
            let i = sorted[k];
            left_sum += residual[i];
            let v = rows[i][feature];
            let v_next = rows[sorted[k + 1]][feature];
            if v == v_next {
                continue;
            }
            let left_n = (k + 1) as f64;
            let right_n = total_n - left_n;
            let right_sum = total_sum - left_sum;
            // Variance reduction up to constants: sum^2/n on each side.
            let gain = left_sum * left_sum / left_n + right_sum * right_sum / right_n
                - total_sum * total_sum / total_n;
            if gain > best_gain {
                best_gain = gain;
                best = Some((feature, 0.5 * (v + v_next)));
            }
        }
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradientBoosting {
    base: f64,
    trees: Vec<RegTree>,
    pub learning_rate: f64,
}

impl GradientBoosting {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[u8],
        n_rounds: usize,
        max_depth: usize,
        learning_rate: f64,
    ) -> GradientBoosting {
        let n = rows.len() as f64;
        let pos: f64 = labels.iter().filter(|&&y| y == 1).count() as f64;
        let prior = (pos / n).clamp(1e-6, 1.0 - 1e-6);
        let base = (prior / (1.0 - prior)).ln();
        let mut margin = vec![base; rows.len()];
        let mut trees = Vec::with_capacity(n_rounds);
        for _ in 0..n_rounds {
            let mut residual = Vec::with_capacity(rows.len());
            let mut hessian = Vec::with_capacity(rows.len());
            for (m, y) in margin.iter().zip(labels) {
                let p = sigmoid(*m);
                residual.push(*y as f64 - p);
                hessian.push((p * (1.0 - p)).max(1e-6));
            }
            let tree = RegTree::fit(rows, &residual, &hessian, max_depth);
            for (m, x) in margin.iter_mut().zip(rows) {
                *m += learning_rate * tree.eval(x);
            }
            trees.push(tree);
        }
        GradientBoosting {
            base,
            trees,
            learning_rate,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let margin: f64 =
            self.base + self.learning_rate * self.trees.iter().map(|t| t.eval(x)).sum::<f64>();
        sigmoid(margin)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}
