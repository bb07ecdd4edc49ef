//! CART-style decision tree with gini splits, sample weights y feature
//! subsampling. Splitting is fully deterministic for a fixed seed: features
//! are scanned in index order, thresholds are midpoints of consecutive
//! distinct values, and ties keep the first candidate.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Weighted fraction of positive samples in the leaf.
        prob: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` scans all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

impl Tree {
    /// Single-leaf tree with a fixed score; handy for composing test models.
    pub fn constant(prob: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { prob }],
        }
    }

    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[u8],
        weights: &[f64],
        params: TreeParams,
        rng: &mut ChaCha12Rng,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let idx: Vec<usize> = (0..rows.len()).collect();
        tree.grow(rows, labels, weights, idx, 0, params, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &mut self,
        rows: &[Vec<f64>],
        labels: &[u8],
        weights: &[f64],
        idx: Vec<usize>,
        depth: usize,
        params: TreeParams,
        rng: &mut ChaCha12Rng,
    ) -> usize {
        let total: f64 = idx.iter().map(|&i| weights[i]).sum();
        let pos: f64 = idx
            .iter()
            .filter(|&&i| labels[i] == 1)
            .map(|&i| weights[i])
            .sum();
        let prob = if total > 0.0 { pos / total } else { 0.5 };

        let pure = prob <= f64::EPSILON || prob >= 1.0 - f64::EPSILON;
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || idx.len() < params.min_samples_split {
            self.nodes.push(Node::Leaf { prob });
            return self.nodes.len() - 1;
        }

        let Some((feature, threshold)) = best_split(rows, labels, weights, &idx, params, rng)
        else {
            self.nodes.push(Node::Leaf { prob });
            return self.nodes.len() - 1;
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| rows[i][feature] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { prob }); // placeholder
        let left = self.grow(rows, labels, weights, left_idx, depth + 1, params, rng);
        let right = self.grow(rows, labels, weights, right_idx, depth + 1, params, rng);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { prob } => return *prob,
                Node::Split {
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

    /// Hard class vote: positive when the leaf fraction reaches 0.5.
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.5)
    }
}

/// Best (feature, threshold) by weighted gini gain, or `None` when nothing
/// improves on the parent node.
fn best_split(
    rows: &[Vec<f64>],
    labels: &[u8],
    weights: &[f64],
    idx: &[usize],
    params: TreeParams,
    rng: &mut ChaCha12Rng,
) -> Option<(usize, f64)> {
    let n_features = rows[0].len();
    let feature_pool: Vec<usize> = match params.max_features {
        Some(m) if m < n_features => {
            let mut pool: Vec<usize> = (0..n_features).collect();
            pool.shuffle(rng);
            pool.truncate(m);
            pool.sort_unstable();
            pool
        }
        _ => (0..n_features).collect(),
    };

    let total_w: f64 = idx.iter().map(|&i| weights[i]).sum();
    let total_pos: f64 = idx
        .iter()
        .filter(|&&i| labels[i] == 1)
        .map(|&i| weights[i])
        .sum();
    let parent = gini(total_pos, total_w);

    let mut best: Option<(usize, f64)> = None;
    let mut best_gain = 1e-12;
    let mut sorted: Vec<usize> = Vec::with_capacity(idx.len());
    for &feature in &feature_pool {
        sorted.clear();
        sorted.extend_from_slice(idx);
        sorted.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]));

        let mut left_w = 0.0;
        let mut left_pos = 0.0;
        let mut left_n = 0usize;
        for k in 0..sorted.len() - 1 {
            let i = sorted[k];
            left_w += weights[i];
            left_pos += if labels[i] == 1 { weights[i] } else { 0.0 };
            left_n += 1;
            let v = rows[i][feature];
            let v_next = rows[sorted[k + 1]][feature];
            if v == v_next {
                continue;
            }
            if left_n < params.min_samples_leaf || sorted.len() - left_n < params.min_samples_leaf {
                continue;
            }
            let right_w = total_w - left_w;
            let right_pos = total_pos - left_pos;
            let weighted =
                (left_w * gini(left_pos, left_w) + right_w * gini(right_pos, right_w)) / total_w;
            let gain = parent - weighted;
            if gain > best_gain {
                best_gain = gain;
                best = Some((feature, 0.5 * (v + v_next)));
            }
        }
    }
    best
}

#[inline]
fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}
