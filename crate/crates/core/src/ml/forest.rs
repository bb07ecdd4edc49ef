//! Bagged random forest over CART trees. Scores are hard-vote fractions:
//! the share of member trees whose leaf reaches the positive class.

use super::tree::{Tree, TreeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[u8],
        n_trees: usize,
        max_depth: Option<usize>,
        seed: u64,
    ) -> Forest {
        let n = rows.len();
        let n_features = rows[0].len();
        let max_features = (n_features as f64).sqrt().round().max(1.0) as usize;
        let params = TreeParams {
            max_depth,
            max_features: Some(max_features),
            ..TreeParams::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let weights = vec![1.0; n];
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            // Bootstrap sample with replacement.
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let boot_rows: Vec<Vec<f64>> = sample.iter().map(|&i| rows[i].clone()).collect();
            let boot_labels: Vec<u8> = sample.iter().map(|&i| labels[i]).collect();
            trees.push(Tree::fit(
                &boot_rows,
                &boot_labels,
                &weights,
                params,
                &mut rng,
            ));
        }
        Forest { trees }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let votes: usize = self.trees.iter().map(|t| t.predict(x) as usize).sum();
        votes as f64 / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_fraction_semantics() {
        let forest = Forest {
            trees: vec![
                Tree::constant(1.0),
                Tree::constant(1.0),
                Tree::constant(1.0),
            ],
        };
        assert_eq!(forest.score(&[0.0]), 1.0);
        let mixed = Forest {
            trees: vec![
                Tree::constant(0.9),
                Tree::constant(0.8),
                Tree::constant(0.1),
            ],
        };
        assert!((mixed.score(&[0.0]) - 2.0 / 3.0).abs() < 1e-15);
        let negative = Forest {
            trees: vec![Tree::constant(0.0), Tree::constant(0.2)],
        };
        assert_eq!(negative.score(&[0.0]), 0.0);
    }

    #[test]
    fn learns_a_simple_boundary() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let v = i as f64 / 60.0;
            rows.push(vec![v, (i % 7) as f64]);
            labels.push(u8::from(v > 0.5));
        }
        let forest = Forest::fit(&rows, &labels, 25, None, 3);
        let acc = rows
            .iter()
            .zip(&labels)
            .filter(|(x, y)| u8::from(forest.score(x) >= 0.5) == **y)
            .count() as f64
            / rows.len() as f64;
        assert!(acc > 0.95, "forest accuracy {acc}");
    }
}
