//! Minority oversampling: synthetic rows on segments between a minority
//! sample and one of its k nearest minority neighbors.

use super::Dataset;
use crate::error::MlError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub const DEFAULT_K: usize = 5;

/// Balance the two classes by synthesizing minority rows until the counts
/// match. Already-balanced data is returned unchanged.
pub fn smote_balance(data: &Dataset, k_neighbors: usize, seed: u64) -> Result<Dataset, MlError> {
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let (zeros, ones) = data.class_counts();
    if zeros == ones {
        return Ok(data.clone());
    }
    let minority_label: u8 = if zeros < ones { 0 } else { 1 };
    let minority: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] == minority_label)
        .collect();
    if minority.len() < 2 {
        return Err(MlError::MinorityTooSmall(minority.len()));
    }
    let need = zeros.abs_diff(ones);
    let k = k_neighbors.min(minority.len() - 1);

    // Neighbor lists among minority rows, by squared Euclidean distance.
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(minority.len());
    for &i in &minority {
        let mut dists: Vec<(f64, usize)> = minority
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| (sq_dist(&data.rows[i], &data.rows[j]), j))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        neighbors.push(dists.into_iter().take(k).map(|(_, j)| j).collect());
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for _ in 0..need {
        let pick = rng.gen_range(0..minority.len());
        let i = minority[pick];
        let j = neighbors[pick][rng.gen_range(0..neighbors[pick].len())];
        let u: f64 = rng.gen();
        out.push_row(interpolate(&data.rows[i], &data.rows[j], u), minority_label)
            .expect("synthetic row matches schema");
    }
    Ok(out)
}

/// Point at fraction `u` along the segment from `a` to `b`.
pub fn interpolate(a: &[f64], b: &[f64], u: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imbalanced(n_major: usize, n_minor: usize) -> Dataset {
        let mut d = Dataset::new(vec!["a".into(), "b".into()]);
        for i in 0..n_major {
            d.push_row(vec![i as f64, 0.0], 0).unwrap();
        }
        for i in 0..n_minor {
            d.push_row(vec![i as f64, 10.0], 1).unwrap();
        }
        d
    }

    #[test]
    fn balances_80_20() {
        let d = imbalanced(80, 20);
        let balanced = smote_balance(&d, DEFAULT_K, 0).unwrap();
        assert_eq!(balanced.class_counts(), (80, 80));
        assert_eq!(balanced.len(), 160);
    }

    #[test]
    fn balanced_input_unchanged() {
        let d = imbalanced(30, 30);
        let same = smote_balance(&d, DEFAULT_K, 0).unwrap();
        assert_eq!(same.len(), d.len());
        assert_eq!(same.rows, d.rows);
    }

    #[test]
    fn midpoint_interpolation() {
        assert_eq!(interpolate(&[0.0, 0.0], &[2.0, 2.0], 0.5), vec![1.0, 1.0]);
    }

    #[test]
    fn synthetic_rows_lie_on_segments() {
        let d = imbalanced(40, 6);
        let balanced = smote_balance(&d, 3, 7).unwrap();
        for row in &balanced.rows[46..] {
            // Minority rows all have b = 10, so any convex combination does too.
            assert_eq!(row[1], 10.0);
            assert!(row[0] >= 0.0 && row[0] <= 5.0);
        }
    }

    #[test]
    fn tiny_minority_rejected() {
        let d = imbalanced(10, 1);
        assert_eq!(
            smote_balance(&d, DEFAULT_K, 0).unwrap_err(),
            MlError::MinorityTooSmall(1)
        );
    }
}
