use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cfforest::EnsembleF64;

use crate::error::{BenchError, Result};

/// A query point with the class it should be moved to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: usize,
    /// Source row, if sampled from a dataset.
    pub row: Option<usize>,
    pub point: Vec<f64>,
    pub target: usize,
}

/// Draws `n` distinct rows without replacement.
///
/// Binary tasks target the opposite of the ensemble's prediction; with more
/// classes the target is uniform over the other classes.
pub fn sample_queries(rows: &[Vec<f64>], ens: &EnsembleF64, n: usize, seed: u64) -> Result<Vec<Query>> {
    if rows.len() < n {
        return Err(BenchError::Config(format!(
            "dataset has {} rows, {n} queries requested",
            rows.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, rows.len(), n).into_vec();
    Ok(picked
        .into_iter()
        .enumerate()
        .map(|(id, r)| {
            let point = rows[r].clone();
            let predicted = ens.predict(&point).label;
            let target = if ens.n_classes == 2 {
                1 - predicted
            } else {
                let k = rng.gen_range(0..ens.n_classes - 1);
                if k >= predicted {
                    k + 1
                } else {
                    k
                }
            };
            Query {
                id,
                row: Some(r),
                point,
                target,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfforest::synth::{gaussian_blobs, train_forest, ForestConfig};
    use std::collections::BTreeSet;

    fn forest(classes: usize) -> (Vec<Vec<f64>>, EnsembleF64) {
        let data = gaussian_blobs(60, 2, classes, 1.0, 4);
        let e = train_forest(
            &data,
            &ForestConfig {
                n_trees: 3,
                max_depth: 3,
                ..ForestConfig::default()
            },
        );
        (data.rows, e)
    }

    #[test]
    fn distinct_and_deterministic() {
        let (rows, e) = forest(2);
        let rows = rows[..12].to_vec();
        let a = sample_queries(&rows, &e, 5, 0).unwrap();
        let b = sample_queries(&rows, &e, 5, 0).unwrap();
        assert_eq!(a, b);
        let distinct: BTreeSet<_> = a.iter().map(|q| q.row).collect();
        assert_eq!(distinct.len(), 5);
        assert!(sample_queries(&rows, &e, 13, 0).is_err());
    }

    #[test]
    fn binary_targets_flip_the_prediction() {
        let (rows, e) = forest(2);
        for q in sample_queries(&rows, &e, 20, 1).unwrap() {
            assert_eq!(q.target, 1 - e.predict(&q.point).label);
        }
    }

    #[test]
    fn multiclass_targets_avoid_the_prediction() {
        let (rows, e) = forest(3);
        let qs = sample_queries(&rows, &e, 40, 2).unwrap();
        for q in &qs {
            assert!(q.target < 3 && q.target != e.predict(&q.point).label);
        }
        let targets: BTreeSet<_> = qs.iter().map(|q| q.target).collect();
        assert_eq!(targets.len(), 3);
    }
}
