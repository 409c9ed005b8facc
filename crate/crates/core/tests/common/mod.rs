#![allow(dead_code)]

use cfforest::synth::{random_ensemble, random_point, RandomEnsembleConfig};
use cfforest::{EnsembleF64, SplitSemantics, Voting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random ensemble, a query inside its bounds, and a target other than
/// the query's predicted class.
pub struct Instance {
    pub ensemble: EnsembleF64,
    pub query: Vec<f64>,
    pub target: usize,
}

pub fn instance(cfg: &RandomEnsembleConfig) -> Instance {
    let ensemble: EnsembleF64 = random_ensemble(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let query = random_point(&ensemble.features, &mut rng);
    let label = ensemble.predict(&query).label;
    let k = rng.gen_range(0..ensemble.n_classes - 1);
    let target = if k >= label { k + 1 } else { k };
    Instance {
        ensemble,
        query,
        target,
    }
}

/// Small mixed instances: up to 8 trees of depth 3 over at most five
/// numerical features, one ordinal and a three-member one-hot group.
pub fn small_config(seed: u64) -> RandomEnsembleConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RandomEnsembleConfig {
        n_trees: rng.gen_range(2..=8),
        max_depth: rng.gen_range(1..=3),
        n_numerical: rng.gen_range(1..=5),
        n_ordinal: rng.gen_range(0..=1),
        category_size: if rng.gen_bool(0.5) { 3 } else { 0 },
        n_classes: if rng.gen_bool(0.8) { 2 } else { 3 },
        voting: if rng.gen_bool(0.5) { Voting::Hard } else { Voting::Soft },
        semantics: if rng.gen_bool(0.5) {
            SplitSemantics::LeftClosed
        } else {
            SplitSemantics::RightOpen
        },
        threshold_grid: 9,
        seed,
    }
}

/// Instances whose WCNF encoding stays within enumeration reach.
pub fn tiny_config(seed: u64) -> RandomEnsembleConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RandomEnsembleConfig {
        n_trees: rng.gen_range(1..=3),
        max_depth: rng.gen_range(1..=2),
        n_numerical: rng.gen_range(1..=2),
        n_ordinal: 0,
        category_size: 0,
        n_classes: 2,
        voting: if rng.gen_bool(0.5) { Voting::Hard } else { Voting::Soft },
        semantics: if rng.gen_bool(0.5) {
            SplitSemantics::LeftClosed
        } else {
            SplitSemantics::RightOpen
        },
        threshold_grid: 4,
        seed,
    }
}
