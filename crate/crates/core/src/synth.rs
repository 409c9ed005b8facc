//! Synthetic data, ensembles and isolation forests for tests and benchmarks.
//!
//! Random ensembles draw thresholds from a coarse grid so that trees share
//! split points, as trained forests do on discretized data. Trained forests
//! are extremely randomized trees grown on Gaussian class blobs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{Child, Ensemble, Leaf, Node, SplitSemantics, Tree, Voting};
use crate::error::Result;
use crate::feature_space::{Actionability, FeatureKind, FeatureSpace, FeatureSpec};
use crate::plausibility::{correction_c, IsolationModel};
use crate::scalar::Scalar;

fn spec<T: Scalar>(name: String, kind: FeatureKind, lb: f64, ub: f64, grid: Option<Vec<f64>>) -> FeatureSpec<T> {
    let (lb, ub) = (T::of(lb), T::of(ub));
    FeatureSpec {
        name,
        kind,
        lb,
        ub,
        group: None,
        ordinal_grid: grid.map(|g| g.into_iter().map(T::of).collect()),
        actionability: Actionability::Free,
        alpha: FeatureSpec::default_alpha(kind, lb, ub),
    }
}

/// Incremental tree builder that records leaf depths.
struct TreeBuilder<T> {
    nodes: Vec<Node<T>>,
    leaves: Vec<Leaf<T>>,
}

impl<T: Scalar> TreeBuilder<T> {
    fn new() -> Self {
        TreeBuilder {
            nodes: Vec::new(),
            leaves: Vec::new(),
        }
    }

    fn leaf(&mut self, scores: Vec<T>, n_samples: u64, depth: usize) -> Child {
        self.leaves.push(Leaf {
            scores,
            n_samples,
            depth,
        });
        Child::Leaf(self.leaves.len() - 1)
    }

    /// Reserves a node slot; children are patched in by [`Self::set`].
    fn node(&mut self, feature: usize, threshold: T) -> usize {
        self.nodes.push(Node {
            feature,
            threshold,
            left: Child::Leaf(usize::MAX),
            right: Child::Leaf(usize::MAX),
        });
        self.nodes.len() - 1
    }

    fn set(&mut self, n: usize, left: Child, right: Child) {
        self.nodes[n].left = left;
        self.nodes[n].right = right;
    }

    fn finish(self, root: Child) -> Tree<T> {
        Tree {
            nodes: self.nodes,
            leaves: self.leaves,
            root,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomEnsembleConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Numerical features on `[0, 10]`.
    pub n_numerical: usize,
    /// Ordinal features on the grid `{0, 1, ..., 5}`.
    pub n_ordinal: usize,
    /// Members of one one-hot group; `0` for none, otherwise at least 2.
    pub category_size: usize,
    pub n_classes: usize,
    pub voting: Voting,
    pub semantics: SplitSemantics,
    /// Candidate thresholds per numerical feature.
    pub threshold_grid: usize,
    pub seed: u64,
}

impl Default for RandomEnsembleConfig {
    fn default() -> Self {
        RandomEnsembleConfig {
            n_trees: 4,
            max_depth: 3,
            n_numerical: 3,
            n_ordinal: 0,
            category_size: 0,
            n_classes: 2,
            voting: Voting::Soft,
            semantics: SplitSemantics::LeftClosed,
            threshold_grid: 9,
            seed: 0,
        }
    }
}

pub fn random_feature_space<T: Scalar>(cfg: &RandomEnsembleConfig) -> FeatureSpace<T> {
    let mut specs = Vec::new();
    for i in 0..cfg.n_numerical {
        specs.push((spec(format!("x{i}"), FeatureKind::Numerical, 0.0, 10.0, None), None));
    }
    for i in 0..cfg.n_ordinal {
        let grid = (0..=5).map(f64::from).collect();
        specs.push((spec(format!("o{i}"), FeatureKind::Ordinal, 0.0, 5.0, Some(grid)), None));
    }
    for j in 0..cfg.category_size {
        specs.push((
            spec(format!("cat_{j}"), FeatureKind::CategoricalMember, 0.0, 1.0, None),
            Some("cat".to_string()),
        ));
    }
    FeatureSpace::new(specs).expect("synthetic feature space is valid")
}

/// A random ensemble over [`random_feature_space`].
pub fn random_ensemble<T: Scalar>(cfg: &RandomEnsembleConfig) -> Ensemble<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let features = random_feature_space::<T>(cfg);
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let mut b = TreeBuilder::new();
        let root = grow_random(&mut b, &mut rng, cfg, &features, 0);
        trees.push(b.finish(root));
    }
    let w = match cfg.voting {
        Voting::Hard => 1.0,
        Voting::Soft => 1.0 / cfg.n_trees as f64,
    };
    Ensemble {
        trees,
        weights: vec![T::of(w); cfg.n_trees],
        base_scores: vec![T::zero(); cfg.n_classes],
        voting: cfg.voting,
        semantics: cfg.semantics,
        n_classes: cfg.n_classes,
        features,
        isolation: None,
    }
}

fn random_threshold<T: Scalar>(
    rng: &mut ChaCha8Rng,
    cfg: &RandomEnsembleConfig,
    fs: &FeatureSpace<T>,
    f: usize,
) -> f64 {
    let s = &fs.features[f];
    match s.kind {
        FeatureKind::Numerical => {
            let (lb, ub) = (s.lb.as_f64(), s.ub.as_f64());
            let j = rng.gen_range(1..=cfg.threshold_grid.max(1));
            lb + (ub - lb) * j as f64 / (cfg.threshold_grid.max(1) + 1) as f64
        }
        // Integer thresholds exercise boundary semantics, half-integers do not.
        FeatureKind::Ordinal => {
            let k = rng.gen_range(0..5) as f64;
            if rng.gen_bool(0.5) {
                k + 0.5
            } else {
                k + 1.0
            }
        }
        FeatureKind::Binary | FeatureKind::CategoricalMember => 0.5,
    }
}

fn grow_random<T: Scalar>(
    b: &mut TreeBuilder<T>,
    rng: &mut ChaCha8Rng,
    cfg: &RandomEnsembleConfig,
    fs: &FeatureSpace<T>,
    depth: usize,
) -> Child {
    let split = depth < cfg.max_depth && (depth == 0 || rng.gen_bool(0.75));
    if !split {
        let scores = random_scores(rng, cfg);
        let n = rng.gen_range(1..=20);
        return b.leaf(scores, n, depth);
    }
    let f = rng.gen_range(0..fs.len());
    let tau = random_threshold(rng, cfg, fs, f);
    let n = b.node(f, T::of(tau));
    let left = grow_random(b, rng, cfg, fs, depth + 1);
    let right = grow_random(b, rng, cfg, fs, depth + 1);
    b.set(n, left, right);
    Child::Node(n)
}

fn random_scores<T: Scalar>(rng: &mut ChaCha8Rng, cfg: &RandomEnsembleConfig) -> Vec<T> {
    let k = cfg.n_classes;
    match cfg.voting {
        Voting::Hard => {
            let c = rng.gen_range(0..k);
            (0..k).map(|y| if y == c { T::one() } else { T::zero() }).collect()
        }
        Voting::Soft => {
            // Counts out of 20 keep probabilities exact in decimal.
            let mut counts = vec![0u32; k];
            for _ in 0..20 {
                counts[rng.gen_range(0..k)] += 1;
            }
            counts.iter().map(|&c| T::of(f64::from(c) / 20.0)).collect()
        }
    }
}

/// A random valid point of `fs`.
pub fn random_point<T: Scalar>(fs: &FeatureSpace<T>, rng: &mut impl Rng) -> Vec<T> {
    let mut x: Vec<T> = fs
        .features
        .iter()
        .map(|s| match s.kind {
            FeatureKind::Numerical => {
                let v = rng.gen_range(s.lb.as_f64()..=s.ub.as_f64());
                // Occasionally land exactly on a round value to hit boundaries.
                T::of(if rng.gen_bool(0.2) { v.round() } else { v })
            }
            FeatureKind::Ordinal | FeatureKind::Binary => {
                let g = s.ordinal_grid.as_ref().expect("grid features have grids");
                g[rng.gen_range(0..g.len())]
            }
            FeatureKind::CategoricalMember => T::zero(),
        })
        .collect();
    for g in &fs.groups {
        x[*g.members.choose(rng).expect("non-empty group")] = T::one();
    }
    x
}

/// Labelled rows with per-feature bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub bounds: Vec<(f64, f64)>,
}

impl Dataset {
    pub fn n_features(&self) -> usize {
        self.bounds.len()
    }

    /// Numerical features bounded by the data range.
    pub fn feature_space<T: Scalar>(&self) -> FeatureSpace<T> {
        let specs = self
            .bounds
            .iter()
            .enumerate()
            .map(|(i, &(lb, ub))| (spec(format!("x{i}"), FeatureKind::Numerical, lb, ub, None), None))
            .collect();
        FeatureSpace::new(specs).expect("dataset bounds are valid")
    }
}

/// Gaussian class blobs with centres in `[0, 10]^d`, values rounded to `1e-3`.
pub fn gaussian_blobs(n_rows: usize, n_features: usize, n_classes: usize, spread: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..n_features).map(|_| rng.gen_range(2.0..8.0)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let y = i % n_classes;
        let row: Vec<f64> = centres[y]
            .iter()
            .map(|&c| {
                let v: f64 = c + spread * standard_normal(&mut rng);
                (v * 1000.0).round() / 1000.0
            })
            .collect();
        rows.push(row);
        labels.push(y);
    }
    let bounds = (0..n_features)
        .map(|f| {
            let lo = rows.iter().map(|r| r[f]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r[f]).fold(f64::NEG_INFINITY, f64::max);
            (lo.floor(), hi.ceil())
        })
        .collect();
    Dataset {
        rows,
        labels,
        n_classes,
        bounds,
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub voting: Voting,
    pub semantics: SplitSemantics,
    /// Random split candidates scored per node.
    pub candidates: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 10,
            max_depth: 5,
            voting: Voting::Soft,
            semantics: SplitSemantics::LeftClosed,
            candidates: 3,
            min_samples_split: 4,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Extremely randomized trees: per node, `candidates` random (feature,
/// uniform threshold) pairs, the best by Gini impurity decrease wins.
pub fn train_forest(data: &Dataset, cfg: &ForestConfig) -> Ensemble<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = data.rows.len();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let idx: Vec<usize> = if cfg.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut b = TreeBuilder::new();
        let root = grow_trained(&mut b, &mut rng, data, cfg, idx, 0);
        trees.push(b.finish(root));
    }
    let w = match cfg.voting {
        Voting::Hard => 1.0,
        Voting::Soft => 1.0 / cfg.n_trees as f64,
    };
    Ensemble {
        trees,
        weights: vec![w; cfg.n_trees],
        base_scores: vec![0.0; data.n_classes],
        voting: cfg.voting,
        semantics: cfg.semantics,
        n_classes: data.n_classes,
        features: data.feature_space(),
        isolation: None,
    }
}

fn class_counts(data: &Dataset, idx: &[usize]) -> Vec<usize> {
    let mut c = vec![0; data.n_classes];
    for &i in idx {
        c[data.labels[i]] += 1;
    }
    c
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

fn grow_trained(
    b: &mut TreeBuilder<f64>,
    rng: &mut ChaCha8Rng,
    data: &Dataset,
    cfg: &ForestConfig,
    idx: Vec<usize>,
    depth: usize,
) -> Child {
    let counts = class_counts(data, &idx);
    let n = idx.len();
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let leaf = |b: &mut TreeBuilder<f64>, counts: &[usize]| {
        let scores = match cfg.voting {
            Voting::Soft => counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect(),
            Voting::Hard => {
                let best = (0..counts.len()).fold(0, |a, y| if counts[y] > counts[a] { y } else { a });
                (0..counts.len()).map(|y| if y == best { 1.0 } else { 0.0 }).collect()
            }
        };
        b.leaf(scores, n as u64, depth)
    };
    if depth >= cfg.max_depth || n < cfg.min_samples_split || pure {
        return leaf(b, &counts);
    }
    let parent = gini(&counts, n);
    let mut best: Option<(f64, usize, f64)> = None;
    for _ in 0..cfg.candidates.max(1) {
        let f = rng.gen_range(0..data.n_features());
        let lo = idx.iter().map(|&i| data.rows[i][f]).fold(f64::INFINITY, f64::min);
        let hi = idx.iter().map(|&i| data.rows[i][f]).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 2e-3 {
            continue;
        }
        let tau = ((rng.gen_range(lo..hi)) * 1000.0).round() / 1000.0;
        let tau = tau.clamp(lo + 1e-3, hi - 1e-3);
        let mut lc = vec![0; data.n_classes];
        let mut ln = 0;
        for &i in &idx {
            if cfg.semantics.goes_left(data.rows[i][f], tau) {
                lc[data.labels[i]] += 1;
                ln += 1;
            }
        }
        if ln == 0 || ln == n {
            continue;
        }
        let rc: Vec<usize> = counts.iter().zip(&lc).map(|(a, l)| a - l).collect();
        let gain = parent
            - (ln as f64 / n as f64) * gini(&lc, ln)
            - ((n - ln) as f64 / n as f64) * gini(&rc, n - ln);
        if best.is_none_or(|(g, _, _)| gain > g) {
            best = Some((gain, f, tau));
        }
    }
    let Some((_, f, tau)) = best else {
        return leaf(b, &counts);
    };
    let (li, ri): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| cfg.semantics.goes_left(data.rows[i][f], tau));
    let node = b.node(f, tau);
    let left = grow_trained(b, rng, data, cfg, li, depth + 1);
    let right = grow_trained(b, rng, data, cfg, ri, depth + 1);
    b.set(node, left, right);
    Child::Node(node)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsolationConfig {
    pub n_trees: usize,
    pub max_samples: usize,
    pub contamination: f64,
    pub semantics: SplitSemantics,
    pub seed: u64,
}

impl Default for IsolationConfig {
    fn default() -> Self {
        IsolationConfig {
            n_trees: 100,
            max_samples: 256,
            contamination: 0.1,
            semantics: SplitSemantics::LeftClosed,
            seed: 0,
        }
    }
}

/// Isolation forest on `rows`; the offset is the `contamination` quantile of
/// the training scores so that that fraction of rows is declared anomalous.
pub fn train_isolation_forest(rows: &[Vec<f64>], cfg: &IsolationConfig) -> Result<IsolationModel<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let psi = cfg.max_samples.min(rows.len()).max(2);
    let limit = (psi as f64).log2().ceil() as usize;
    let all: Vec<usize> = (0..rows.len()).collect();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let sample: Vec<usize> = all.choose_multiple(&mut rng, psi).copied().collect();
        let mut b = TreeBuilder::new();
        let root = grow_isolation(&mut b, &mut rng, rows, cfg.semantics, sample, 0, limit);
        trees.push(b.finish(root));
    }
    let provisional = IsolationModel::new(trees, psi as u64, -0.5, cfg.contamination)?;
    let mut scores: Vec<f64> = rows.iter().map(|r| provisional.score(r)).collect();
    scores.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let pos = ((scores.len() - 1) as f64 * cfg.contamination).round() as usize;
    let offset = scores[pos].clamp(-1.0 + 1e-9, -1e-9);
    let m = IsolationModel::from_parts(
        provisional.trees,
        provisional.path_lengths,
        correction_c(psi as u64),
        psi as u64,
        offset,
        cfg.contamination,
    )?;
    Ok(m.with_semantics(cfg.semantics))
}

fn grow_isolation(
    b: &mut TreeBuilder<f64>,
    rng: &mut ChaCha8Rng,
    rows: &[Vec<f64>],
    semantics: SplitSemantics,
    idx: Vec<usize>,
    depth: usize,
    limit: usize,
) -> Child {
    if depth >= limit || idx.len() <= 1 {
        return b.leaf(Vec::new(), idx.len() as u64, depth);
    }
    let d = rows[0].len();
    let mut feats: Vec<usize> = (0..d).collect();
    feats.shuffle(rng);
    for f in feats {
        let lo = idx.iter().map(|&i| rows[i][f]).fold(f64::INFINITY, f64::min);
        let hi = idx.iter().map(|&i| rows[i][f]).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 2e-3 {
            continue;
        }
        let tau = ((rng.gen_range(lo..hi)) * 1000.0).round() / 1000.0;
        let tau = tau.clamp(lo + 1e-3, hi - 1e-3);
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| semantics.goes_left(rows[i][f], tau));
        if li.is_empty() || ri.is_empty() {
            continue;
        }
        let node = b.node(f, tau);
        let left = grow_isolation(b, rng, rows, semantics, li, depth + 1, limit);
        let right = grow_isolation(b, rng, rows, semantics, ri, depth + 1, limit);
        b.set(node, left, right);
        return Child::Node(node);
    }
    b.leaf(Vec::new(), idx.len() as u64, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::load_ensemble;

    #[test]
    fn random_ensembles_are_valid_documents() {
        for voting in [Voting::Hard, Voting::Soft] {
            let cfg = RandomEnsembleConfig {
                voting,
                n_ordinal: 1,
                category_size: 3,
                n_classes: 3,
                seed: 7,
                ..RandomEnsembleConfig::default()
            };
            let e: Ensemble<f64> = random_ensemble(&cfg);
            let back: Ensemble<f64> = load_ensemble(e.to_json().as_bytes()).unwrap();
            assert_eq!(e, back);
        }
    }

    #[test]
    fn trained_forest_fits_blobs() {
        let data = gaussian_blobs(300, 4, 2, 1.0, 3);
        let e = train_forest(&data, &ForestConfig::default());
        let back: Ensemble<f64> = load_ensemble(e.to_json().as_bytes()).unwrap();
        assert_eq!(e, back);
        let correct = data
            .rows
            .iter()
            .zip(&data.labels)
            .filter(|(r, &y)| e.predict(r).label == y)
            .count();
        assert!(correct as f64 > 0.9 * data.rows.len() as f64, "{correct}");
    }

    #[test]
    fn isolation_forest_flags_the_contamination_share() {
        let data = gaussian_blobs(400, 3, 1, 1.0, 5);
        let iso = train_isolation_forest(
            &data.rows,
            &IsolationConfig {
                n_trees: 50,
                ..IsolationConfig::default()
            },
        )
        .unwrap();
        let flagged = data.rows.iter().filter(|r| !iso.is_plausible(r)).count();
        let share = flagged as f64 / data.rows.len() as f64;
        assert!(share > 0.03 && share < 0.15, "{share}");
        assert!(!iso.is_plausible(&[0.0, 0.0, 0.0]) || !iso.is_plausible(&[10.0, 10.0, 10.0]));
    }
}
