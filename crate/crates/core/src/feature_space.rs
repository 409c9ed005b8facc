//! Feature metadata, threshold partitions and per-interval displacement costs.
//!
//! A numerical or ordinal feature is discretized by the sorted set of split
//! thresholds the ensemble uses on it. Interval `m` of a partition with
//! boundaries `(lb, t1, ..., tk, ub)` is the set of values routed right of
//! `t1..tm` and left of `t(m+1)..tk`, so every value inside one interval is
//! routed identically by every tree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::SplitSemantics;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numerical,
    Ordinal,
    Binary,
    #[serde(rename = "categorical-member", alias = "categorical_member")]
    CategoricalMember,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actionability {
    #[default]
    Free,
    Immutable,
    IncreaseOnly,
    DecreaseOnly,
}

impl std::str::FromStr for Actionability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Actionability::Free),
            "immutable" => Ok(Actionability::Immutable),
            "increase_only" | "increase-only" => Ok(Actionability::IncreaseOnly),
            "decrease_only" | "decrease-only" => Ok(Actionability::DecreaseOnly),
            other => Err(Error::Parse(format!("unknown actionability `{other}`"))),
        }
    }
}

/// Separable `L_p`-type cost exponent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L0,
    #[default]
    L1,
    L2,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L0 => "l0",
            Norm::L1 => "l1",
            Norm::L2 => "l2",
        }
    }

    /// `d^p`, with `d^0` read as the change indicator.
    pub fn apply(self, d: f64) -> f64 {
        match self {
            Norm::L0 => {
                if d > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Norm::L1 => d,
            Norm::L2 => d * d,
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" | "0" => Ok(Norm::L0),
            "l1" | "1" => Ok(Norm::L1),
            "l2" | "2" => Ok(Norm::L2),
            other => Err(Error::Parse(format!("unknown norm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSpec<T> {
    pub name: String,
    pub kind: FeatureKind,
    pub lb: T,
    pub ub: T,
    /// Index into [`FeatureSpace::groups`] for categorical members.
    pub group: Option<usize>,
    pub ordinal_grid: Option<Vec<T>>,
    pub actionability: Actionability,
    pub alpha: T,
}

impl<T: Scalar> FeatureSpec<T> {
    /// Admissible values for features restricted to a grid. Binary features
    /// behave like ordinals over `{0, 1}`.
    pub fn admissible_grid(&self) -> Option<&[T]> {
        self.ordinal_grid.as_deref()
    }

    pub fn default_alpha(kind: FeatureKind, lb: T, ub: T) -> T {
        match kind {
            FeatureKind::Numerical | FeatureKind::Ordinal if ub > lb => T::one() / (ub - lb),
            _ => T::one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalGroup {
    pub name: String,
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSpace<T> {
    pub features: Vec<FeatureSpec<T>>,
    pub groups: Vec<CategoricalGroup>,
}

impl<T: Scalar> FeatureSpace<T> {
    /// Validates specs and assembles one-hot groups from the members' group names.
    pub fn new(specs: Vec<(FeatureSpec<T>, Option<String>)>) -> Result<Self> {
        let mut groups: Vec<CategoricalGroup> = Vec::new();
        let mut by_name: BTreeMap<String, usize> = BTreeMap::new();
        let mut features = Vec::with_capacity(specs.len());
        for (idx, (mut spec, group_name)) in specs.into_iter().enumerate() {
            let bad = |reason: &str| Error::Feature {
                name: spec.name.clone(),
                reason: reason.to_string(),
            };
            if !(spec.lb.is_finite() && spec.ub.is_finite()) || spec.lb > spec.ub {
                return Err(bad("bounds must be finite with lb <= ub"));
            }
            if !(spec.alpha.is_finite() && spec.alpha >= T::zero()) {
                return Err(bad("alpha must be a nonnegative finite real"));
            }
            match spec.kind {
                FeatureKind::Binary | FeatureKind::CategoricalMember => {
                    if spec.lb != T::zero() || spec.ub != T::one() {
                        return Err(bad("binary and categorical members have bounds {0, 1}"));
                    }
                    if spec.kind == FeatureKind::Binary {
                        spec.ordinal_grid = Some(vec![T::zero(), T::one()]);
                    }
                }
                FeatureKind::Ordinal => {
                    let grid = spec
                        .ordinal_grid
                        .as_mut()
                        .ok_or_else(|| bad("ordinal features need an ordinal_grid"))?;
                    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
                    grid.dedup();
                    if grid.is_empty() || grid.iter().any(|&g| !g.is_finite() || g < spec.lb || g > spec.ub) {
                        return Err(bad("ordinal grid must be non-empty and inside the bounds"));
                    }
                }
                FeatureKind::Numerical => {}
            }
            match (spec.kind, group_name) {
                (FeatureKind::CategoricalMember, Some(g)) => {
                    let gi = *by_name.entry(g.clone()).or_insert_with(|| {
                        groups.push(CategoricalGroup {
                            name: g.clone(),
                            members: Vec::new(),
                        });
                        groups.len() - 1
                    });
                    groups[gi].members.push(idx);
                    spec.group = Some(gi);
                }
                (FeatureKind::CategoricalMember, None) => {
                    return Err(bad("categorical members must name their group"));
                }
                (_, Some(_)) => return Err(bad("only categorical members may carry a group")),
                (_, None) => spec.group = None,
            }
            features.push(spec);
        }
        for g in &groups {
            let a0 = features[g.members[0]].alpha;
            if g.members.iter().any(|&m| features[m].alpha != a0) {
                return Err(Error::Feature {
                    name: g.name.clone(),
                    reason: "members of a one-hot group must share alpha".into(),
                });
            }
        }
        Ok(FeatureSpace { features, groups })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Checks that a dense point respects bounds and one-hot groups.
    pub fn check_point(&self, point: &[T]) -> Result<()> {
        if point.len() != self.features.len() {
            return Err(Error::Query(format!(
                "expected {} feature values, got {}",
                self.features.len(),
                point.len()
            )));
        }
        for (f, (spec, &v)) in self.features.iter().zip(point).enumerate() {
            if !v.is_finite() || v < spec.lb || v > spec.ub {
                return Err(Error::OutOfBounds {
                    feature: f,
                    value: v.as_f64(),
                    lb: spec.lb.as_f64(),
                    ub: spec.ub.as_f64(),
                });
            }
            if matches!(spec.kind, FeatureKind::Binary | FeatureKind::CategoricalMember)
                && v != T::zero()
                && v != T::one()
            {
                return Err(Error::Query(format!("feature `{}` must be 0 or 1", spec.name)));
            }
        }
        for g in &self.groups {
            let hot = g.members.iter().filter(|&&m| point[m] == T::one()).count();
            if hot != 1 {
                return Err(Error::Query(format!(
                    "one-hot group `{}` has {hot} active members",
                    g.name
                )));
            }
        }
        Ok(())
    }
}

/// Ordered interval partition of one feature's `[lb, ub]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePartition<T> {
    pub thresholds: Vec<T>,
    /// `(lb, t1, ..., tk, ub)`.
    pub boundaries: Vec<T>,
    pub semantics: SplitSemantics,
}

impl<T: Scalar> FeaturePartition<T> {
    /// Builds the partition from any collection of split thresholds.
    ///
    /// Thresholds that cannot separate two values of `[lb, ub]` are dropped:
    /// under `left_closed` that is `t < lb` or `t >= ub`, under `right_open`
    /// `t <= lb` or `t > ub`. A threshold equal to the inner bound is kept and
    /// yields a single-point interval (`[lb, lb]` or `[ub, ub]`).
    pub fn from_thresholds(
        lb: T,
        ub: T,
        semantics: SplitSemantics,
        thresholds: impl IntoIterator<Item = T>,
    ) -> Self {
        let mut ts: Vec<T> = thresholds
            .into_iter()
            .filter(|&t| match semantics {
                SplitSemantics::LeftClosed => t >= lb && t < ub,
                SplitSemantics::RightOpen => t > lb && t <= ub,
            })
            .collect();
        ts.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
        ts.dedup();
        let mut boundaries = Vec::with_capacity(ts.len() + 2);
        boundaries.push(lb);
        boundaries.extend_from_slice(&ts);
        boundaries.push(ub);
        FeaturePartition {
            thresholds: ts,
            boundaries,
            semantics,
        }
    }

    pub fn k(&self) -> usize {
        self.thresholds.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn lb(&self) -> T {
        self.boundaries[0]
    }

    pub fn ub(&self) -> T {
        *self.boundaries.last().expect("non-empty boundaries")
    }

    /// Closure `[I[m], I[m+1]]` of interval `m`.
    pub fn closure(&self, m: usize) -> (T, T) {
        (self.boundaries[m], self.boundaries[m + 1])
    }

    /// 1-based position `m_f(t)` of a threshold, if it is part of the partition.
    pub fn threshold_index(&self, t: T) -> Option<usize> {
        self.thresholds
            .binary_search_by(|x| x.partial_cmp(&t).expect("finite thresholds"))
            .ok()
            .map(|i| i + 1)
    }

    /// Interval index of `v` consistent with tree routing: the number of
    /// thresholds that `v` is routed right of.
    pub fn interval_of(&self, v: T) -> Result<usize> {
        if !(v >= self.lb() && v <= self.ub()) {
            return Err(Error::OutOfBounds {
                feature: usize::MAX,
                value: v.as_f64(),
                lb: self.lb().as_f64(),
                ub: self.ub().as_f64(),
            });
        }
        Ok(self.interval_of_unchecked(v))
    }

    #[inline]
    pub fn interval_of_unchecked(&self, v: T) -> usize {
        match self.semantics {
            SplitSemantics::LeftClosed => self.thresholds.partition_point(|&t| t < v),
            SplitSemantics::RightOpen => self.thresholds.partition_point(|&t| t <= v),
        }
    }

    /// Is interval `m` open at its lower (resp. upper) boundary?
    fn open_ends(&self, m: usize) -> (bool, bool) {
        match self.semantics {
            SplitSemantics::LeftClosed => (m > 0, false),
            SplitSemantics::RightOpen => (false, m + 1 < self.n_intervals()),
        }
    }

    /// Grid values falling in interval `m`.
    pub fn grid_in<'a>(&'a self, grid: &'a [T], m: usize) -> impl Iterator<Item = T> + 'a {
        grid.iter().copied().filter(move |&g| self.interval_of_unchecked(g) == m)
    }
}

/// Partition of feature `f` over every threshold the ensemble places on it.
pub fn build_partition<T: Scalar>(ens: &crate::Ensemble<T>, f: usize) -> Result<FeaturePartition<T>> {
    let spec = ens.features.features.get(f).ok_or_else(|| Error::Feature {
        name: format!("#{f}"),
        reason: "feature index out of range".into(),
    })?;
    if spec.kind == FeatureKind::CategoricalMember {
        return Err(Error::Feature {
            name: spec.name.clone(),
            reason: "categorical members are not interval-encoded".into(),
        });
    }
    Ok(FeaturePartition::from_thresholds(
        spec.lb,
        spec.ub,
        ens.semantics,
        ens.thresholds_on(f),
    ))
}

/// Interval index of `v` under the partition's split semantics.
pub fn interval_of<T: Scalar>(part: &FeaturePartition<T>, v: T) -> Result<usize> {
    part.interval_of(v)
}

/// Nearest admissible grid value inside interval `m`, ties to the lower value.
fn nearest_grid<T: Scalar>(part: &FeaturePartition<T>, grid: &[T], target: T, m: usize) -> Option<T> {
    part.grid_in(grid, m).min_by(|a, b| {
        let da = (*a - target).abs();
        let db = (*b - target).abs();
        da.partial_cmp(&db).unwrap().then(a.partial_cmp(b).unwrap())
    })
}

/// Minimum weighted displacement needed to move `x_hat` into interval `m`.
///
/// Numerical features measure the distance to the interval's closure; grid
/// features (ordinal, binary) measure the distance to the nearest admissible
/// grid value inside the interval. Returns `None` for a grid interval that
/// holds no admissible value.
pub fn displacement_cost<T: Scalar>(
    part: &FeaturePartition<T>,
    x_hat: T,
    m: usize,
    norm: Norm,
    alpha: T,
    grid: Option<&[T]>,
) -> Option<f64> {
    let home = part.interval_of_unchecked(x_hat);
    if m == home {
        return Some(0.0);
    }
    let alpha = alpha.as_f64();
    if norm == Norm::L0 {
        if let Some(g) = grid {
            part.grid_in(g, m).next()?;
        }
        return Some(alpha);
    }
    let d = match grid {
        Some(g) => (nearest_grid(part, g, x_hat, m)? - x_hat).abs().as_f64(),
        None => {
            let (lo, hi) = part.closure(m);
            if x_hat < lo {
                (lo - x_hat).as_f64()
            } else if x_hat > hi {
                (x_hat - hi).as_f64()
            } else {
                // x_hat sits on the open endpoint of interval m.
                0.0
            }
        }
    };
    Some(alpha * norm.apply(d))
}

/// Concrete value of interval `m` closest to `x_hat`.
///
/// On an open endpoint the value is nudged inward by
/// `min(1e-6 * (ub - lb), width / 2)`; the result is re-checked against
/// [`FeaturePartition::interval_of`].
pub fn realize_value<T: Scalar>(
    part: &FeaturePartition<T>,
    x_hat: T,
    m: usize,
    grid: Option<&[T]>,
) -> Result<T> {
    let empty = || Error::EmptyInterval {
        feature: usize::MAX,
        interval: m,
    };
    if m >= part.n_intervals() {
        return Err(empty());
    }
    if part.interval_of_unchecked(x_hat) == m {
        return Ok(x_hat);
    }
    if let Some(g) = grid {
        return nearest_grid(part, g, x_hat, m).ok_or_else(empty);
    }
    let (lo, hi) = part.closure(m);
    if lo == hi {
        return Ok(lo);
    }
    let (open_lo, open_hi) = part.open_ends(m);
    let eps = (T::of(1e-6) * (part.ub() - part.lb())).min((hi - lo) / T::of(2.0));
    let clamped = x_hat.max(lo).min(hi);
    let candidate = if clamped == lo && open_lo {
        lo + eps
    } else if clamped == hi && open_hi {
        hi - eps
    } else {
        clamped
    };
    if part.interval_of_unchecked(candidate) == m {
        return Ok(candidate);
    }
    // Precision fallback when the nudge vanishes in the float type.
    let mid = lo + (hi - lo) / T::of(2.0);
    if part.interval_of_unchecked(mid) == m {
        Ok(mid)
    } else {
        Err(empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_b_part(sem: SplitSemantics) -> FeaturePartition<f64> {
        FeaturePartition::from_thresholds(0.0, 10.0, sem, [6.0, 3.0, 3.0])
    }

    #[test]
    fn partition_is_sorted_and_deduplicated() {
        let p = toy_b_part(SplitSemantics::LeftClosed);
        assert_eq!(p.thresholds, vec![3.0, 6.0]);
        assert_eq!(p.boundaries, vec![0.0, 3.0, 6.0, 10.0]);
        assert_eq!(p.k(), 2);
        assert_eq!(p.threshold_index(6.0), Some(2));
        assert_eq!(p.threshold_index(4.0), None);
        let single = FeaturePartition::<f64>::from_thresholds(0.0, 10.0, SplitSemantics::LeftClosed, []);
        assert_eq!(single.boundaries, vec![0.0, 10.0]);
        assert_eq!(single.n_intervals(), 1);
    }

    #[test]
    fn out_of_range_thresholds_are_dropped() {
        let p = FeaturePartition::from_thresholds(0.0, 10.0, SplitSemantics::LeftClosed, [-1.0, 10.0, 12.0, 5.0]);
        assert_eq!(p.thresholds, vec![5.0]);
        // A split at lb still separates lb from everything above it.
        let p = FeaturePartition::from_thresholds(0.0, 1.0, SplitSemantics::LeftClosed, [0.0]);
        assert_eq!(p.interval_of(0.0).unwrap(), 0);
        assert_eq!(p.interval_of(0.5).unwrap(), 1);
        // Boosted binary split `x < 1`.
        let p = FeaturePartition::from_thresholds(0.0, 1.0, SplitSemantics::RightOpen, [1.0, 0.0]);
        assert_eq!(p.thresholds, vec![1.0]);
        assert_eq!(p.interval_of(0.0).unwrap(), 0);
        assert_eq!(p.interval_of(1.0).unwrap(), 1);
    }

    #[test]
    fn interval_membership_follows_semantics() {
        let lc = toy_b_part(SplitSemantics::LeftClosed);
        let ro = toy_b_part(SplitSemantics::RightOpen);
        assert_eq!(lc.interval_of(4.5).unwrap(), 1);
        assert_eq!(lc.interval_of(3.0).unwrap(), 0);
        assert_eq!(ro.interval_of(3.0).unwrap(), 1);
        assert_eq!(lc.interval_of(0.0).unwrap(), 0);
        assert_eq!(lc.interval_of(10.0).unwrap(), 2);
        assert!(lc.interval_of(10.5).is_err());
    }

    #[test]
    fn displacement_examples() {
        let p = toy_b_part(SplitSemantics::LeftClosed);
        assert_eq!(displacement_cost(&p, 1.0, 1, Norm::L1, 1.0, None), Some(2.0));
        assert_eq!(displacement_cost(&p, 1.0, 0, Norm::L1, 1.0, None), Some(0.0));
        assert_eq!(displacement_cost(&p, 8.0, 1, Norm::L2, 1.0, None), Some(4.0));
        assert_eq!(displacement_cost(&p, 8.0, 0, Norm::L2, 1.0, None), Some(25.0));
        assert_eq!(displacement_cost(&p, 8.0, 0, Norm::L0, 0.5, None), Some(0.5));
        // Sitting on the open end of an interval costs nothing under L1.
        assert_eq!(displacement_cost(&p, 3.0, 1, Norm::L1, 1.0, None), Some(0.0));
        assert_eq!(displacement_cost(&p, 3.0, 1, Norm::L0, 1.0, None), Some(1.0));
    }

    #[test]
    fn ordinal_costs_use_admissible_values() {
        let grid: Vec<f64> = (0..=10).map(f64::from).collect();
        let p = FeaturePartition::from_thresholds(0.0, 10.0, SplitSemantics::LeftClosed, [3.5, 3.7, 6.0]);
        assert_eq!(displacement_cost(&p, 1.0, 2, Norm::L1, 1.0, Some(&grid)), Some(3.0));
        // (3.5, 3.7] holds no integer.
        assert_eq!(displacement_cost(&p, 1.0, 1, Norm::L1, 1.0, Some(&grid)), None);
        assert_eq!(displacement_cost(&p, 1.0, 1, Norm::L0, 1.0, Some(&grid)), None);
        assert!(matches!(
            realize_value(&p, 1.0, 1, Some(&grid)),
            Err(Error::EmptyInterval { .. })
        ));
    }

    #[test]
    fn realized_values() {
        let p = toy_b_part(SplitSemantics::LeftClosed);
        let v = realize_value(&p, 1.0, 1, None).unwrap();
        assert_eq!(v, 3.0 + 1e-5);
        assert_eq!(p.interval_of(v).unwrap(), 1);
        assert_eq!(realize_value(&p, 4.5, 1, None).unwrap(), 4.5);
        assert_eq!(realize_value(&p, 8.0, 0, None).unwrap(), 3.0);
        let ro = toy_b_part(SplitSemantics::RightOpen);
        let v = realize_value(&ro, 8.0, 0, None).unwrap();
        assert!(v < 3.0 && ro.interval_of(v).unwrap() == 0);
        let grid: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(realize_value(&p, 1.0, 1, Some(&grid)).unwrap(), 4.0);
        assert_eq!(realize_value(&p, 9.0, 1, Some(&grid)).unwrap(), 6.0);
    }

    #[test]
    fn realize_survives_f32_precision() {
        let p = FeaturePartition::<f32>::from_thresholds(1000.0, 1010.0, SplitSemantics::LeftClosed, [1005.0]);
        let v = realize_value(&p, 1001.0, 1, None).unwrap();
        assert_eq!(p.interval_of(v).unwrap(), 1);
    }
}
