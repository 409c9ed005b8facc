use super::pb::encode_pb_geq;
use super::wcnf::{Lit, VarMeaning, VarTable, Wcnf};
use crate::cp::{CfModel, CfOptions, ConstraintKind, SCORE_SCALE};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::feature_space::Norm;
use crate::plausibility::IsolationModel;
use crate::scalar::Scalar;
use crate::space::{Cond, SearchSpace, VarKind, COST_SCALE};

/// Boolean encoding of one decision variable.
#[derive(Clone, Debug, PartialEq)]
pub enum VarEncoding {
    /// `t_m` for `m = 1..=k`: interval index `<= m - 1`.
    Interval { thresholds: Vec<Lit> },
    /// One literal per group member.
    Group { members: Vec<Lit> },
}

impl VarEncoding {
    /// Literals asserting `value >= lo` and `value <= hi` of an interval variable.
    fn range(&self, lo: usize, hi: usize) -> Vec<Lit> {
        let VarEncoding::Interval { thresholds: t } = self else {
            unreachable!("range condition on a group")
        };
        let mut out = Vec::new();
        if lo > 0 {
            out.push(-t[lo - 1]);
        }
        if hi < t.len() {
            out.push(t[hi]);
        }
        out
    }
}

/// A weighted partial MaxSAT instance with its variable semantics.
pub struct WcnfInstance<'a, T> {
    pub ensemble: &'a Ensemble<T>,
    pub plausibility: Option<&'a IsolationModel<T>>,
    pub target: usize,
    pub epsilon_c: f64,
    pub space: SearchSpace<T>,
    pub vars: VarTable,
    pub encodings: Vec<VarEncoding>,
    /// Leaf literal per compiled tree (ensemble trees, then isolation trees).
    pub leaves: Vec<Vec<Lit>>,
    pub formula: Wcnf,
    /// Soft weights are `round(Q_w * alpha * delta)`.
    pub weight_quantum: f64,
}

impl<T: Scalar> WcnfInstance<'_, T> {
    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn to_dimacs(&self) -> String {
        self.formula.write_dimacs()
    }
}

/// Encodes a built model. Only the L1 objective has an exact clause form.
pub fn encode_model<'a, T: Scalar>(model: &CfModel<'a, T>) -> Result<WcnfInstance<'a, T>> {
    match model.options.norm {
        Norm::L1 => {}
        Norm::L0 => return Err(Error::UnsupportedNorm("L0")),
        Norm::L2 => return Err(Error::UnsupportedNorm("L2")),
    }
    let space = &model.space;
    let mut vars = VarTable::default();
    let mut hard: Vec<Vec<Lit>> = Vec::new();
    let mut soft: Vec<(Vec<Lit>, u64)> = Vec::new();

    let mut encodings = Vec::with_capacity(space.vars.len());
    for var in &space.vars {
        match &var.kind {
            VarKind::Interval { feature, partition } => {
                let t: Vec<Lit> = partition
                    .thresholds
                    .iter()
                    .enumerate()
                    .map(|(i, &tau)| {
                        vars.fresh(VarMeaning::Threshold {
                            feature: *feature,
                            index: i + 1,
                            tau: tau.as_f64(),
                        })
                    })
                    .collect();
                for w in t.windows(2) {
                    hard.push(vec![-w[0], w[1]]);
                }
                let k = t.len();
                for a in (0..var.n_values).filter(|&a| !var.allowed.contains(a)) {
                    let mut c = Vec::new();
                    if a > 0 {
                        c.push(t[a - 1]);
                    }
                    if a < k {
                        c.push(-t[a]);
                    }
                    hard.push(c);
                }
                // Telescoped costs: crossing threshold m away from home pays C(m) - C(m -/+ 1).
                let c = filled_costs(&var.qcost, var.home);
                for m in 1..=k {
                    if m > var.home {
                        push_soft(&mut soft, vec![t[m - 1]], c[m] - c[m - 1]);
                    } else {
                        push_soft(&mut soft, vec![-t[m - 1]], c[m - 1] - c[m]);
                    }
                }
                encodings.push(VarEncoding::Interval { thresholds: t });
            }
            VarKind::Group { group, members } => {
                let nu: Vec<Lit> = members
                    .iter()
                    .enumerate()
                    .map(|(p, &f)| {
                        vars.fresh(VarMeaning::Category {
                            feature: f,
                            group: *group,
                            position: p,
                        })
                    })
                    .collect();
                exactly_one(&nu, &mut hard);
                for p in (0..var.n_values).filter(|&p| !var.allowed.contains(p)) {
                    hard.push(vec![-nu[p]]);
                }
                let alt = (0..var.n_values).find(|&p| p != var.home).map_or(0, |p| var.qcost[p]);
                push_soft(&mut soft, vec![nu[var.home]], alt);
                encodings.push(VarEncoding::Group { members: nu });
            }
        }
    }

    let mut leaves = Vec::with_capacity(model.trees.len());
    for (t, tree) in model.trees.iter().enumerate() {
        let z: Vec<Lit> = (0..tree.leaves.len())
            .map(|l| vars.fresh(VarMeaning::Leaf { tree: t, leaf: l }))
            .collect();
        exactly_one(&z, &mut hard);
        for (l, path) in tree.leaves.iter().enumerate() {
            if !path.reachable {
                hard.push(vec![-z[l]]);
                continue;
            }
            for (v, cond) in &path.conds {
                match cond {
                    Cond::Range(lo, hi) => {
                        for lit in encodings[*v].range(*lo, *hi) {
                            hard.push(vec![-z[l], lit]);
                        }
                    }
                    Cond::Mask(mask) => {
                        let VarEncoding::Group { members } = &encodings[*v] else {
                            unreachable!("mask condition on an interval")
                        };
                        let mut c = vec![-z[l]];
                        c.extend(mask.iter().map(|p| members[p]));
                        hard.push(c);
                    }
                }
            }
        }
        leaves.push(z);
    }

    for c in &model.constraints {
        let unit = matches!(c.kind, ConstraintKind::Class { .. }) && model.is_hard_voting();
        let scale = if unit { SCORE_SCALE as i64 } else { 1 };
        let mut terms = Vec::new();
        for term in &c.terms {
            for (l, &coef) in term.coef.iter().enumerate() {
                if coef != 0 {
                    debug_assert!(coef % scale == 0);
                    terms.push((leaves[term.tree][l], coef / scale));
                }
            }
        }
        // Card: integer vote difference >= ceil(rhs / 1e9).
        let rhs = if unit { div_ceil(c.rhs, scale) } else { c.rhs };
        hard.extend(encode_pb_geq(&terms, rhs, &mut vars)?);
    }

    if soft.is_empty() {
        return Err(Error::DegenerateObjective);
    }
    let top = soft
        .iter()
        .try_fold(1u64, |acc, (_, w)| acc.checked_add(*w))
        .filter(|&t| t <= i64::MAX as u64)
        .ok_or(Error::WeightOverflow)?;

    let mut comments = vec![format!(
        "cfforest wcnf target={} norm=l1 weight_quantum={COST_SCALE:e}",
        model.target
    )];
    comments.extend(vars.iter().map(|(i, m)| format!("var {i} {m}")));
    let formula = Wcnf {
        n_vars: vars.len(),
        hard,
        soft,
        top,
        comments,
    };
    Ok(WcnfInstance {
        ensemble: model.ensemble,
        plausibility: model.plausibility,
        target: model.target,
        epsilon_c: model.options.epsilon_c,
        space: model.space.clone(),
        vars,
        encodings,
        leaves,
        formula,
        weight_quantum: COST_SCALE,
    })
}

/// Builds the model and encodes it.
pub fn encode_wcnf<'a, T: Scalar>(
    ens: &'a Ensemble<T>,
    query: &[T],
    target: usize,
    options: CfOptions,
    plausibility: Option<&'a IsolationModel<T>>,
) -> Result<WcnfInstance<'a, T>> {
    if options.norm != Norm::L1 {
        return Err(Error::UnsupportedNorm(if options.norm == Norm::L2 { "L2" } else { "L0" }));
    }
    let model = CfModel::build_with(ens, query, target, options, plausibility)?;
    encode_model(&model)
}

fn push_soft(soft: &mut Vec<(Vec<Lit>, u64)>, clause: Vec<Lit>, w: i64) {
    debug_assert!(w >= 0);
    if w > 0 {
        soft.push((clause, w as u64));
    }
}

fn exactly_one(lits: &[Lit], hard: &mut Vec<Vec<Lit>>) {
    hard.push(lits.to_vec());
    for i in 0..lits.len() {
        for j in i + 1..lits.len() {
            hard.push(vec![-lits[i], -lits[j]]);
        }
    }
}

/// Costs with inadmissible entries replaced by their neighbour toward `home`,
/// so that crossing weights stay nonnegative.
fn filled_costs(q: &[i64], home: usize) -> Vec<i64> {
    let inf = i64::MAX / 4;
    let mut c = q.to_vec();
    for m in home + 1..c.len() {
        if c[m] >= inf {
            c[m] = c[m - 1];
        }
    }
    for m in (0..home).rev() {
        if c[m] >= inf {
            c[m] = c[m + 1];
        }
    }
    c
}

fn div_ceil(a: i64, b: i64) -> i64 {
    let q = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        q
    } else {
        q + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_b, TOY_A_JSON};
    use crate::format::load_ensemble;

    fn toy_a_default_alpha() -> Ensemble<f64> {
        load_ensemble(TOY_A_JSON.replace(", \"alpha\": 1.0", "").as_bytes()).unwrap()
    }

    #[test]
    fn toy_a_hard_voting_layout() {
        let e = toy_a_default_alpha();
        let inst = encode_wcnf(&e, &[1.0], 1, CfOptions::default(), None).unwrap();
        assert_eq!(inst.n_vars(), 3);
        let (t1, z1, z2) = (1, 2, 3);
        let hard: Vec<Vec<Lit>> = inst
            .formula
            .hard
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort();
                c
            })
            .collect();
        for want in [vec![z1, z2], vec![-z2, -z1], vec![-z1, t1], vec![-z2, -t1], vec![z2]] {
            let mut want = want;
            want.sort();
            assert!(hard.contains(&want), "missing {want:?} in {hard:?}");
        }
        assert_eq!(inst.formula.soft, vec![(vec![t1], 200_000)]);
        assert_eq!(inst.formula.top, 200_001);
    }

    #[test]
    fn toy_b_soft_coefficients() {
        let e = toy_b();
        let m = CfModel::build_with(&e, &[1.0], 1, CfOptions::default(), None).unwrap();
        assert_eq!(m.constraints[0].terms[0].coef, vec![-300_000_000, 100_000_000]);
        assert!(encode_model(&m).is_ok());
    }

    #[test]
    fn non_l1_norms_are_rejected() {
        let e = toy_b();
        let Err(err) = encode_wcnf(&e, &[1.0], 1, CfOptions::default().with_norm(Norm::L2), None) else {
            panic!("L2 must be rejected")
        };
        assert_eq!(err.to_string(), "L2 unsupported by WCNF encoder");
        assert!(encode_wcnf(&e, &[1.0], 1, CfOptions::default().with_norm(Norm::L0), None).is_err());
    }

    #[test]
    fn filled_costs_are_monotone_away_from_home() {
        let inf = i64::MAX / 4;
        assert_eq!(filled_costs(&[5, inf, 0, inf, 7], 2), vec![5, 0, 0, 0, 7]);
    }

    #[test]
    fn ceiling_division() {
        assert_eq!(div_ceil(100, 1_000_000_000), 1);
        assert_eq!(div_ceil(-1_999_999_900, 1_000_000_000), -1);
        assert_eq!(div_ceil(0, 7), 0);
    }
}
