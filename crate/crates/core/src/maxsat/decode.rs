use super::encode::{VarEncoding, WcnfInstance};
use super::wcnf::lit_value;
use crate::cp::point_is_valid;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded<T> {
    pub values: Vec<usize>,
    pub point: Vec<T>,
    /// Sum of violated soft weights.
    pub weight: u64,
    /// `weight / Q_w`.
    pub objective: f64,
}

/// Maps a hard-feasible valuation (indexed by variable - 1) back to a
/// counterfactual and re-validates it with the reference evaluator.
pub fn decode_model<T: Scalar>(inst: &WcnfInstance<'_, T>, assignment: &[bool]) -> Result<Decoded<T>> {
    if assignment.len() < inst.n_vars() {
        return Err(Error::Parse(format!(
            "valuation covers {} of {} variables",
            assignment.len(),
            inst.n_vars()
        )));
    }
    if let Some(i) = inst.formula.first_violated_hard(assignment) {
        return Err(Error::HardClauseViolated(i));
    }
    let mut values = Vec::with_capacity(inst.encodings.len());
    for (v, enc) in inst.encodings.iter().enumerate() {
        let value = match enc {
            VarEncoding::Interval { thresholds } => {
                let bits: Vec<bool> = thresholds.iter().map(|&t| lit_value(assignment, t)).collect();
                let first = bits.iter().position(|&b| b).unwrap_or(bits.len());
                if bits[first..].iter().any(|&b| !b) {
                    let feature = match &inst.space.vars[v].kind {
                        crate::space::VarKind::Interval { feature, .. } => *feature,
                        crate::space::VarKind::Group { .. } => v,
                    };
                    return Err(Error::NonMonotone(feature));
                }
                first
            }
            VarEncoding::Group { members } => members
                .iter()
                .position(|&l| lit_value(assignment, l))
                .ok_or(Error::HardClauseViolated(usize::MAX))?,
        };
        values.push(value);
    }
    let point = inst.space.realize(&values)?;
    if !point_is_valid(inst.ensemble, inst.plausibility, &point, inst.target, inst.epsilon_c) {
        return Err(Error::InvalidCounterfactual);
    }
    let weight = inst.formula.cost(assignment);
    Ok(Decoded {
        values,
        point,
        weight,
        objective: weight as f64 / inst.weight_quantum,
    })
}
