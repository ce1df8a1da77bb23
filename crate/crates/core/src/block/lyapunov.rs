//! Runtime sufficient-decrease diagnostic.
//!
//! For Euclidean distances and parameters that pass the condition checkers,
//! `F(x_k) + delta * sum_i w_i^{k+1} |x_k,i - x_prev_k,i|^2` does not increase
//! with `k`, where `x_prev_k,i` is block `i` just before its last update in
//! loop `k` and `w_i^{k+1}` is the condition weight (`theta` for IBP, `lambda`
//! for IBPG) of the first update of block `i` in loop `k + 1`.

use super::conditions::{ibp_theta, ibpg_lambda, ConditionConstants, GeneratorConstants, IbpVariant, IbpgVariant, Variant};
use super::solver::LoopSnapshot;
use super::BlockProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovRecord {
    pub k: usize,
    pub f_value: f64,
    pub theta_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovWeights {
    Ibp(IbpVariant),
    Ibpg(IbpgVariant),
}

impl LyapunovWeights {
    fn variant(self) -> Variant {
        match self {
            LyapunovWeights::Ibp(v) => Variant::Ibp(v),
            LyapunovWeights::Ibpg(v) => Variant::Ibpg(v),
        }
    }
}

/// One record per stored loop that has a successor in `history`; the last
/// snapshot only supplies the weights of its predecessor.
pub fn lyapunov_trace<P: BlockProblem + ?Sized>(
    problem: &P,
    history: &[LoopSnapshot],
    consts: ConditionConstants,
    weights: LyapunovWeights,
) -> Result<Vec<LyapunovRecord>> {
    consts.validate(weights.variant())?;
    if history.len() < 2 {
        return Err(Error::invalid("history needs at least two consecutive loop snapshots"));
    }
    let g = GeneratorConstants::EUCLIDEAN;
    let s = problem.num_blocks();
    let mut out = Vec::with_capacity(history.len() - 1);
    for pair in history.windows(2) {
        let (snap, next) = (&pair[0], &pair[1]);
        if next.outer != snap.outer + 1 {
            return Err(Error::invalid(format!(
                "history is not consecutive: loop {} followed by {}",
                snap.outer, next.outer
            )));
        }
        if snap.x.num_blocks() != s || !snap.x.same_shape(&snap.x_prev) {
            return Err(Error::invalid(format!("history for loop {} is missing x_prev", snap.outer)));
        }
        let mut theta_term = 0.0;
        for i in 0..s {
            let p = next.first_params[i].ok_or_else(|| {
                Error::invalid(format!("loop {} has no parameters for block {i}", next.outer))
            })?;
            let w = match weights {
                LyapunovWeights::Ibp(IbpVariant::Base) => ibp_theta(p.alpha, p.beta, consts.nu, g),
                // the three-point inequality of a convex block halves the weight
                LyapunovWeights::Ibp(IbpVariant::BlockConvex) => 0.5 * ibp_theta(p.alpha, p.beta, consts.nu, g),
                LyapunovWeights::Ibpg(v) => {
                    let l = next.first_lipschitz[i].ok_or_else(|| {
                        Error::invalid(format!("loop {} has no Lipschitz estimate for block {i}", next.outer))
                    })?;
                    ibpg_lambda(v, p.alpha, p.gamma, l, consts, g)
                }
            };
            theta_term += consts.delta * w * snap.x.block_sq_dist(&snap.x_prev, i);
        }
        let f_value = problem.objective(&snap.x);
        out.push(LyapunovRecord { k: snap.outer, f_value, theta_term, total: f_value + theta_term });
    }
    Ok(out)
}

/// Indices `k` where the record increased by more than `rel_slack` relative
/// to its predecessor.
pub fn monotonicity_violations(records: &[LyapunovRecord], rel_slack: f64) -> Vec<usize> {
    records
        .windows(2)
        .filter(|w| w[1].total > w[0].total + rel_slack * w[0].total.abs())
        .map(|w| w[1].k)
        .collect()
}
