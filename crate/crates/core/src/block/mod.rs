//! Generic inertial block solvers over an abstract block problem
//! `min f(x_1, ..., x_s) + sum_i r_i(x_i)`.
//!
//! Two update rules share one outer/inner loop structure:
//!
//! * IBP: extrapolate block `i` once, then solve the block subproblem exactly
//!   with a proximal term anchored at the extrapolated point.
//! * IBPG: extrapolate twice, evaluate the block gradient at one point and
//!   anchor the (Bregman) proximal term at the other.
//!
//! Each outer loop selects `T_k >= s` block indices so every block is updated
//! at least once.

mod bregman;
mod conditions;
mod lyapunov;
mod select;
mod solver;

use ndarray::{Array, Array1, ArrayView, ArrayView1, Dimension, Zip};

use crate::error::{Error, Result};

pub use bregman::{
    bregman_divergence, bregman_gprox, bregman_gradient_step, bregman_prox, BregmanGenerator,
    DiagonalQuadratic, Euclidean, NonnegIndicator, ProxFn, Proximable, SquaredDistance, ZeroFunction,
};
pub use conditions::{
    check_ibp_condition, check_ibpg_condition, ibp_theta, ibpg_lambda, max_feasible_ibp_alpha,
    BlockUpdates, ConditionConstants, ConditionReport, ConditionRow, GeneratorConstants, IbpVariant,
    IbpgVariant, Variant,
};
pub(crate) use conditions::pair_terms;
pub use lyapunov::{lyapunov_trace, monotonicity_violations, LyapunovRecord, LyapunovWeights};
pub use select::{select_blocks, OrderPolicy};
pub use solver::{
    ibp_outer_loop, ibp_outer_loop_bregman, ibpg_outer_loop, ibpg_outer_loop_bregman, ExtrapolState,
    LoopSnapshot, SolverConfig, SolverRun, StepContext, StepParams, StepSchedule,
};

/// The iterate `x = (x_1, ..., x_s)`; each block is stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    blocks: Vec<Array1<f64>>,
}

impl BlockVector {
    pub fn new(blocks: Vec<Array1<f64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("a block vector needs at least one block"));
        }
        for (i, b) in blocks.iter().enumerate() {
            if !b.iter().all(|x| x.is_finite()) {
                return Err(Error::invalid(format!("block {i} has non-finite entries")));
            }
        }
        Ok(BlockVector { blocks })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> ArrayView1<'_, f64> {
        self.blocks[i].view()
    }

    pub fn blocks(&self) -> &[Array1<f64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Array1<f64>> {
        self.blocks
    }

    /// Replaces block `i` and returns the old value.
    pub fn replace(&mut self, i: usize, value: Array1<f64>) -> Array1<f64> {
        std::mem::replace(&mut self.blocks[i], value)
    }

    pub fn same_shape(&self, other: &BlockVector) -> bool {
        self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.len() == b.len())
    }

    /// Squared Euclidean distance between block `i` of `self` and `other`.
    pub fn block_sq_dist(&self, other: &BlockVector, i: usize) -> f64 {
        Zip::from(&self.blocks[i])
            .and(&other.blocks[i])
            .fold(0.0, |acc, a, b| acc + (a - b) * (a - b))
    }
}

/// A composite problem `F = f + sum_i r_i` split into blocks.
///
/// `penalty` may return `+inf` for indicator functions. Methods that a given
/// problem cannot provide keep their default, which reports
/// [`Error::Unsupported`].
pub trait BlockProblem {
    fn num_blocks(&self) -> usize;

    /// Smooth (or at least continuous) part `f`.
    fn smooth_value(&self, x: &BlockVector) -> f64;

    /// `r_i(x_i)`.
    fn penalty(&self, block: usize, xi: ArrayView1<f64>) -> f64;

    fn objective(&self, x: &BlockVector) -> f64 {
        let f = self.smooth_value(x);
        (0..self.num_blocks()).fold(f, |acc, i| acc + self.penalty(i, x.block(i)))
    }

    /// Gradient of `f` with respect to block `block`, evaluated with block
    /// `block` set to `at` and every other block taken from `x`.
    fn partial_gradient(&self, block: usize, x: &BlockVector, at: ArrayView1<f64>) -> Result<Array1<f64>> {
        let _ = (x, at);
        Err(Error::Unsupported(format!("partial gradient of block {block}")))
    }

    /// Bregman proximal map of `r_i`: `argmin r_i(u) + D_H(u, v) / beta`.
    fn prox_penalty(
        &self,
        block: usize,
        v: ArrayView1<f64>,
        beta: f64,
        h: &dyn BregmanGenerator,
    ) -> Result<Array1<f64>>;

    /// Lipschitz constant of the block gradient with the other blocks fixed at `x`.
    fn block_lipschitz(&self, block: usize, x: &BlockVector) -> Result<f64> {
        let _ = x;
        Err(Error::Unsupported(format!("Lipschitz estimate of block {block}")))
    }

    /// Exact block subproblem `argmin F_i(u) + D_H(u, anchor) / beta` with the
    /// other blocks fixed at `x`.
    fn exact_block_prox(
        &self,
        block: usize,
        x: &BlockVector,
        anchor: ArrayView1<f64>,
        beta: f64,
        h: &dyn BregmanGenerator,
    ) -> Result<Array1<f64>> {
        let _ = (x, anchor, beta, h);
        Err(Error::Unsupported(format!("exact proximal map of block {block}")))
    }

    /// Relative error reported in traces; problems without a natural
    /// reference return NaN.
    fn relative_error(&self, x: &BlockVector) -> f64 {
        let _ = x;
        f64::NAN
    }
}

/// Inertial extrapolation `x + coeff * (x - y)`.
pub fn extrapolate<D: Dimension>(
    x_cur: ArrayView<f64, D>,
    y_prev: ArrayView<f64, D>,
    coeff: f64,
) -> Result<Array<f64, D>> {
    if x_cur.shape() != y_prev.shape() {
        return Err(Error::dims(
            "extrapolate",
            format!("{:?}", x_cur.shape()),
            format!("{:?}", y_prev.shape()),
        ));
    }
    if !(coeff >= 0.0) {
        return Err(Error::invalid(format!("extrapolation coefficient {coeff} must be >= 0")));
    }
    Ok(extrapolate_unchecked(x_cur, y_prev, coeff))
}

pub(crate) fn extrapolate_unchecked<D: Dimension>(
    x_cur: ArrayView<f64, D>,
    y_prev: ArrayView<f64, D>,
    coeff: f64,
) -> Array<f64, D> {
    Zip::from(&x_cur).and(&y_prev).map_collect(|&x, &y| x + coeff * (x - y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn extrapolate_examples() {
        let x = array![1.0, -2.0];
        let y = array![3.0, 5.0];
        assert_eq!(extrapolate(x.view(), y.view(), 0.0).unwrap(), x);
        assert_eq!(extrapolate(x.view(), x.view(), 7.5).unwrap(), x);
        assert_eq!(extrapolate(array![2.0].view(), array![1.0].view(), 0.5).unwrap(), array![2.5]);
    }

    #[test]
    fn extrapolate_errors() {
        assert!(extrapolate(array![1.0].view(), array![1.0, 2.0].view(), 0.1).is_err());
        assert!(extrapolate(array![1.0].view(), array![1.0].view(), -0.1).is_err());
    }

    #[test]
    fn block_vector_validation() {
        assert!(BlockVector::new(vec![]).is_err());
        assert!(BlockVector::new(vec![array![f64::NAN]]).is_err());
        let mut x = BlockVector::new(vec![array![1.0], array![2.0, 3.0]]).unwrap();
        let old = x.replace(1, array![0.0, 0.0]);
        assert_eq!(old, array![2.0, 3.0]);
        let y = BlockVector::new(vec![array![1.0], array![3.0, 4.0]]).unwrap();
        assert!(x.same_shape(&y));
        assert_eq!(x.block_sq_dist(&y, 1), 25.0);
    }
}
