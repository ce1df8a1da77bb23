//! Nonnegative matrix factorization `min 1/2 |X - UV|_F^2` over `U, V >= 0`.

mod problem;
mod schedule;
mod solver;
mod updates;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::matops::ensure_finite;

pub use crate::factor::RepeatRule;
pub use problem::{NmfColumnProblem, NmfFactorProblem};
pub use schedule::{ibp_alpha_step, ibpg_nmf_params, nesterov_tau_step, IbpConstants, IbpgConstants};
pub use solver::{run_nmf, EahalsConstants, NmfAlgo, NmfInit, NmfOptions, NmfRun, NmfState};
pub use updates::{hals_column_update, hals_row_update, ibp_column_update, ibp_row_update};

#[derive(Debug, Clone, PartialEq)]
pub struct NmfInstance {
    x: Array2<f64>,
    rank: usize,
}

impl NmfInstance {
    pub fn new(x: Array2<f64>, rank: usize) -> Result<Self> {
        ensure_finite(x.view(), "data matrix")?;
        if x.iter().any(|v| *v < 0.0) {
            return Err(Error::invalid("NMF data must be nonnegative"));
        }
        if rank == 0 || rank >= x.nrows().min(x.ncols()) {
            return Err(Error::invalid(format!(
                "rank {rank} must satisfy 1 <= r < min(m, n) = {}",
                x.nrows().min(x.ncols())
            )));
        }
        Ok(NmfInstance { x, rank })
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dims(&self) -> (usize, usize) {
        self.x.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmfBlock {
    U,
    V,
}

fn check_shapes(x: ArrayView2<f64>, u: ArrayView2<f64>, v: ArrayView2<f64>) -> Result<()> {
    if u.nrows() != x.nrows() || v.ncols() != x.ncols() || u.ncols() != v.nrows() {
        return Err(Error::dims(
            "nmf",
            format!("U: {}xr, V: rx{}", x.nrows(), x.ncols()),
            format!("U: {}x{}, V: {}x{}", u.nrows(), u.ncols(), v.nrows(), v.ncols()),
        ));
    }
    Ok(())
}

/// `1/2 |X - UV|_F^2`, computed from the residual.
pub fn nmf_objective(x: ArrayView2<f64>, u: ArrayView2<f64>, v: ArrayView2<f64>) -> Result<f64> {
    check_shapes(x, u, v)?;
    let mut resid = x.to_owned();
    resid -= &u.dot(&v);
    Ok(0.5 * resid.iter().map(|r| r * r).sum::<f64>())
}

/// `UVV^T - XV^T` for the `U` block, `U^TUV - U^TX` for the `V` block.
pub fn nmf_gradients(x: ArrayView2<f64>, u: ArrayView2<f64>, v: ArrayView2<f64>, block: NmfBlock) -> Result<Array2<f64>> {
    check_shapes(x, u, v)?;
    Ok(match block {
        NmfBlock::U => {
            let mut g = u.dot(&v.dot(&v.t()));
            g -= &x.dot(&v.t());
            g
        }
        NmfBlock::V => {
            let mut g = u.t().dot(&u).dot(&v);
            g -= &u.t().dot(&x);
            g
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn instance_validation() {
        let x = Array2::from_elem((4, 5), 1.0);
        assert!(NmfInstance::new(x.clone(), 2).is_ok());
        assert!(NmfInstance::new(x.clone(), 0).is_err());
        assert!(NmfInstance::new(x.clone(), 4).is_err());
        let mut neg = x;
        neg[[0, 0]] = -1.0;
        assert!(NmfInstance::new(neg, 2).is_err());
    }

    #[test]
    fn objective_special_cases() {
        let u = array![[1.0, 0.5], [0.0, 2.0], [1.0, 1.0]];
        let v = array![[1.0, 2.0, 0.0], [0.5, 0.0, 1.0]];
        let x = u.dot(&v);
        assert_eq!(nmf_objective(x.view(), u.view(), v.view()).unwrap(), 0.0);
        let zero = Array2::zeros((3, 2));
        let half_sq = 0.5 * x.iter().map(|a| a * a).sum::<f64>();
        assert_eq!(nmf_objective(x.view(), zero.view(), v.view()).unwrap(), half_sq);
        for b in [NmfBlock::U, NmfBlock::V] {
            assert!(nmf_gradients(x.view(), u.view(), v.view(), b).unwrap().iter().all(|g| *g == 0.0));
        }
        let vz = Array2::zeros((2, 3));
        assert!(nmf_gradients(x.view(), u.view(), vz.view(), NmfBlock::U).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn shape_errors() {
        let x = Array2::<f64>::zeros((3, 4));
        let u = Array2::<f64>::zeros((3, 2));
        let v = Array2::<f64>::zeros((3, 4));
        assert!(matches!(nmf_objective(x.view(), u.view(), v.view()), Err(Error::DimensionMismatch { .. })));
        assert!(nmf_gradients(x.view(), u.view(), v.view(), NmfBlock::V).is_err());
    }
}
