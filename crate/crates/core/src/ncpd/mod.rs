//! Three-way nonnegative CP decomposition
//! `min 1/2 |T - [[X1, X2, X3]]|_F^2` over nonnegative factors.

mod solver;

use ndarray::{Array2, ArrayView3, Zip};

use crate::error::{Error, Result};
use crate::matops::{ensure_finite, khatri_rao, mode_unfold, spectral_norm_psd, Tensor3};

pub use solver::{run_ncpd, NcpdAlgo, NcpdConstants, NcpdInit, NcpdOptions, NcpdRun, NcpdState};

#[derive(Debug, Clone, PartialEq)]
pub struct NcpdInstance {
    t: Tensor3,
    rank: usize,
}

impl NcpdInstance {
    pub fn new(t: Tensor3, rank: usize) -> Result<Self> {
        ensure_finite(t.view(), "tensor")?;
        if t.iter().any(|v| *v < 0.0) {
            return Err(Error::invalid("NCPD data must be nonnegative"));
        }
        if t.is_empty() {
            return Err(Error::invalid("tensor has an empty mode"));
        }
        if rank == 0 {
            return Err(Error::invalid("CP rank must be at least 1"));
        }
        Ok(NcpdInstance { t, rank })
    }

    pub fn data(&self) -> ArrayView3<'_, f64> {
        self.t.view()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.t.dim()
    }
}

fn check_factors(factors: &[Array2<f64>]) -> Result<usize> {
    if factors.len() != 3 {
        return Err(Error::dims("cp factors", 3, factors.len()));
    }
    let r = factors[0].ncols();
    if factors.iter().any(|f| f.ncols() != r) {
        return Err(Error::dims(
            "cp factors",
            format!("{r} columns each"),
            format!("{:?}", factors.iter().map(|f| f.ncols()).collect::<Vec<_>>()),
        ));
    }
    Ok(r)
}

fn kept(skip: usize) -> Result<(usize, usize)> {
    match skip {
        0 => Ok((2, 1)),
        1 => Ok((2, 0)),
        2 => Ok((1, 0)),
        _ => Err(Error::invalid(format!("mode {skip} out of range for a 3-way tensor"))),
    }
}

/// Khatri-Rao product of the factors other than `skip`, highest mode first,
/// so that `T_(skip) = X_skip B^T` for a CP tensor.
pub fn build_khatri_chain(factors: &[Array2<f64>], skip: usize) -> Result<Array2<f64>> {
    check_factors(factors)?;
    let (a, b) = kept(skip)?;
    khatri_rao(factors[a].view(), factors[b].view())
}

/// `B^T B` as the entrywise product of the kept factors' Gram matrices.
pub fn ncpd_gram(factors: &[Array2<f64>], skip: usize) -> Result<Array2<f64>> {
    check_factors(factors)?;
    let (a, b) = kept(skip)?;
    let ga = factors[a].t().dot(&factors[a]);
    let gb = factors[b].t().dot(&factors[b]);
    Ok(Zip::from(&ga).and(&gb).map_collect(|x, y| x * y))
}

/// `|B^T B|`, the Lipschitz constant of the gradient in factor `skip`.
pub fn ncpd_lipschitz(factors: &[Array2<f64>], skip: usize) -> Result<f64> {
    spectral_norm_psd(ncpd_gram(factors, skip)?.view())
}

/// `(X_i B^T - T_(i)) B`, evaluated as `X_i (B^T B) - T_(i) B`.
pub fn ncpd_gradient(t: ArrayView3<f64>, factors: &[Array2<f64>], i: usize) -> Result<Array2<f64>> {
    check_factors(factors)?;
    let (di, dj, dk) = t.dim();
    let dims = [di, dj, dk];
    for (n, f) in factors.iter().enumerate() {
        if f.nrows() != dims[n] {
            return Err(Error::dims("cp factor rows", dims[n], f.nrows()));
        }
    }
    let b = build_khatri_chain(factors, i)?;
    let unfolded = mode_unfold(t, i)?;
    let mut g = factors[i].dot(&ncpd_gram(factors, i)?);
    g -= &unfolded.dot(&b);
    Ok(g)
}

/// `1/2 |T - [[X1, X2, X3]]|_F^2`.
pub fn ncpd_objective(t: ArrayView3<f64>, factors: &[Array2<f64>]) -> Result<f64> {
    check_factors(factors)?;
    let rec = crate::matops::cp_reconstruct(factors[0].view(), factors[1].view(), factors[2].view())?;
    if rec.dim() != t.dim() {
        return Err(Error::dims("cp reconstruction", format!("{:?}", t.dim()), format!("{:?}", rec.dim())));
    }
    Ok(0.5 * Zip::from(&rec).and(&t).fold(0.0, |acc, a, b| acc + (a - b) * (a - b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};

    #[test]
    fn rank_one_chain_and_lipschitz() {
        let f = vec![array![[1.0], [2.0]], array![[3.0], [4.0]], array![[5.0], [6.0]]];
        let b = build_khatri_chain(&f, 0).unwrap();
        assert_eq!(b, array![[15.0], [20.0], [18.0], [24.0]]);
        // (|b| |c|)^2 = 25 * 61
        assert!((ncpd_lipschitz(&f, 0).unwrap() - 25.0 * 61.0).abs() < 1e-9);
        assert!(build_khatri_chain(&f, 3).is_err());
        assert!(build_khatri_chain(&f[..2], 0).is_err());
    }

    #[test]
    fn orthonormal_kept_factors() {
        let e = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let f = vec![array![[2.0, 1.0]], e.clone(), e];
        assert!((ncpd_lipschitz(&f, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_has_zero_gradient() {
        let f = vec![
            array![[1.0, 0.5], [0.2, 1.0]],
            array![[0.3, 0.0], [1.0, 2.0], [0.5, 0.5]],
            array![[1.0, 1.0], [0.0, 0.4]],
        ];
        let t = crate::matops::cp_reconstruct(f[0].view(), f[1].view(), f[2].view()).unwrap();
        for i in 0..3 {
            let g = ncpd_gradient(t.view(), &f, i).unwrap();
            assert!(g.iter().all(|x| x.abs() < 1e-12));
        }
        assert!(ncpd_objective(t.view(), &f).unwrap() < 1e-24);
    }

    #[test]
    fn instance_validation() {
        assert!(NcpdInstance::new(Array3::ones((2, 2, 2)), 1).is_ok());
        assert!(NcpdInstance::new(Array3::ones((2, 2, 2)), 0).is_err());
        assert!(NcpdInstance::new(Array3::from_elem((2, 2, 2), -1.0), 1).is_err());
    }
}
