//! NMF seen as a generic block problem, for the block solvers and the
//! sufficient-decrease diagnostic.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::updates::{ibp_column_update, ibp_row_update};
use super::{nmf_objective, NmfInstance};
use crate::block::{BlockProblem, BlockVector, BregmanGenerator, NonnegIndicator, Proximable};
use crate::error::{Error, Result};
use crate::matops::{frobenius_norm, spectral_norm_psd};

fn nonneg_penalty(xi: ArrayView1<f64>) -> f64 {
    NonnegIndicator.value(xi)
}

fn residual(x: ArrayView2<f64>, u: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
    let mut r = u.dot(v);
    r -= &x;
    r
}

/// Two blocks: `U` and `V`, each flattened row-major.
#[derive(Debug, Clone)]
pub struct NmfFactorProblem<'a> {
    instance: &'a NmfInstance,
    norm: f64,
}

impl<'a> NmfFactorProblem<'a> {
    pub fn new(instance: &'a NmfInstance) -> Self {
        NmfFactorProblem { instance, norm: frobenius_norm(instance.data()) }
    }

    pub fn pack(&self, u: &Array2<f64>, v: &Array2<f64>) -> Result<BlockVector> {
        let (m, n) = self.instance.dims();
        let r = self.instance.rank();
        if u.dim() != (m, r) || v.dim() != (r, n) {
            return Err(Error::dims("nmf blocks", format!("{m}x{r} and {r}x{n}"), format!("{:?} and {:?}", u.dim(), v.dim())));
        }
        BlockVector::new(vec![u.iter().copied().collect(), v.iter().copied().collect()])
    }

    pub fn unpack(&self, x: &BlockVector) -> (Array2<f64>, Array2<f64>) {
        let (m, n) = self.instance.dims();
        let r = self.instance.rank();
        let u = Array2::from_shape_vec((m, r), x.block(0).to_vec()).expect("U block shape");
        let v = Array2::from_shape_vec((r, n), x.block(1).to_vec()).expect("V block shape");
        (u, v)
    }

    fn with_block(&self, block: usize, x: &BlockVector, at: ArrayView1<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        if at.len() != x.block(block).len() {
            return Err(Error::dims("nmf block", x.block(block).len(), at.len()));
        }
        let mut y = x.clone();
        y.replace(block, at.to_owned());
        Ok(self.unpack(&y))
    }
}

impl BlockProblem for NmfFactorProblem<'_> {
    fn num_blocks(&self) -> usize {
        2
    }

    fn smooth_value(&self, x: &BlockVector) -> f64 {
        let (u, v) = self.unpack(x);
        nmf_objective(self.instance.data(), u.view(), v.view()).expect("shapes fixed by unpack")
    }

    fn penalty(&self, _block: usize, xi: ArrayView1<f64>) -> f64 {
        nonneg_penalty(xi)
    }

    fn partial_gradient(&self, block: usize, x: &BlockVector, at: ArrayView1<f64>) -> Result<Array1<f64>> {
        let (u, v) = self.with_block(block, x, at)?;
        let res = residual(self.instance.data(), &u, &v);
        let g = match block {
            0 => res.dot(&v.t()),
            1 => u.t().dot(&res),
            _ => return Err(Error::invalid(format!("block {block} out of range"))),
        };
        Ok(g.iter().copied().collect())
    }

    fn prox_penalty(&self, _block: usize, v: ArrayView1<f64>, beta: f64, h: &dyn BregmanGenerator) -> Result<Array1<f64>> {
        NonnegIndicator.prox(v, beta, h)
    }

    fn block_lipschitz(&self, block: usize, x: &BlockVector) -> Result<f64> {
        let (u, v) = self.unpack(x);
        let gram = match block {
            0 => v.dot(&v.t()),
            1 => u.t().dot(&u),
            _ => return Err(Error::invalid(format!("block {block} out of range"))),
        };
        spectral_norm_psd(gram.view())
    }

    fn relative_error(&self, x: &BlockVector) -> f64 {
        (2.0 * self.smooth_value(x)).sqrt() / self.norm
    }
}

/// `2r` blocks: the columns of `U`, then the rows of `V`. Each block
/// subproblem has a closed-form Euclidean proximal map.
#[derive(Debug, Clone)]
pub struct NmfColumnProblem<'a> {
    instance: &'a NmfInstance,
    norm: f64,
}

impl<'a> NmfColumnProblem<'a> {
    pub fn new(instance: &'a NmfInstance) -> Self {
        NmfColumnProblem { instance, norm: frobenius_norm(instance.data()) }
    }

    pub fn pack(&self, u: &Array2<f64>, v: &Array2<f64>) -> Result<BlockVector> {
        let (m, n) = self.instance.dims();
        let r = self.instance.rank();
        if u.dim() != (m, r) || v.dim() != (r, n) {
            return Err(Error::dims("nmf blocks", format!("{m}x{r} and {r}x{n}"), format!("{:?} and {:?}", u.dim(), v.dim())));
        }
        let blocks = u.columns().into_iter().map(|c| c.to_owned()).chain(v.rows().into_iter().map(|row| row.to_owned()));
        BlockVector::new(blocks.collect())
    }

    pub fn unpack(&self, x: &BlockVector) -> (Array2<f64>, Array2<f64>) {
        let (m, n) = self.instance.dims();
        let r = self.instance.rank();
        let mut u = Array2::zeros((m, r));
        let mut v = Array2::zeros((r, n));
        for i in 0..r {
            u.column_mut(i).assign(&x.block(i));
            v.row_mut(i).assign(&x.block(r + i));
        }
        (u, v)
    }
}

impl BlockProblem for NmfColumnProblem<'_> {
    fn num_blocks(&self) -> usize {
        2 * self.instance.rank()
    }

    fn smooth_value(&self, x: &BlockVector) -> f64 {
        let (u, v) = self.unpack(x);
        nmf_objective(self.instance.data(), u.view(), v.view()).expect("shapes fixed by unpack")
    }

    fn penalty(&self, _block: usize, xi: ArrayView1<f64>) -> f64 {
        nonneg_penalty(xi)
    }

    fn partial_gradient(&self, block: usize, x: &BlockVector, at: ArrayView1<f64>) -> Result<Array1<f64>> {
        let r = self.instance.rank();
        if block >= 2 * r || at.len() != x.block(block).len() {
            return Err(Error::invalid(format!("block {block} or its length is out of range")));
        }
        let mut y = x.clone();
        y.replace(block, at.to_owned());
        let (u, v) = self.unpack(&y);
        let res = residual(self.instance.data(), &u, &v);
        Ok(if block < r { res.dot(&v.row(block)) } else { res.t().dot(&u.column(block - r)) })
    }

    fn prox_penalty(&self, _block: usize, v: ArrayView1<f64>, beta: f64, h: &dyn BregmanGenerator) -> Result<Array1<f64>> {
        NonnegIndicator.prox(v, beta, h)
    }

    fn block_lipschitz(&self, block: usize, x: &BlockVector) -> Result<f64> {
        let r = self.instance.rank();
        if block >= 2 * r {
            return Err(Error::invalid(format!("block {block} out of range")));
        }
        // the partner of column i of U is row i of V and vice versa
        let partner = x.block((block + r) % (2 * r));
        Ok(partner.dot(&partner))
    }

    fn exact_block_prox(
        &self,
        block: usize,
        x: &BlockVector,
        anchor: ArrayView1<f64>,
        beta: f64,
        h: &dyn BregmanGenerator,
    ) -> Result<Array1<f64>> {
        if !h.is_euclidean() {
            return Err(Error::Unsupported("closed-form NMF column update needs the Euclidean distance".into()));
        }
        let r = self.instance.rank();
        let (u, v) = self.unpack(x);
        let data = self.instance.data();
        match block {
            b if b < r => ibp_column_update(data, u.view(), v.view(), b, beta, anchor),
            b if b < 2 * r => ibp_row_update(data, u.view(), v.view(), b - r, beta, anchor),
            _ => Err(Error::invalid(format!("block {block} out of range"))),
        }
    }

    fn relative_error(&self, x: &BlockVector) -> f64 {
        (2.0 * self.smooth_value(x)).sqrt() / self.norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmf::NmfInit;

    #[test]
    fn pack_unpack_round_trip() {
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i + 2 * j) as f64);
        let inst = NmfInstance::new(x, 2).unwrap();
        let init = NmfInit::random(5, 4, 2, 3);
        let p = NmfFactorProblem::new(&inst);
        let (u, v) = p.unpack(&p.pack(&init.u, &init.v).unwrap());
        assert_eq!((u, v), (init.u.clone(), init.v.clone()));
        let c = NmfColumnProblem::new(&inst);
        let bv = c.pack(&init.u, &init.v).unwrap();
        assert_eq!(bv.num_blocks(), 4);
        assert_eq!(c.unpack(&bv), (init.u, init.v));
    }
}
