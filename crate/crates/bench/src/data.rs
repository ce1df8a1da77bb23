//! Synthetic instances. The data of seed `s` comes from stream 0 of a
//! ChaCha8 generator seeded with `s`; initial factors come from stream 1, so
//! changing the problem size never changes which data a seed produces relative
//! to its initialization stream.

use std::fmt;
use std::str::FromStr;

use ibpg::matops::cp_reconstruct;
use ibpg::ncpd::NcpdInstance;
use ibpg::nmf::NmfInstance;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    /// `X = UV` with uniform factors.
    LowRank,
    /// `X` uniform.
    FullRank,
    /// CP tensor with uniform factors.
    Tensor,
}

impl DataKind {
    pub fn tag(self) -> &'static str {
        match self {
            DataKind::LowRank => "low-rank",
            DataKind::FullRank => "full-rank",
            DataKind::Tensor => "tensor",
        }
    }

    pub fn is_tensor(self) -> bool {
        self == DataKind::Tensor
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DataKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low-rank" => Ok(DataKind::LowRank),
            "full-rank" => Ok(DataKind::FullRank),
            "tensor" | "ncpd" => Ok(DataKind::Tensor),
            other => Err(BenchError::Config(format!("unknown data kind '{other}'"))),
        }
    }
}

pub fn data_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen::<f64>())
}

#[derive(Debug, Clone)]
pub struct SyntheticNmf {
    pub instance: NmfInstance,
    /// Generating factors of a low-rank instance.
    pub factors: Option<(Array2<f64>, Array2<f64>)>,
}

pub fn gen_synthetic_nmf(kind: DataKind, m: usize, n: usize, r: usize, seed: u64) -> Result<SyntheticNmf> {
    if m == 0 || n == 0 || r == 0 {
        return Err(BenchError::Config(format!("dimensions must be positive, got {m}x{n} with rank {r}")));
    }
    let mut rng = data_rng(seed);
    let (x, factors) = match kind {
        DataKind::LowRank => {
            let u = uniform(&mut rng, m, r);
            let v = uniform(&mut rng, r, n);
            (u.dot(&v), Some((u, v)))
        }
        DataKind::FullRank => (uniform(&mut rng, m, n), None),
        DataKind::Tensor => return Err(BenchError::Config("tensor data is not a matrix instance".into())),
    };
    Ok(SyntheticNmf { instance: NmfInstance::new(x, r)?, factors })
}

#[derive(Debug, Clone)]
pub struct SyntheticNcpd {
    pub instance: NcpdInstance,
    pub factors: [Array2<f64>; 3],
}

pub fn gen_synthetic_ncpd(dims: (usize, usize, usize), r: usize, seed: u64) -> Result<SyntheticNcpd> {
    let (i, j, k) = dims;
    if i == 0 || j == 0 || k == 0 || r == 0 {
        return Err(BenchError::Config(format!("dimensions must be positive, got {i}x{j}x{k} with rank {r}")));
    }
    let mut rng = data_rng(seed);
    let factors = [uniform(&mut rng, i, r), uniform(&mut rng, j, r), uniform(&mut rng, k, r)];
    let t = cp_reconstruct(factors[0].view(), factors[1].view(), factors[2].view())?;
    Ok(SyntheticNcpd { instance: NcpdInstance::new(t, r)?, factors })
}
