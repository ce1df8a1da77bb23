use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// How block indices are picked inside an outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderPolicy {
    /// `0, 1, ..., s-1` repeated; `T_k` must be a multiple of `s`.
    #[default]
    Cyclic,
    /// Concatenated independent uniform permutations of `0..s`, truncated to `T_k`.
    RandomPermutation,
}

impl FromStr for OrderPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cyclic" => Ok(OrderPolicy::Cyclic),
            "random" | "random-permutation" => Ok(OrderPolicy::RandomPermutation),
            other => Err(Error::invalid(format!("unknown order policy '{other}'"))),
        }
    }
}

impl fmt::Display for OrderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderPolicy::Cyclic => "cyclic",
            OrderPolicy::RandomPermutation => "random",
        })
    }
}

/// Block indices for one outer loop of length `t_k`. Every index in `0..s`
/// appears at least once.
pub fn select_blocks<R: Rng + ?Sized>(policy: OrderPolicy, s: usize, t_k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if s == 0 {
        return Err(Error::invalid("block count must be positive"));
    }
    if t_k < s {
        return Err(Error::invalid(format!("inner loop length {t_k} is smaller than the block count {s}")));
    }
    match policy {
        OrderPolicy::Cyclic => {
            if t_k % s != 0 {
                return Err(Error::invalid(format!(
                    "cyclic order needs an inner loop length that is a multiple of {s}, got {t_k}"
                )));
            }
            Ok((0..t_k).map(|j| j % s).collect())
        }
        OrderPolicy::RandomPermutation => {
            let mut out = Vec::with_capacity(t_k + s);
            let mut perm: Vec<usize> = (0..s).collect();
            while out.len() < t_k {
                perm.shuffle(rng);
                out.extend_from_slice(&perm);
            }
            out.truncate(t_k);
            Ok(out)
        }
    }
}
