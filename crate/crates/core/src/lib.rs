//! Inertial block proximal (IBP) and inertial block proximal-gradient (IBPG)
//! methods for `min f(x_1, ..., x_s) + sum_i r_i(x_i)`, together with their
//! instantiations for nonnegative matrix factorization and three-way
//! nonnegative CP decomposition.

pub mod block;
pub mod error;
mod factor;
pub mod matops;
pub mod ncpd;
pub mod nmf;
pub mod trace;

pub use error::{Error, Result};
