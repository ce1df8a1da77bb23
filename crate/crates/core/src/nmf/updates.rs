//! Closed-form column updates of `U` (and, through `X^T = V^T U^T`, row
//! updates of `V`) computed straight from the data. The solvers use the
//! cached-Gram kernels instead; these are the reference entry points.

use ndarray::{Array1, ArrayView1, ArrayView2};

use super::check_shapes;
use crate::error::{Error, Result};

fn column_numerator(x: ArrayView2<f64>, u: ArrayView2<f64>, v: ArrayView2<f64>, i: usize) -> Result<(Array1<f64>, f64)> {
    check_shapes(x, u, v)?;
    if i >= u.ncols() {
        return Err(Error::invalid(format!("column {i} out of range for rank {}", u.ncols())));
    }
    let vi = v.row(i);
    let vv = vi.dot(&vi);
    // X v_i - U (V v_i) + U_:i (v_i . v_i)
    let mut num = x.dot(&vi);
    num -= &u.dot(&v.dot(&vi));
    num.scaled_add(vv, &u.column(i));
    Ok((num, vv))
}

/// Minimizer over `u >= 0` of `1/2 |X - UV|^2 + 1/(2 beta) |u - u_hat|^2`
/// where `u` replaces column `i` of `U`.
pub fn ibp_column_update(
    x: ArrayView2<f64>,
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    i: usize,
    beta: f64,
    u_hat: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta = {beta} must be positive")));
    }
    if u_hat.len() != x.nrows() {
        return Err(Error::dims("ibp column update", x.nrows(), u_hat.len()));
    }
    let (mut num, vv) = column_numerator(x, u, v, i)?;
    let inv_beta = 1.0 / beta;
    num.scaled_add(inv_beta, &u_hat);
    let den = vv + inv_beta;
    Ok(num.mapv(|a| (a / den).max(0.0)))
}

/// HALS update of column `i` of `U`; `None` when row `i` of `V` is zero and
/// the column should be left as is.
pub fn hals_column_update(x: ArrayView2<f64>, u: ArrayView2<f64>, v: ArrayView2<f64>, i: usize) -> Result<Option<Array1<f64>>> {
    let (num, vv) = column_numerator(x, u, v, i)?;
    if !(vv > 0.0) {
        return Ok(None);
    }
    Ok(Some(num.mapv(|a| (a / vv).max(0.0))))
}

/// [`ibp_column_update`] for row `i` of `V`.
pub fn ibp_row_update(
    x: ArrayView2<f64>,
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    i: usize,
    beta: f64,
    v_hat: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    ibp_column_update(x.t(), v.t(), u.t(), i, beta, v_hat)
}

/// [`hals_column_update`] for row `i` of `V`.
pub fn hals_row_update(x: ArrayView2<f64>, u: ArrayView2<f64>, v: ArrayView2<f64>, i: usize) -> Result<Option<Array1<f64>>> {
    hals_column_update(x.t(), v.t(), u.t(), i)
}
