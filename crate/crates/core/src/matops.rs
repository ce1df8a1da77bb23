//! Dense kernels shared by the solvers: Khatri-Rao products, mode unfolding
//! and folding of three-way tensors, PSD operator norms, projections, and the
//! plain-text matrix/tensor formats.
//!
//! Modes are zero-based. The mode-0 unfolding of an `I x J x K` tensor is the
//! `I x JK` matrix whose column `k*J + j` holds the fibre `T[:, j, k]`, which
//! is the row ordering produced by `khatri_rao(C, B)` for factors `B: J x r`
//! and `C: K x r`. Modes 1 and 2 follow the same rule (`k*I + i` and `j*I + i`).

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, Array3, ArrayView, ArrayView2, ArrayView3, Dimension, Zip};

use crate::error::{Error, Result};

pub type DenseMatrix = Array2<f64>;
pub type Tensor3 = Array3<f64>;

/// Column-wise Kronecker product. Row `i*n + j` of the result is
/// `a[i, :] * b[j, :]` for `a: m x r` and `b: n x r`.
pub fn khatri_rao(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<DenseMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::dims("khatri_rao", a.ncols(), b.ncols()));
    }
    let (m, n, r) = (a.nrows(), b.nrows(), a.ncols());
    let mut out = Array2::zeros((m * n, r));
    for i in 0..m {
        for j in 0..n {
            let mut row = out.row_mut(i * n + j);
            for c in 0..r {
                row[c] = a[[i, c]] * b[[j, c]];
            }
        }
    }
    Ok(out)
}

fn check_mode(mode: usize) -> Result<()> {
    if mode > 2 {
        return Err(Error::invalid(format!("tensor mode {mode} out of range 0..=2")));
    }
    Ok(())
}

/// Mode-`mode` matricization of a three-way tensor.
pub fn mode_unfold(t: ArrayView3<f64>, mode: usize) -> Result<DenseMatrix> {
    check_mode(mode)?;
    let (ni, nj, nk) = t.dim();
    let out = match mode {
        0 => Array2::from_shape_fn((ni, nj * nk), |(i, c)| t[[i, c % nj, c / nj]]),
        1 => Array2::from_shape_fn((nj, ni * nk), |(j, c)| t[[c % ni, j, c / ni]]),
        _ => Array2::from_shape_fn((nk, ni * nj), |(k, c)| t[[c % ni, c / ni, k]]),
    };
    Ok(out)
}

/// Inverse of [`mode_unfold`].
pub fn mode_fold(m: ArrayView2<f64>, mode: usize, dims: (usize, usize, usize)) -> Result<Tensor3> {
    check_mode(mode)?;
    let (ni, nj, nk) = dims;
    let expected = match mode {
        0 => (ni, nj * nk),
        1 => (nj, ni * nk),
        _ => (nk, ni * nj),
    };
    if m.dim() != expected {
        return Err(Error::dims(
            "mode_fold",
            format!("{}x{}", expected.0, expected.1),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let out = match mode {
        0 => Array3::from_shape_fn(dims, |(i, j, k)| m[[i, k * nj + j]]),
        1 => Array3::from_shape_fn(dims, |(i, j, k)| m[[j, k * ni + i]]),
        _ => Array3::from_shape_fn(dims, |(i, j, k)| m[[k, j * ni + i]]),
    };
    Ok(out)
}

/// CP model `sum_c a[:, c] o b[:, c] o c[:, c]`.
pub fn cp_reconstruct(a: ArrayView2<f64>, b: ArrayView2<f64>, c: ArrayView2<f64>) -> Result<Tensor3> {
    let r = a.ncols();
    if b.ncols() != r || c.ncols() != r {
        return Err(Error::dims(
            "cp_reconstruct",
            format!("{r} columns"),
            format!("{} and {}", b.ncols(), c.ncols()),
        ));
    }
    // T_(0) = A (C kr B)^T
    let kr = khatri_rao(c, b)?;
    let unfolded = a.dot(&kr.t());
    mode_fold(unfolded.view(), 0, (a.nrows(), b.nrows(), c.nrows()))
}

pub const POWER_TOL: f64 = 1e-9;
pub const POWER_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    /// Largest eigenvalue estimate (Rayleigh quotient).
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Starts from the normalized all-ones vector, so the result is a pure
/// function of `m`. Stops once the Rayleigh quotient changes by at most
/// `tol` relative. When `max_iter` is reached the best estimate is returned
/// with `converged == false`.
pub fn operator_norm_psd(m: ArrayView2<f64>, tol: f64, max_iter: usize) -> Result<PowerIteration> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::dims("operator_norm_psd", "square matrix", format!("{}x{}", n, m.ncols())));
    }
    if n == 0 {
        return Ok(PowerIteration { value: 0.0, iterations: 0, converged: true });
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut w = m.dot(&v);
    if w.iter().all(|x| *x == 0.0) {
        // all-ones lies in the null space; retry from a fixed vector with
        // distinct entries before concluding the matrix is zero on it
        v = Array1::from_shape_fn(n, |i| 1.0 + i as f64);
        let nv = v.dot(&v).sqrt();
        v /= nv;
        w = m.dot(&v);
        if w.iter().all(|x| *x == 0.0) {
            return Ok(PowerIteration { value: 0.0, iterations: 1, converged: true });
        }
    }
    let mut lambda = v.dot(&w);
    for it in 1..=max_iter {
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(PowerIteration { value: 0.0, iterations: it, converged: true });
        }
        v = &w / norm;
        w = m.dot(&v);
        let next = v.dot(&w);
        let change = (next - lambda).abs();
        lambda = next;
        if change <= tol * lambda.abs() {
            return Ok(PowerIteration { value: lambda, iterations: it, converged: true });
        }
    }
    Ok(PowerIteration { value: lambda, iterations: max_iter, converged: false })
}

/// [`operator_norm_psd`] with the default tolerance and iteration cap.
pub fn spectral_norm_psd(m: ArrayView2<f64>) -> Result<f64> {
    let res = operator_norm_psd(m, POWER_TOL, POWER_MAX_ITER)?;
    if !res.converged {
        log::debug!("power iteration hit {} iterations without converging", res.iterations);
    }
    Ok(res.value)
}

pub fn nonneg_project<D: Dimension>(a: ArrayView<f64, D>) -> ndarray::Array<f64, D> {
    a.mapv(|x| x.max(0.0))
}

pub fn frobenius_norm<D: Dimension>(a: ArrayView<f64, D>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Frobenius inner product of two equally shaped arrays.
pub fn frobenius_dot<D: Dimension>(a: ArrayView<f64, D>, b: ArrayView<f64, D>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|x, y| acc += x * y);
    acc
}

pub fn ensure_finite<D: Dimension>(a: ArrayView<f64, D>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite entries")))
    }
}

// ---- text formats ----

/// Formats a float with 17 significant digits so it parses back bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix<W: Write>(mut w: W, m: ArrayView2<f64>) -> Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_tensor<W: Write>(mut w: W, t: ArrayView3<f64>) -> Result<()> {
    let (i, j, k) = t.dim();
    writeln!(w, "{i} {j} {k}")?;
    write_matrix(w, mode_unfold(t, 0)?.view())
}

fn parse_header(line: Option<(usize, String)>, n: usize) -> Result<Vec<usize>> {
    let (lineno, text) = line.ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    let dims: Vec<usize> = text
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
    if dims.len() != n {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected {n} dimensions, found {}", dims.len()),
        });
    }
    Ok(dims)
}

fn read_matrix_lines<I: Iterator<Item = (usize, String)>>(lines: &mut I) -> Result<DenseMatrix> {
    let dims = parse_header(lines.next(), 2)?;
    let (m, n) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(m * n);
    for row in 0..m {
        let (lineno, text) = lines.next().ok_or(Error::Parse {
            line: row + 2,
            msg: format!("expected {m} rows, found {row}"),
        })?;
        let before = data.len();
        for tok in text.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::Parse { line: lineno, msg: e.to_string() })?;
            if !x.is_finite() {
                return Err(Error::Parse { line: lineno, msg: format!("non-finite value {tok}") });
            }
            data.push(x);
        }
        if data.len() - before != n {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {n} values, found {}", data.len() - before),
            });
        }
    }
    Ok(Array2::from_shape_vec((m, n), data).expect("length checked"))
}

fn numbered_lines<R: BufRead>(r: R) -> impl Iterator<Item = (usize, String)> {
    r.lines()
        .map_while(|l| l.ok())
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<DenseMatrix> {
    read_matrix_lines(&mut numbered_lines(r))
}

pub fn read_tensor<R: BufRead>(r: R) -> Result<Tensor3> {
    let mut lines = numbered_lines(r);
    let dims = parse_header(lines.next(), 3)?;
    let m = read_matrix_lines(&mut lines)?;
    if m.nrows() != dims[0] || m.ncols() != dims[1] * dims[2] {
        return Err(Error::Parse {
            line: 2,
            msg: format!(
                "unfolding is {}x{}, tensor header says {}x{}x{}",
                m.nrows(),
                m.ncols(),
                dims[0],
                dims[1],
                dims[2]
            ),
        });
    }
    mode_fold(m.view(), 0, (dims[0], dims[1], dims[2]))
}
