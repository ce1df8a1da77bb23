//! Independent reference computations: plain loops, finite differences and
//! a Jacobi eigensolver. Nothing here calls into the library.
#![allow(dead_code)]

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen::<f64>())
}

pub fn product(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for p in 0..a.ncols() {
                s += a[[i, p]] * b[[p, j]];
            }
            out[[i, j]] = s;
        }
    }
    out
}

pub fn nmf_objective(x: &Array2<f64>, u: &Array2<f64>, v: &Array2<f64>) -> f64 {
    let uv = product(u, v);
    let mut s = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            s += (x[[i, j]] - uv[[i, j]]).powi(2);
        }
    }
    0.5 * s
}

/// `T[i,j,k] = sum_c A[i,c] B[j,c] C[k,c]`.
pub fn cp_tensor(a: &Array2<f64>, b: &Array2<f64>, c: &Array2<f64>) -> Array3<f64> {
    let r = a.ncols();
    Array3::from_shape_fn((a.nrows(), b.nrows(), c.nrows()), |(i, j, k)| {
        (0..r).map(|q| a[[i, q]] * b[[j, q]] * c[[k, q]]).sum()
    })
}

pub fn ncpd_objective(t: &Array3<f64>, f: &[Array2<f64>; 3]) -> f64 {
    let rec = cp_tensor(&f[0], &f[1], &f[2]);
    0.5 * t.iter().zip(rec.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Mode unfolding by index arithmetic: mode 0 puts `T[i,j,k]` at column
/// `k*J + j`, mode 1 at `k*I + i`, mode 2 at `j*I + i`.
pub fn unfold(t: &Array3<f64>, mode: usize) -> Array2<f64> {
    let (ni, nj, nk) = t.dim();
    let mut out = match mode {
        0 => Array2::zeros((ni, nj * nk)),
        1 => Array2::zeros((nj, ni * nk)),
        _ => Array2::zeros((nk, ni * nj)),
    };
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                let (row, col) = match mode {
                    0 => (i, k * nj + j),
                    1 => (j, k * ni + i),
                    _ => (k, j * ni + i),
                };
                out[[row, col]] = t[[i, j, k]];
            }
        }
    }
    out
}

/// Khatri-Rao chain of the two kept factors, ordered to match [`unfold`]:
/// row `p*rows(b) + q` holds `a[p,c] * b[q,c]` with `a` the later mode.
pub fn kept_chain(f: &[Array2<f64>; 3], skip: usize) -> Array2<f64> {
    let (a, b) = match skip {
        0 => (&f[2], &f[1]),
        1 => (&f[2], &f[0]),
        _ => (&f[1], &f[0]),
    };
    let r = a.ncols();
    let mut out = Array2::zeros((a.nrows() * b.nrows(), r));
    for p in 0..a.nrows() {
        for q in 0..b.nrows() {
            for c in 0..r {
                out[[p * b.nrows() + q, c]] = a[[p, c]] * b[[q, c]];
            }
        }
    }
    out
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central differences of `f` in every entry of `at`.
pub fn finite_difference(at: &Array2<f64>, h: f64, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(at.dim());
    let mut x = at.clone();
    for idx in 0..at.len() {
        let (i, j) = (idx / at.ncols(), idx % at.ncols());
        let orig = x[[i, j]];
        x[[i, j]] = orig + h;
        let fp = f(&x);
        x[[i, j]] = orig - h;
        let fm = f(&x);
        x[[i, j]] = orig;
        g[[i, j]] = (fp - fm) / (2.0 * h);
    }
    g
}

pub fn relative_difference(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = a - b;
    frobenius(&diff) / frobenius(b).max(1e-300)
}

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_max_eigenvalue(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[[i, j]].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).fold(f64::NEG_INFINITY, f64::max)
}

/// Entry-by-entry minimizer over `u >= 0` of
/// `1/2 |R - u v^T|^2 + 1/(2 beta) |u - u_hat|^2`, where `R` is the residual
/// with column `i` of `U` removed and `v` is row `i` of `V`.
pub fn column_oracle(x: &Array2<f64>, u: &Array2<f64>, v: &Array2<f64>, i: usize, beta: f64, u_hat: &Array1<f64>) -> Array1<f64> {
    let (m, n) = x.dim();
    let r = u.ncols();
    Array1::from_shape_fn(m, |p| {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for j in 0..n {
            let mut res = x[[p, j]];
            for c in 0..r {
                if c != i {
                    res -= u[[p, c]] * v[[c, j]];
                }
            }
            lin += res * v[[i, j]];
            quad += v[[i, j]] * v[[i, j]];
        }
        // stationary point of a 1-D convex quadratic, then clamped
        ((lin + u_hat[p] / beta) / (quad + 1.0 / beta)).max(0.0)
    })
}

/// `tau_k` straight from the recurrence, `tau_0 = 1`.
pub fn tau_sequence(n: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..n {
        let t: f64 = *out.last().unwrap();
        out.push((1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0);
    }
    out
}
