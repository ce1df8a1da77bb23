//! Bregman proximal and proximal-gradient maps.
//!
//! The proximal-gradient map with distinct gradient and anchor points splits
//! into a Bregman gradient step followed by a Bregman proximal map:
//! `Gprox(u1, u2) = prox_r(p)` with `p = grad_h_conj(grad_h(u2) - beta * grad g(u1))`.
//! The callers pass `grad g(u1)` directly, so `u1` never appears here.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{Error, Result};

/// Generating function `H` of a Bregman distance
/// `D_H(u, v) = H(u) - H(v) - <grad H(v), u - v>`.
///
/// `H` must be `sigma`-strongly convex with `lipschitz`-Lipschitz gradient.
pub trait BregmanGenerator {
    fn value(&self, u: ArrayView1<f64>) -> f64;
    fn grad(&self, u: ArrayView1<f64>) -> Array1<f64>;
    /// Gradient of the convex conjugate `H*`, the inverse map of `grad`.
    fn grad_conjugate(&self, v: ArrayView1<f64>) -> Array1<f64>;
    fn sigma(&self) -> f64;
    fn lipschitz(&self) -> f64;

    /// Diagonal Hessian weights when `H(u) = 1/2 sum_j w_j u_j^2`. Lets the
    /// built-in separable functions compute exact Bregman proximal maps.
    fn diagonal_weights(&self, len: usize) -> Option<Array1<f64>> {
        let _ = len;
        None
    }

    fn is_euclidean(&self) -> bool {
        false
    }
}

/// `H(u) = 1/2 |u|^2`, giving the squared Euclidean distance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl BregmanGenerator for Euclidean {
    fn value(&self, u: ArrayView1<f64>) -> f64 {
        0.5 * u.dot(&u)
    }
    fn grad(&self, u: ArrayView1<f64>) -> Array1<f64> {
        u.to_owned()
    }
    fn grad_conjugate(&self, v: ArrayView1<f64>) -> Array1<f64> {
        v.to_owned()
    }
    fn sigma(&self) -> f64 {
        1.0
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn diagonal_weights(&self, len: usize) -> Option<Array1<f64>> {
        Some(Array1::ones(len))
    }
    fn is_euclidean(&self) -> bool {
        true
    }
}

/// `H(u) = 1/2 sum_j w_j u_j^2` with positive weights.
#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    weights: Array1<f64>,
}

impl DiagonalQuadratic {
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() || !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(Error::invalid("diagonal generator weights must be positive and finite"));
        }
        Ok(DiagonalQuadratic { weights })
    }

    fn check(&self, len: usize) {
        assert_eq!(len, self.weights.len(), "vector length does not match generator weights");
    }
}

impl BregmanGenerator for DiagonalQuadratic {
    fn value(&self, u: ArrayView1<f64>) -> f64 {
        self.check(u.len());
        0.5 * Zip::from(&u).and(&self.weights).fold(0.0, |acc, x, w| acc + w * x * x)
    }
    fn grad(&self, u: ArrayView1<f64>) -> Array1<f64> {
        self.check(u.len());
        &u * &self.weights
    }
    fn grad_conjugate(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.check(v.len());
        &v / &self.weights
    }
    fn sigma(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    fn lipschitz(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }
    fn diagonal_weights(&self, len: usize) -> Option<Array1<f64>> {
        (len == self.weights.len()).then(|| self.weights.clone())
    }
}

pub fn bregman_divergence(h: &dyn BregmanGenerator, u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
    let g = h.grad(v);
    h.value(u) - h.value(v) - Zip::from(&g).and(&u).and(&v).fold(0.0, |acc, g, a, b| acc + g * (a - b))
}

/// A function whose Bregman proximal map can be evaluated.
pub trait Proximable {
    /// `argmin_u phi(u) + D_H(u, v) / beta`.
    fn prox(&self, v: ArrayView1<f64>, beta: f64, h: &dyn BregmanGenerator) -> Result<Array1<f64>>;

    fn value(&self, u: ArrayView1<f64>) -> f64;

    /// Gradient for smooth functions, `None` otherwise.
    fn gradient(&self, u: ArrayView1<f64>) -> Option<Array1<f64>> {
        let _ = u;
        None
    }
}

/// `phi = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFunction;

impl Proximable for ZeroFunction {
    fn prox(&self, v: ArrayView1<f64>, _beta: f64, _h: &dyn BregmanGenerator) -> Result<Array1<f64>> {
        Ok(v.to_owned())
    }
    fn value(&self, _u: ArrayView1<f64>) -> f64 {
        0.0
    }
    fn gradient(&self, u: ArrayView1<f64>) -> Option<Array1<f64>> {
        Some(Array1::zeros(u.len()))
    }
}

/// Indicator of the nonnegative orthant.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonnegIndicator;

impl Proximable for NonnegIndicator {
    fn prox(&self, v: ArrayView1<f64>, _beta: f64, h: &dyn BregmanGenerator) -> Result<Array1<f64>> {
        // separable generators project coordinate-wise
        if h.diagonal_weights(v.len()).is_none() {
            return Err(Error::Unsupported(
                "nonnegative projection under a non-separable Bregman distance".into(),
            ));
        }
        Ok(v.mapv(|x| x.max(0.0)))
    }
    fn value(&self, u: ArrayView1<f64>) -> f64 {
        if u.iter().all(|x| *x >= 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `phi(u) = weight/2 * |u - center|^2`.
#[derive(Debug, Clone)]
pub struct SquaredDistance {
    pub center: Array1<f64>,
    pub weight: f64,
}

impl Proximable for SquaredDistance {
    fn prox(&self, v: ArrayView1<f64>, beta: f64, h: &dyn BregmanGenerator) -> Result<Array1<f64>> {
        if v.len() != self.center.len() {
            return Err(Error::dims("SquaredDistance::prox", self.center.len(), v.len()));
        }
        let w = h.diagonal_weights(v.len()).ok_or_else(|| {
            Error::Unsupported("quadratic prox under a non-separable Bregman distance".into())
        })?;
        // stationarity: weight (u - c) + w (u - v) / beta = 0
        Ok(Zip::from(&v)
            .and(&self.center)
            .and(&w)
            .map_collect(|&v, &c, &w| (self.weight * c + w * v / beta) / (self.weight + w / beta)))
    }
    fn value(&self, u: ArrayView1<f64>) -> f64 {
        0.5 * self.weight * Zip::from(&u).and(&self.center).fold(0.0, |acc, a, c| acc + (a - c) * (a - c))
    }
    fn gradient(&self, u: ArrayView1<f64>) -> Option<Array1<f64>> {
        Some((&u - &self.center) * self.weight)
    }
}

/// Wraps a Euclidean proximal map given as a closure `(v, beta) -> u`.
pub struct ProxFn<F>(pub F);

impl<F> Proximable for ProxFn<F>
where
    F: Fn(ArrayView1<f64>, f64) -> Array1<f64>,
{
    fn prox(&self, v: ArrayView1<f64>, beta: f64, h: &dyn BregmanGenerator) -> Result<Array1<f64>> {
        if !h.is_euclidean() {
            return Err(Error::Unsupported("closure prox only supports the Euclidean distance".into()));
        }
        Ok((self.0)(v, beta))
    }
    fn value(&self, _u: ArrayView1<f64>) -> f64 {
        f64::NAN
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("proximal parameter beta = {beta} must be positive")));
    }
    Ok(())
}

pub fn bregman_prox(
    phi: &dyn Proximable,
    v: ArrayView1<f64>,
    beta: f64,
    h: &dyn BregmanGenerator,
) -> Result<Array1<f64>> {
    check_beta(beta)?;
    phi.prox(v, beta, h)
}

/// Bregman gradient step `grad_h_conj(grad_h(v) - beta * grad)`.
pub fn bregman_gradient_step(
    grad: ArrayView1<f64>,
    v: ArrayView1<f64>,
    beta: f64,
    h: &dyn BregmanGenerator,
) -> Array1<f64> {
    if h.is_euclidean() {
        return Zip::from(&v).and(&grad).map_collect(|&v, &g| v - beta * g);
    }
    let mut dual = h.grad(v);
    dual.scaled_add(-beta, &grad);
    h.grad_conjugate(dual.view())
}

/// Bregman proximal-gradient map: `prox_r` applied to the gradient step
/// from the anchor `v` with the gradient `grad_at` taken elsewhere.
pub fn bregman_gprox<F>(
    grad_at: ArrayView1<f64>,
    v: ArrayView1<f64>,
    beta: f64,
    prox_r: F,
    h: &dyn BregmanGenerator,
) -> Result<Array1<f64>>
where
    F: FnOnce(ArrayView1<f64>, f64) -> Result<Array1<f64>>,
{
    check_beta(beta)?;
    if grad_at.len() != v.len() {
        return Err(Error::dims("bregman_gprox", v.len(), grad_at.len()));
    }
    let p = bregman_gradient_step(grad_at, v, beta, h);
    prox_r(p.view(), beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn prox_examples() {
        let v = array![-1.0, 2.0];
        for beta in [0.1, 1.0, 10.0] {
            assert_eq!(bregman_prox(&NonnegIndicator, v.view(), beta, &Euclidean).unwrap(), array![0.0, 2.0]);
            assert_eq!(bregman_prox(&ZeroFunction, v.view(), beta, &Euclidean).unwrap(), v);
        }
        // 1/2 (u - 2)^2 + 1/2 u^2 is minimized at u = 1
        let q = SquaredDistance { center: array![2.0], weight: 1.0 };
        let u = bregman_prox(&q, array![0.0].view(), 1.0, &Euclidean).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn prox_rejects_bad_beta() {
        assert!(bregman_prox(&ZeroFunction, array![1.0].view(), 0.0, &Euclidean).is_err());
        assert!(bregman_prox(&ZeroFunction, array![1.0].view(), -1.0, &Euclidean).is_err());
    }

    #[test]
    fn gprox_examples() {
        let clamp = |p: ArrayView1<f64>, b: f64| bregman_prox(&NonnegIndicator, p, b, &Euclidean);
        let u = bregman_gprox(array![2.0].view(), array![1.0].view(), 1.0, clamp, &Euclidean).unwrap();
        assert_eq!(u, array![0.0]);

        let v = array![0.3, -0.7];
        let u = bregman_gprox(array![0.0, 0.0].view(), v.view(), 2.0, clamp, &Euclidean).unwrap();
        assert_eq!(u, bregman_prox(&NonnegIndicator, v.view(), 2.0, &Euclidean).unwrap());

        let ident = |p: ArrayView1<f64>, b: f64| bregman_prox(&ZeroFunction, p, b, &Euclidean);
        let u = bregman_gprox(array![1.0].view(), array![3.0].view(), 0.5, ident, &Euclidean).unwrap();
        assert_eq!(u, array![2.5]);

        assert!(bregman_gprox(array![1.0].view(), array![1.0].view(), 0.0, ident, &Euclidean).is_err());
    }

    #[test]
    fn diagonal_generator_gradient_step() {
        let h = DiagonalQuadratic::new(array![2.0, 4.0]).unwrap();
        assert_eq!(h.sigma(), 2.0);
        assert_eq!(h.lipschitz(), 4.0);
        // grad_h(v) - beta g = (2, 4) - (1, 2) = (1, 2); divided by w = (0.5, 0.5)
        let p = bregman_gradient_step(array![2.0, 4.0].view(), array![1.0, 1.0].view(), 0.5, &h);
        assert_eq!(p, array![0.5, 0.5]);
        let d = bregman_divergence(&h, array![1.0, 0.0].view(), array![0.0, 0.0].view());
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-15);
        assert!(DiagonalQuadratic::new(array![1.0, 0.0]).is_err());
    }

    #[test]
    fn diagonal_generator_quadratic_prox_is_stationary() {
        let h = DiagonalQuadratic::new(array![0.5, 3.0]).unwrap();
        let q = SquaredDistance { center: array![1.0, -2.0], weight: 2.0 };
        let v = array![4.0, 1.0];
        let beta = 0.7;
        let u = bregman_prox(&q, v.view(), beta, &h).unwrap();
        // grad phi(u) + (grad H(u) - grad H(v)) / beta = 0
        let res = q.gradient(u.view()).unwrap() + (h.grad(u.view()) - h.grad(v.view())) / beta;
        assert!(res.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn closure_prox_needs_euclidean() {
        let p = ProxFn(|v: ArrayView1<f64>, _b: f64| v.to_owned());
        let h = DiagonalQuadratic::new(array![2.0]).unwrap();
        assert!(matches!(bregman_prox(&p, array![1.0].view(), 1.0, &h), Err(Error::Unsupported(_))));
        assert_eq!(bregman_prox(&p, array![1.0].view(), 1.0, &Euclidean).unwrap(), array![1.0]);
    }
}
