//! Kernels for updating one nonnegative factor `F` (`p x r`) of a model
//! `Y ~ F G^T` with everything else fixed. Only two quantities are needed:
//! the cross term `C = Y G` (`p x r`) and the Gram matrix `Q = G^T G`
//! (`r x r`). NMF uses them with `G = V^T` (or `G = U` for `V^T`), NCPD with
//! the Khatri-Rao chain of the other factors.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::block::{extrapolate_unchecked, StepParams};
use crate::matops::{frobenius_dot, spectral_norm_psd};

#[derive(Debug, Clone)]
pub(crate) struct FactorSystem {
    pub cross: Array2<f64>,
    pub gram: Array2<f64>,
}

impl FactorSystem {
    /// `grad_F 1/2 |Y - F G^T|^2 = F Q - C`.
    pub fn gradient(&self, at: ArrayView2<f64>) -> Array2<f64> {
        let mut g = at.dot(&self.gram);
        g -= &self.cross;
        g
    }

    pub fn lipschitz(&self) -> f64 {
        spectral_norm_psd(self.gram.view()).expect("Gram matrices are square")
    }

    /// `1/2 |Y - F G^T|^2` from the cached terms, given `half_norm_sq = 1/2 |Y|^2`.
    /// Clamped at zero; cancellation limits its accuracy to about
    /// `1e-16 |Y|^2` in absolute terms.
    pub fn objective(&self, f: ArrayView2<f64>, half_norm_sq: f64) -> f64 {
        let ftf = f.t().dot(&f);
        let val = half_norm_sq - frobenius_dot(f, self.cross.view()) + 0.5 * frobenius_dot(ftf.view(), self.gram.view());
        val.max(0.0)
    }

    /// `max(0, anchor - step * (grad_point Q - C))`.
    pub fn projected_gradient_step(&self, anchor: ArrayView2<f64>, grad_point: ArrayView2<f64>, step: f64) -> Array2<f64> {
        let g = self.gradient(grad_point);
        Zip::from(&anchor).and(&g).map_collect(|&a, &g| (a - step * g).max(0.0))
    }

    /// Closed-form minimizer over column `i` of
    /// `1/2 |Y - F G^T|^2 + inv_beta/2 |F_:i - anchor|^2` subject to `F_:i >= 0`,
    /// written into `f`. With `inv_beta == 0` this is the HALS update.
    /// Returns `false` (leaving `f` untouched) when the denominator vanishes.
    pub fn column_update(&self, f: &mut Array2<f64>, i: usize, inv_beta: f64, anchor: Option<ArrayView1<f64>>) -> bool {
        let qii = self.gram[[i, i]];
        let den = qii + inv_beta;
        if !(den > 0.0) {
            return false;
        }
        // C_:i - F Q_:i + F_:i Q_ii
        let mut num: Array1<f64> = self.cross.column(i).to_owned();
        num -= &f.dot(&self.gram.column(i));
        num.scaled_add(qii, &f.column(i));
        if let Some(a) = anchor {
            num.scaled_add(inv_beta, &a);
        }
        let new = num.mapv(|x| (x / den).max(0.0));
        f.column_mut(i).assign(&new);
        true
    }
}

/// Inner repeat policy for updating the same block several times while its
/// cached cross/Gram terms stay valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeatRule {
    /// Repeats allowed per block: `1 + floor(rho * other_dim / r)`, capped.
    pub rho: f64,
    pub cap: usize,
    /// Keep repeating while the last repeat improved the block objective by
    /// at least this fraction.
    pub min_rel_improvement: f64,
}

impl Default for RepeatRule {
    fn default() -> Self {
        RepeatRule { rho: 0.5, cap: 10, min_rel_improvement: 1e-2 }
    }
}

impl RepeatRule {
    pub const SINGLE: RepeatRule = RepeatRule { rho: 0.0, cap: 1, min_rel_improvement: 0.0 };

    pub fn max_repeats(&self, other_dim: usize, rank: usize) -> usize {
        let extra = (self.rho * other_dim as f64 / rank.max(1) as f64).floor();
        let n = 1 + if extra.is_finite() && extra > 0.0 { extra as usize } else { 0 };
        n.min(self.cap).max(1)
    }

    pub fn keep_going(&self, before: f64, after: f64) -> bool {
        before > 0.0 && (before - after) >= self.min_rel_improvement * before
    }
}

/// `reps` projected-gradient steps on one factor with fixed parameters: the
/// gradient is taken at `f + gamma (f - prev)` and the step is anchored at
/// `f + alpha (f - prev)`. Stops early once a repeat improves the block
/// objective by too little.
pub(crate) fn inertial_gradient_repeats(
    f: &mut Array2<f64>,
    prev: &mut Array2<f64>,
    sys: &FactorSystem,
    p: StepParams,
    reps: usize,
    rule: &RepeatRule,
    half_norm_sq: f64,
) {
    let mut before = if reps > 1 { sys.objective(f.view(), half_norm_sq) } else { f64::NAN };
    for rep in 0..reps {
        let anchor = extrapolate_unchecked(f.view(), prev.view(), p.alpha);
        let grad_point = extrapolate_unchecked(f.view(), prev.view(), p.gamma);
        let next = sys.projected_gradient_step(anchor.view(), grad_point.view(), p.beta);
        *prev = std::mem::replace(f, next);
        if rep + 1 < reps {
            let after = sys.objective(f.view(), half_norm_sq);
            if !rule.keep_going(before, after) {
                break;
            }
            before = after;
        }
    }
}

/// Column-by-column sweeps: HALS when `inertia` is `None`, otherwise the
/// inertial proximal update with `(alpha, 1/beta)`, each column extrapolated
/// from its own previous value.
pub(crate) fn column_sweeps(
    f: &mut Array2<f64>,
    prev: &mut Array2<f64>,
    sys: &FactorSystem,
    inertia: Option<(f64, f64)>,
    reps: usize,
    rule: &RepeatRule,
    half_norm_sq: f64,
) {
    let r = f.ncols();
    let mut before = if reps > 1 { sys.objective(f.view(), half_norm_sq) } else { f64::NAN };
    for rep in 0..reps {
        for i in 0..r {
            let old = f.column(i).to_owned();
            let changed = match inertia {
                Some((alpha, inv_beta)) => {
                    let hat = extrapolate_unchecked(old.view(), prev.column(i), alpha);
                    sys.column_update(f, i, inv_beta, Some(hat.view()))
                }
                None => sys.column_update(f, i, 0.0, None),
            };
            if changed {
                prev.column_mut(i).assign(&old);
            }
        }
        if rep + 1 < reps {
            let after = sys.objective(f.view(), half_norm_sq);
            if !rule.keep_going(before, after) {
                break;
            }
            before = after;
        }
    }
}
