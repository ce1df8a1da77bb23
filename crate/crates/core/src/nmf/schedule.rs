use crate::block::StepParams;
use crate::error::{Error, Result};

/// `tau_k = (1 + sqrt(1 + 4 tau_{k-1}^2)) / 2`, starting from `tau_0 = 1`.
pub fn nesterov_tau_step(tau_prev: f64) -> Result<f64> {
    if !(tau_prev >= 1.0) || !tau_prev.is_finite() {
        return Err(Error::invalid(format!("tau = {tau_prev} must be >= 1")));
    }
    Ok(0.5 * (1.0 + (1.0 + 4.0 * tau_prev * tau_prev).sqrt()))
}

/// Inertial constants of the IBPG schedule: the gradient-point coefficient is
/// `gamma = min((tau_k - 1)/tau_k, gamma_tilde * sqrt(L_prev / L_cur))` and the
/// anchor coefficient is `alpha = alpha_breve * gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpgConstants {
    pub gamma_tilde: f64,
    pub alpha_breve: f64,
}

impl IbpgConstants {
    pub const IBPG: IbpgConstants = IbpgConstants { gamma_tilde: 0.99, alpha_breve: 1.01 };
    pub const APGC: IbpgConstants = IbpgConstants { gamma_tilde: 0.9999, alpha_breve: 0.9999 };
}

impl Default for IbpgConstants {
    fn default() -> Self {
        IbpgConstants::IBPG
    }
}

/// Step parameters for one block at outer loop `k`, with stepsize `1 / L_cur`.
pub fn ibpg_nmf_params(tau_k: f64, l_cur: f64, l_prev: f64, c: IbpgConstants) -> Result<StepParams> {
    if !(l_cur > 0.0) || !(l_prev > 0.0) {
        return Err(Error::invalid(format!(
            "Lipschitz constants must be positive, got L = {l_cur}, L_prev = {l_prev}"
        )));
    }
    if !(tau_k >= 1.0) {
        return Err(Error::invalid(format!("tau = {tau_k} must be >= 1")));
    }
    let gamma = ((tau_k - 1.0) / tau_k).min(c.gamma_tilde * (l_prev / l_cur).sqrt());
    Ok(StepParams { alpha: c.alpha_breve * gamma, beta: 1.0 / l_cur, gamma })
}

/// IBP schedule: constant proximal weight `1/beta = inv_beta` and an
/// extrapolation coefficient `alpha_k = min(cap, growth * alpha_{k-1})`
/// starting at `alpha_start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpConstants {
    pub alpha_start: f64,
    pub growth: f64,
    pub cap: f64,
    pub inv_beta: f64,
}

impl Default for IbpConstants {
    fn default() -> Self {
        IbpConstants { alpha_start: 0.6, growth: 1.01, cap: 1.0, inv_beta: 0.001 }
    }
}

/// `alpha_k` from `alpha_{k-1}`; `None` gives `alpha_1`.
pub fn ibp_alpha_step(prev: Option<f64>, c: IbpConstants) -> f64 {
    match prev {
        None => c.alpha_start.min(c.cap),
        Some(a) => (c.growth * a).min(c.cap),
    }
}
