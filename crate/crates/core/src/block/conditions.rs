//! Parameter conditions under which the inertial updates keep a sufficient
//! decrease property. The checkers evaluate, for each block `i` and each
//! update `m` inside an outer loop, a margin `lhs - rhs` where `lhs` depends
//! on the step used for update `m` and `rhs = delta * weight(m + 1)` on the
//! inertial parameters of the following update of the same block.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use super::solver::StepParams;
use super::BregmanGenerator;
use crate::error::{Error, Result};
use crate::matops::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbpVariant {
    Base,
    /// `F` convex in each block: twice the base budget for the proximal term.
    BlockConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbpgVariant {
    /// Stepsize `sigma / (kappa L)`.
    Base,
    /// Convex `r_i`: stepsize `sigma / L`.
    ConvexR,
    /// Convex `r_i`, block-convex `f`, Euclidean distance: stepsize `1 / L`.
    BlockConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Ibp(IbpVariant),
    Ibpg(IbpgVariant),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ibp(IbpVariant::Base) => "ibp-base",
            Variant::Ibp(IbpVariant::BlockConvex) => "ibp-block-convex",
            Variant::Ibpg(IbpgVariant::Base) => "ibpg-base",
            Variant::Ibpg(IbpgVariant::ConvexR) => "ibpg-convex-r",
            Variant::Ibpg(IbpgVariant::BlockConvex) => "ibpg-block-convex",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ibp-base" => Variant::Ibp(IbpVariant::Base),
            "ibp-block-convex" => Variant::Ibp(IbpVariant::BlockConvex),
            "ibpg-base" => Variant::Ibpg(IbpgVariant::Base),
            "ibpg-convex-r" => Variant::Ibpg(IbpgVariant::ConvexR),
            "ibpg-block-convex" => Variant::Ibpg(IbpgVariant::BlockConvex),
            other => return Err(Error::invalid(format!("unknown condition variant '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionConstants {
    /// In (0, 1).
    pub nu: f64,
    /// Greater than 1.
    pub delta: f64,
    /// Greater than 1; only used by the base IBPG variant.
    pub kappa: f64,
}

impl ConditionConstants {
    pub fn validate(&self, variant: Variant) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::invalid(format!("nu = {} must lie in (0, 1)", self.nu)));
        }
        if !(self.delta > 1.0) {
            return Err(Error::invalid(format!("delta = {} must exceed 1", self.delta)));
        }
        if variant == Variant::Ibpg(IbpgVariant::Base) && !(self.kappa > 1.0) {
            return Err(Error::invalid(format!("kappa = {} must exceed 1", self.kappa)));
        }
        Ok(())
    }
}

/// Strong convexity modulus and gradient Lipschitz constant of the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConstants {
    pub sigma: f64,
    pub l_h: f64,
}

impl GeneratorConstants {
    pub const EUCLIDEAN: GeneratorConstants = GeneratorConstants { sigma: 1.0, l_h: 1.0 };

    pub fn of(h: &dyn BregmanGenerator) -> Self {
        GeneratorConstants { sigma: h.sigma(), l_h: h.lipschitz() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.l_h >= self.sigma) {
            return Err(Error::invalid(format!(
                "generator constants need 0 < sigma <= L_H, got sigma = {}, L_H = {}",
                self.sigma, self.l_h
            )));
        }
        Ok(())
    }

    fn is_euclidean(&self) -> bool {
        self.sigma == 1.0 && self.l_h == 1.0
    }
}

/// `theta = (L_H alpha)^2 / (2 nu sigma beta)`.
pub fn ibp_theta(alpha: f64, beta: f64, nu: f64, g: GeneratorConstants) -> f64 {
    (g.l_h * alpha).powi(2) / (2.0 * nu * g.sigma * beta)
}

/// The IBPG weight `lambda` for one update with inertial parameters
/// `alpha` (anchor) and `gamma` (gradient point) and block Lipschitz constant.
pub fn ibpg_lambda(
    variant: IbpgVariant,
    alpha: f64,
    gamma: f64,
    lipschitz: f64,
    c: ConditionConstants,
    g: GeneratorConstants,
) -> f64 {
    match variant {
        IbpgVariant::Base => {
            0.5 * (gamma + c.kappa * g.l_h * alpha / g.sigma).powi(2) * lipschitz / (c.nu * (c.kappa - 1.0))
        }
        IbpgVariant::ConvexR => 0.5 * (gamma + g.l_h * alpha / g.sigma).powi(2) * lipschitz / c.nu,
        IbpgVariant::BlockConvex => (gamma * gamma + (gamma - alpha).powi(2) / c.nu) * lipschitz / 2.0,
    }
}

/// `(lhs, rhs)` of the condition linking update `cur` of a block to its next update.
pub(crate) fn pair_terms(
    variant: Variant,
    c: ConditionConstants,
    g: GeneratorConstants,
    cur: (StepParams, f64),
    next: (StepParams, f64),
) -> (f64, f64) {
    let (p, l_cur) = cur;
    let (q, l_next) = next;
    match variant {
        Variant::Ibp(v) => {
            let scale = match v {
                IbpVariant::Base => 0.5,
                IbpVariant::BlockConvex => 2.0,
            };
            let lhs = scale * (1.0 - c.nu) * g.sigma / p.beta;
            (lhs, c.delta * ibp_theta(q.alpha, q.beta, c.nu, g))
        }
        Variant::Ibpg(v) => {
            let lhs = match v {
                IbpgVariant::Base => (1.0 - c.nu) * (c.kappa - 1.0) * l_cur / 2.0,
                IbpgVariant::ConvexR | IbpgVariant::BlockConvex => (1.0 - c.nu) * l_cur / 2.0,
            };
            (lhs, c.delta * ibpg_lambda(v, q.alpha, q.gamma, l_next, c, g))
        }
    }
}

/// Parameters of consecutive updates of one block within outer loop `outer`.
/// `params[m]` is update `m + 1`; the final entry is the first update of the
/// next outer loop, which closes the condition for the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUpdates {
    pub block: usize,
    pub outer: usize,
    pub params: Vec<StepParams>,
    /// Block Lipschitz constants aligned with `params` (IBPG only).
    pub lipschitz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub variant: Variant,
    pub block: usize,
    pub outer: usize,
    /// One-based update index within the outer loop.
    pub update: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub delta: f64,
    pub rows: Vec<ConditionRow>,
}

impl ConditionReport {
    pub fn feasible(&self) -> bool {
        self.rows.iter().all(|r| r.feasible)
    }

    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    /// Largest `delta` for which every row would still hold (`+inf` when no
    /// row has inertia).
    pub fn max_delta(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.rhs > 0.0)
            .map(|r| r.lhs * self.delta / r.rhs)
            .fold(f64::INFINITY, f64::min)
    }

    pub const CSV_HEADER: &'static str = "variant,i,k,m,lhs,rhs,margin,feasible";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.variant,
                r.block,
                r.outer,
                r.update,
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                fmt_f64(r.margin),
                r.feasible
            )?;
        }
        Ok(())
    }
}

fn build_report(
    updates: &[BlockUpdates],
    c: ConditionConstants,
    g: GeneratorConstants,
    variant: Variant,
) -> Result<ConditionReport> {
    c.validate(variant)?;
    g.validate()?;
    let needs_l = matches!(variant, Variant::Ibpg(_));
    let mut rows = Vec::new();
    for u in updates {
        if u.params.len() < 2 {
            return Err(Error::invalid(format!(
                "block {} loop {}: need the parameters of at least one update and its successor",
                u.block, u.outer
            )));
        }
        if needs_l && u.lipschitz.len() != u.params.len() {
            return Err(Error::dims("check_ibpg_condition", u.params.len(), u.lipschitz.len()));
        }
        for m in 0..u.params.len() - 1 {
            let (p, q) = (u.params[m], u.params[m + 1]);
            let (lc, ln) = if needs_l { (u.lipschitz[m], u.lipschitz[m + 1]) } else { (f64::NAN, f64::NAN) };
            if !needs_l && !(p.beta > 0.0 && q.beta > 0.0) {
                return Err(Error::invalid("stepsizes beta must be positive"));
            }
            if needs_l && !(lc > 0.0 && ln > 0.0) {
                return Err(Error::invalid("block Lipschitz constants must be positive"));
            }
            let (lhs, rhs) = pair_terms(variant, c, g, (p, lc), (q, ln));
            rows.push(ConditionRow {
                variant,
                block: u.block,
                outer: u.outer,
                update: m + 1,
                lhs,
                rhs,
                margin: lhs - rhs,
                feasible: lhs >= rhs,
            });
        }
    }
    Ok(ConditionReport { delta: c.delta, rows })
}

pub fn check_ibp_condition(
    updates: &[BlockUpdates],
    c: ConditionConstants,
    g: GeneratorConstants,
    variant: IbpVariant,
) -> Result<ConditionReport> {
    build_report(updates, c, g, Variant::Ibp(variant))
}

/// The stepsize implied by each variant is not an input: the conditions are
/// written in terms of the block Lipschitz constants.
pub fn check_ibpg_condition(
    updates: &[BlockUpdates],
    c: ConditionConstants,
    g: GeneratorConstants,
    variant: IbpgVariant,
) -> Result<ConditionReport> {
    if variant == IbpgVariant::BlockConvex && !g.is_euclidean() {
        return Err(Error::invalid("the block-convex IBPG condition requires the Euclidean generator"));
    }
    build_report(updates, c, g, Variant::Ibpg(variant))
}

/// Largest constant extrapolation parameter allowed by the IBP condition with a
/// constant stepsize (the stepsize cancels out).
pub fn max_feasible_ibp_alpha(c: ConditionConstants, g: GeneratorConstants, variant: IbpVariant) -> Result<f64> {
    c.validate(Variant::Ibp(variant))?;
    g.validate()?;
    let scale = match variant {
        IbpVariant::Base => 1.0,
        IbpVariant::BlockConvex => 4.0,
    };
    Ok((scale * c.nu * (1.0 - c.nu) / c.delta).sqrt() * g.sigma / g.l_h)
}
