use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::schedule::{ibp_alpha_step, ibpg_nmf_params, nesterov_tau_step, IbpConstants, IbpgConstants};
use super::{nmf_objective, NmfInstance};
use crate::block::{
    select_blocks, BlockVector, ConditionConstants, GeneratorConstants, IbpgVariant,
    OrderPolicy, StepParams, Variant,
};
use crate::block::pair_terms;
use crate::error::{Error, Result};
use crate::factor::{column_sweeps, inertial_gradient_repeats, FactorSystem, RepeatRule};
use crate::matops::{ensure_finite, frobenius_norm};
use crate::trace::{diverged, Budget, RunClock, Trace, TracePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NmfAlgo {
    Ibp,
    Ibpg,
    IbpgA,
    Apgc,
    AHals,
    EAHals,
}

impl NmfAlgo {
    pub const ALL: [NmfAlgo; 6] =
        [NmfAlgo::Ibp, NmfAlgo::Ibpg, NmfAlgo::IbpgA, NmfAlgo::Apgc, NmfAlgo::AHals, NmfAlgo::EAHals];

    pub fn tag(self) -> &'static str {
        match self {
            NmfAlgo::Ibp => "ibp",
            NmfAlgo::Ibpg => "ibpg",
            NmfAlgo::IbpgA => "ibpg-a",
            NmfAlgo::Apgc => "apgc",
            NmfAlgo::AHals => "a-hals",
            NmfAlgo::EAHals => "e-a-hals",
        }
    }
}

impl fmt::Display for NmfAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for NmfAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        NmfAlgo::ALL
            .into_iter()
            .find(|a| a.tag() == t)
            .ok_or_else(|| Error::invalid(format!("unknown NMF algorithm '{s}'")))
    }
}

/// Extrapolation constants of the restarted HALS acceleration: the
/// coefficient grows by `growth` after every accepted step up to a ceiling
/// that itself grows by `ceiling_growth` up to 1; an error increase restarts
/// from the plain iterate and divides the coefficient by `decay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EahalsConstants {
    pub beta_start: f64,
    pub growth: f64,
    pub decay: f64,
    pub ceiling_growth: f64,
}

impl Default for EahalsConstants {
    fn default() -> Self {
        EahalsConstants { beta_start: 0.5, growth: 1.05, decay: 1.5, ceiling_growth: 1.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfInit {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl NmfInit {
    /// Entries i.i.d. uniform on `[0, 1)`, `U` first, both row-major.
    pub fn random(m: usize, n: usize, r: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_rng(&mut rng, m, n, r)
    }

    pub fn from_rng<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, r: usize) -> Self {
        let u = Array2::from_shape_simple_fn((m, r), || rng.gen::<f64>());
        let v = Array2::from_shape_simple_fn((r, n), || rng.gen::<f64>());
        NmfInit { u, v }
    }
}

#[derive(Debug, Clone)]
pub struct NmfOptions {
    pub budget: Budget,
    /// Order of the `U` and `V` phases within an outer loop.
    pub order: OrderPolicy,
    /// Seed for the random phase order.
    pub seed: u64,
    pub repeat: RepeatRule,
    /// Replaces the algorithm's default IBPG/APGC constants.
    pub ibpg: Option<IbpgConstants>,
    pub ibp: IbpConstants,
    pub eahals: EahalsConstants,
    /// Check consecutive IBPG updates against the block-convex condition
    /// and log the first violation.
    pub check: Option<ConditionConstants>,
}

impl NmfOptions {
    pub fn new(budget: Budget) -> Self {
        NmfOptions {
            budget,
            order: OrderPolicy::Cyclic,
            seed: 0,
            repeat: RepeatRule::default(),
            ibpg: None,
            ibp: IbpConstants::default(),
            eahals: EahalsConstants::default(),
            check: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfState {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub u_prev: Array2<f64>,
    pub v_prev: Array2<f64>,
    /// Block Lipschitz estimates `|VV^T|` and `|U^TU|` at their last update;
    /// NaN for the column-wise methods, which never need them.
    pub lipschitz: [f64; 2],
    pub tau: f64,
    pub outer: usize,
}

#[derive(Debug, Clone)]
pub struct NmfRun {
    pub state: NmfState,
    pub trace: Trace,
    pub condition_violations: usize,
}

/// Below this fraction of `1/2 |X|^2` the trace objective is recomputed from
/// the residual, where the cached formula loses relative accuracy.
const EXACT_BELOW: f64 = 1e-4;

/// One factor stored as `p x r`: `U` itself, or `V^T`.
struct Factor {
    f: Array2<f64>,
    prev: Array2<f64>,
    lipschitz: f64,
    lipschitz_prev: Option<f64>,
}

impl Factor {
    fn new(f: Array2<f64>) -> Self {
        Factor { prev: f.clone(), f, lipschitz: f64::NAN, lipschitz_prev: None }
    }
}

struct Data<'a> {
    x: &'a Array2<f64>,
    xt: Array2<f64>,
    half_norm_sq: f64,
    norm: f64,
}

impl Data<'_> {
    /// System for `U` (`side == 0`, other = `V^T`) or `V^T` (`side == 1`, other = `U`).
    fn system(&self, side: usize, other: &Array2<f64>) -> FactorSystem {
        let y = if side == 0 { self.x } else { &self.xt };
        FactorSystem { cross: y.dot(other), gram: other.t().dot(other) }
    }

    fn exact_objective(&self, u: &Array2<f64>, vt: &Array2<f64>) -> f64 {
        let mut resid = self.x.clone();
        resid -= &u.dot(&vt.t());
        0.5 * resid.iter().map(|a| a * a).sum::<f64>()
    }

    /// Trace objective from the system of the factor updated last.
    fn objective(&self, sys: &FactorSystem, f: &Array2<f64>, u: &Array2<f64>, vt: &Array2<f64>) -> f64 {
        let cached = sys.objective(f.view(), self.half_norm_sq);
        if cached < EXACT_BELOW * self.half_norm_sq {
            self.exact_objective(u, vt)
        } else {
            cached
        }
    }

    fn relerror(&self, objective: f64) -> f64 {
        (2.0 * objective).sqrt() / self.norm
    }
}

fn check_init(instance: &NmfInstance, init: &NmfInit) -> Result<()> {
    let (m, n) = instance.dims();
    let r = instance.rank();
    if init.u.dim() != (m, r) || init.v.dim() != (r, n) {
        return Err(Error::dims(
            "nmf init",
            format!("U {m}x{r}, V {r}x{n}"),
            format!("U {}x{}, V {}x{}", init.u.nrows(), init.u.ncols(), init.v.nrows(), init.v.ncols()),
        ));
    }
    ensure_finite(init.u.view(), "initial U")?;
    ensure_finite(init.v.view(), "initial V")?;
    if init.u.iter().chain(init.v.iter()).any(|a| *a < 0.0) {
        return Err(Error::invalid("initial factors must be nonnegative"));
    }
    Ok(())
}

fn as_blocks(u: &Array2<f64>, vt: &Array2<f64>) -> BlockVector {
    let flat_u = u.iter().copied().collect();
    let flat_v = vt.t().iter().copied().collect();
    BlockVector::new(vec![flat_u, flat_v]).expect("finite factors")
}

/// Runs `algo` from `init` until the budget is exhausted.
pub fn run_nmf(instance: &NmfInstance, algo: NmfAlgo, init: &NmfInit, opts: &NmfOptions) -> Result<NmfRun> {
    check_init(instance, init)?;
    let clock = RunClock::start(opts.budget)?;
    let x = instance.data().to_owned();
    let norm = frobenius_norm(x.view());
    if norm == 0.0 {
        return Err(Error::invalid("data matrix is zero"));
    }
    let data = Data { xt: x.t().to_owned(), x: &x, half_norm_sq: 0.5 * norm * norm, norm };
    let f0 = nmf_objective(x.view(), init.u.view(), init.v.view())?;
    let mut trace = Trace::default();
    trace.push(TracePoint { k: 0, elapsed_s: 0.0, objective: f0, relerror: data.relerror(f0) });
    let mut sides = [Factor::new(init.u.clone()), Factor::new(init.v.t().to_owned())];

    let mut runner = Runner { data: &data, opts, instance, clock, trace, f0, violations: 0 };
    let (tau, outer) = match algo {
        NmfAlgo::EAHals => runner.eahals(&mut sides)?,
        _ => runner.blockwise(algo, &mut sides)?,
    };
    let [u, vt] = sides;
    Ok(NmfRun {
        state: NmfState {
            u: u.f,
            v: vt.f.t().to_owned(),
            u_prev: u.prev,
            v_prev: vt.prev.t().to_owned(),
            lipschitz: [u.lipschitz, vt.lipschitz],
            tau,
            outer,
        },
        trace: runner.trace,
        condition_violations: runner.violations,
    })
}

struct Runner<'a> {
    data: &'a Data<'a>,
    opts: &'a NmfOptions,
    instance: &'a NmfInstance,
    clock: RunClock,
    trace: Trace,
    f0: f64,
    violations: usize,
}

impl Runner<'_> {
    /// Records loop `k`; fails with the last finite iterate on divergence.
    fn record(&mut self, k: usize, objective: f64, last_good: impl FnOnce() -> BlockVector) -> Result<()> {
        if diverged(objective, self.f0) {
            return Err(Error::Diverged { outer: k, objective, last_finite: Box::new(last_good()) });
        }
        let relerror = self.data.relerror(objective);
        self.trace.push(TracePoint { k, elapsed_s: self.clock.elapsed(k), objective, relerror });
        Ok(())
    }

    fn other_dim(&self, side: usize) -> usize {
        let (m, n) = self.instance.dims();
        if side == 0 {
            n
        } else {
            m
        }
    }

    fn blockwise(&mut self, algo: NmfAlgo, sides: &mut [Factor; 2]) -> Result<(f64, usize)> {
        let r = self.instance.rank();
        let consts = self.opts.ibpg.unwrap_or(match algo {
            NmfAlgo::Apgc => IbpgConstants::APGC,
            _ => IbpgConstants::IBPG,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let mut tau = 1.0;
        let mut alpha_ibp = None;
        let mut last_pair: [Option<(StepParams, f64)>; 2] = [None, None];
        let mut k = 0;
        while !self.clock.done(k, self.trace.last().map_or(f64::NAN, |p| p.relerror)) {
            k += 1;
            let snapshot = (sides[0].f.clone(), sides[1].f.clone());
            tau = nesterov_tau_step(tau)?;
            let alpha = ibp_alpha_step(alpha_ibp, self.opts.ibp);
            alpha_ibp = Some(alpha);
            let phases = select_blocks(self.opts.order, 2, 2, &mut rng)?;
            let mut last_sys = None;
            for &side in &phases {
                let sys = self.data.system(side, &sides[1 - side].f);
                let reps = match algo {
                    NmfAlgo::Ibpg | NmfAlgo::Apgc => 1,
                    _ => self.opts.repeat.max_repeats(self.other_dim(side), r),
                };
                let fac = &mut sides[side];
                match algo {
                    NmfAlgo::Ibpg | NmfAlgo::IbpgA | NmfAlgo::Apgc => {
                        let l = sys.lipschitz();
                        if l > 0.0 {
                            let p = ibpg_nmf_params(tau, l, fac.lipschitz_prev.unwrap_or(l), consts)?;
                            if let Some(c) = self.opts.check {
                                self.observe(&mut last_pair[side], side, c, p, l);
                            }
                            inertial_gradient_repeats(&mut fac.f, &mut fac.prev, &sys, p, reps, &self.opts.repeat, self.data.half_norm_sq);
                            fac.lipschitz = l;
                            fac.lipschitz_prev = Some(l);
                        }
                    }
                    NmfAlgo::Ibp => {
                        let ib = self.opts.ibp.inv_beta;
                        column_sweeps(&mut fac.f, &mut fac.prev, &sys, Some((alpha, ib)), reps, &self.opts.repeat, self.data.half_norm_sq);
                    }
                    NmfAlgo::AHals => {
                        column_sweeps(&mut fac.f, &mut fac.prev, &sys, None, reps, &self.opts.repeat, self.data.half_norm_sq);
                    }
                    NmfAlgo::EAHals => unreachable!("handled separately"),
                }
                last_sys = Some((side, sys));
            }
            let (side, sys) = last_sys.expect("two phases per loop");
            let obj = self.data.objective(&sys, &sides[side].f, &sides[0].f, &sides[1].f);
            self.record(k, obj, || as_blocks(&snapshot.0, &snapshot.1))?;
        }
        Ok((tau, k))
    }

    fn observe(&mut self, last: &mut Option<(StepParams, f64)>, side: usize, c: ConditionConstants, p: StepParams, l: f64) {
        let variant = Variant::Ibpg(IbpgVariant::BlockConvex);
        if let Some(prev) = *last {
            let (lhs, rhs) = pair_terms(variant, c, GeneratorConstants::EUCLIDEAN, prev, (p, l));
            if !(lhs >= rhs) {
                if self.violations == 0 {
                    let name = if side == 0 { "U" } else { "V" };
                    log::warn!("NMF step parameters violate the {variant} condition on {name}: {lhs:e} < {rhs:e}");
                }
                self.violations += 1;
            }
        }
        *last = Some((p, l));
    }

    /// HALS sweeps started from, and fitted against, extrapolated factors.
    /// The plain pair is always the reported iterate; the extrapolation is
    /// dropped whenever its error increases.
    fn eahals(&mut self, sides: &mut [Factor; 2]) -> Result<(f64, usize)> {
        let r = self.instance.rank();
        let c = self.opts.eahals;
        let rule = self.opts.repeat;
        let half = self.data.half_norm_sq;
        let mut hat = [sides[0].f.clone(), sides[1].f.clone()];
        let mut beta = c.beta_start;
        let mut ceiling = 1.0;
        let mut err_prev = self.f0;
        let mut k = 0;
        while !self.clock.done(k, self.trace.last().map_or(f64::NAN, |p| p.relerror)) {
            k += 1;
            let snapshot = (sides[0].f.clone(), sides[1].f.clone());
            let mut last_sys = None;
            for side in 0..2 {
                // U is fitted against the extrapolated V, V against the new plain U
                let other = if side == 0 { &hat[1] } else { &sides[0].f };
                let sys = self.data.system(side, other);
                let reps = rule.max_repeats(self.other_dim(side), r);
                let mut plain = hat[side].clone();
                let mut scratch = plain.clone();
                column_sweeps(&mut plain, &mut scratch, &sys, None, reps, &rule, half);
                sides[side].prev = std::mem::replace(&mut sides[side].f, plain);
                last_sys = Some(sys);
            }
            let sys = last_sys.expect("two phases per loop");
            let obj = self.data.objective(&sys, &sides[1].f, &sides[0].f, &sides[1].f);
            if obj > err_prev {
                hat = [sides[0].f.clone(), sides[1].f.clone()];
                ceiling = beta;
                beta /= c.decay;
            } else {
                for side in 0..2 {
                    hat[side] = Zip::from(&sides[side].f)
                        .and(&sides[side].prev)
                        .map_collect(|&a, &b| (a + beta * (a - b)).max(0.0));
                }
                beta = (c.growth * beta).min(ceiling);
                ceiling = (c.ceiling_growth * ceiling).min(1.0);
            }
            err_prev = obj;
            self.record(k, obj, || as_blocks(&snapshot.0, &snapshot.1))?;
        }
        Ok((1.0, k))
    }
}
