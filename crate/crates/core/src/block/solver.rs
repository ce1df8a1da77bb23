use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::conditions::{pair_terms, ConditionConstants, GeneratorConstants, Variant};
use super::select::{select_blocks, OrderPolicy};
use super::{bregman_gprox, extrapolate_unchecked, BlockProblem, BlockVector, BregmanGenerator, Euclidean};
use crate::error::{Error, Result};
use crate::trace::{diverged, Budget, RunClock, Trace, TracePoint};

/// Inertial and step parameters of a single block update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    /// Extrapolation of the proximal anchor.
    pub alpha: f64,
    /// Stepsize.
    pub beta: f64,
    /// Extrapolation of the gradient point (IBPG only).
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    /// Outer loop index, starting at 1.
    pub outer: usize,
    /// Inner iteration index within the outer loop, starting at 1.
    pub inner: usize,
    pub block: usize,
    /// How many times `block` has been updated in this outer loop, this one included.
    pub update: usize,
    /// Block Lipschitz estimate at the current iterate (IBPG only).
    pub lipschitz: Option<f64>,
}

/// Supplies the parameters of every block update.
pub trait StepSchedule {
    fn params(&mut self, ctx: &StepContext) -> StepParams;
}

impl<F: FnMut(&StepContext) -> StepParams> StepSchedule for F {
    fn params(&mut self, ctx: &StepContext) -> StepParams {
        self(ctx)
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub order: OrderPolicy,
    /// Inner loop length `T_k`; 0 means one update per block.
    pub inner_len: usize,
    pub seed: u64,
    pub budget: Budget,
    pub keep_history: bool,
    /// When set, every pair of consecutive updates of a block is checked
    /// against the parameter condition and violations are counted and logged.
    pub check: Option<(Variant, ConditionConstants)>,
}

impl SolverConfig {
    pub fn new(budget: Budget) -> Self {
        SolverConfig {
            order: OrderPolicy::Cyclic,
            inner_len: 0,
            seed: 0,
            budget,
            keep_history: false,
            check: None,
        }
    }
}

/// Current iterate and, per block, the value it had before its last update.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolState {
    pub current: BlockVector,
    pub previous: BlockVector,
}

impl ExtrapolState {
    /// Starts with `previous == current`, so the first update of every block
    /// carries no inertia.
    pub fn new(x0: BlockVector) -> Self {
        ExtrapolState { previous: x0.clone(), current: x0 }
    }

    pub fn with_previous(current: BlockVector, previous: BlockVector) -> Result<Self> {
        if !current.same_shape(&previous) {
            return Err(Error::invalid("current and previous iterates differ in shape"));
        }
        Ok(ExtrapolState { current, previous })
    }
}

/// What the solver keeps of outer loop `outer`: the output iterate, the
/// per-block values before their last update, and the parameters of each
/// block's first update in the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSnapshot {
    pub outer: usize,
    pub x: BlockVector,
    pub x_prev: BlockVector,
    pub first_params: Vec<Option<StepParams>>,
    pub first_lipschitz: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub state: ExtrapolState,
    pub trace: Trace,
    pub history: Vec<LoopSnapshot>,
    /// Number of consecutive-update pairs that failed the configured check.
    pub condition_violations: usize,
}

impl SolverRun {
    pub fn x(&self) -> &BlockVector {
        &self.state.current
    }
}

#[derive(Clone, Copy)]
enum Method {
    Ibp,
    Ibpg,
}

pub fn ibp_outer_loop<P, S>(problem: &P, schedule: &mut S, state: ExtrapolState, config: &SolverConfig) -> Result<SolverRun>
where
    P: BlockProblem + ?Sized,
    S: StepSchedule + ?Sized,
{
    run(problem, schedule, state, config, &Euclidean, Method::Ibp)
}

pub fn ibp_outer_loop_bregman<P, S>(
    problem: &P,
    schedule: &mut S,
    state: ExtrapolState,
    config: &SolverConfig,
    h: &dyn BregmanGenerator,
) -> Result<SolverRun>
where
    P: BlockProblem + ?Sized,
    S: StepSchedule + ?Sized,
{
    run(problem, schedule, state, config, h, Method::Ibp)
}

pub fn ibpg_outer_loop<P, S>(problem: &P, schedule: &mut S, state: ExtrapolState, config: &SolverConfig) -> Result<SolverRun>
where
    P: BlockProblem + ?Sized,
    S: StepSchedule + ?Sized,
{
    run(problem, schedule, state, config, &Euclidean, Method::Ibpg)
}

pub fn ibpg_outer_loop_bregman<P, S>(
    problem: &P,
    schedule: &mut S,
    state: ExtrapolState,
    config: &SolverConfig,
    h: &dyn BregmanGenerator,
) -> Result<SolverRun>
where
    P: BlockProblem + ?Sized,
    S: StepSchedule + ?Sized,
{
    run(problem, schedule, state, config, h, Method::Ibpg)
}

struct ConditionTracker {
    check: Option<(Variant, ConditionConstants)>,
    generator: GeneratorConstants,
    last: Vec<Option<(StepParams, f64)>>,
    violations: usize,
}

impl ConditionTracker {
    fn observe(&mut self, block: usize, params: StepParams, lipschitz: f64) {
        let Some((variant, consts)) = self.check else { return };
        if let Some(prev) = self.last[block] {
            let (lhs, rhs) = pair_terms(variant, consts, self.generator, prev, (params, lipschitz));
            if !(lhs >= rhs) {
                if self.violations == 0 {
                    log::warn!(
                        "parameters violate the {variant} condition at block {block}: {lhs:e} < {rhs:e}; continuing"
                    );
                }
                self.violations += 1;
            }
        }
        self.last[block] = Some((params, lipschitz));
    }
}

fn run<P, S>(
    problem: &P,
    schedule: &mut S,
    state: ExtrapolState,
    config: &SolverConfig,
    h: &dyn BregmanGenerator,
    method: Method,
) -> Result<SolverRun>
where
    P: BlockProblem + ?Sized,
    S: StepSchedule + ?Sized,
{
    let s = problem.num_blocks();
    if state.current.num_blocks() != s || !state.current.same_shape(&state.previous) {
        return Err(Error::dims("block solver", format!("{s} blocks"), state.current.num_blocks()));
    }
    if let Some((variant, consts)) = config.check {
        consts.validate(variant)?;
    }
    let t_k = if config.inner_len == 0 { s } else { config.inner_len };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let clock = RunClock::start(config.budget)?;

    let ExtrapolState { current: mut x, previous: mut prev } = state;
    let f0 = problem.objective(&x);
    if !f0.is_finite() {
        return Err(Error::invalid("initial point has a non-finite objective"));
    }
    let mut trace = Trace::default();
    trace.push(TracePoint { k: 0, elapsed_s: 0.0, objective: f0, relerror: problem.relative_error(&x) });
    let mut history = Vec::new();
    if config.keep_history {
        history.push(LoopSnapshot {
            outer: 0,
            x: x.clone(),
            x_prev: prev.clone(),
            first_params: vec![None; s],
            first_lipschitz: vec![None; s],
        });
    }
    let mut tracker = ConditionTracker {
        check: config.check,
        generator: GeneratorConstants::of(h),
        last: vec![None; s],
        violations: 0,
    };

    let mut k = 0;
    while !clock.done(k, trace.last().map_or(f64::NAN, |p| p.relerror)) {
        k += 1;
        let last_good = x.clone();
        let order = select_blocks(config.order, s, t_k, &mut rng)?;
        let mut counts = vec![0usize; s];
        let mut first_params = vec![None; s];
        let mut first_lipschitz = vec![None; s];

        for (j, &i) in order.iter().enumerate() {
            counts[i] += 1;
            let lipschitz = match method {
                Method::Ibpg => Some(problem.block_lipschitz(i, &x)?),
                Method::Ibp => None,
            };
            let ctx = StepContext { outer: k, inner: j + 1, block: i, update: counts[i], lipschitz };
            let p = schedule.params(&ctx);
            if !(p.beta > 0.0) || !(p.alpha >= 0.0) || !(p.gamma >= 0.0) {
                return Err(Error::invalid(format!(
                    "schedule returned alpha = {}, beta = {}, gamma = {} at loop {k}, block {i}",
                    p.alpha, p.beta, p.gamma
                )));
            }
            if counts[i] == 1 {
                first_params[i] = Some(p);
                first_lipschitz[i] = lipschitz;
            }
            tracker.observe(i, p, lipschitz.unwrap_or(f64::NAN));

            let xi = x.block(i);
            let yi = prev.block(i);
            let anchor = extrapolate_unchecked(xi, yi, p.alpha);
            let next = match method {
                Method::Ibp => problem.exact_block_prox(i, &x, anchor.view(), p.beta, h)?,
                Method::Ibpg => {
                    let grad_point = extrapolate_unchecked(xi, yi, p.gamma);
                    let grad = problem.partial_gradient(i, &x, grad_point.view())?;
                    bregman_gprox(grad.view(), anchor.view(), p.beta, |v, b| problem.prox_penalty(i, v, b, h), h)?
                }
            };
            if next.len() != xi.len() {
                return Err(Error::dims("block update", xi.len(), next.len()));
            }
            let old: Array1<f64> = x.replace(i, next);
            prev.replace(i, old);
        }

        let objective = problem.objective(&x);
        if diverged(objective, f0) {
            return Err(Error::Diverged { outer: k, objective, last_finite: Box::new(last_good) });
        }
        trace.push(TracePoint { k, elapsed_s: clock.elapsed(k), objective, relerror: problem.relative_error(&x) });
        if config.keep_history {
            history.push(LoopSnapshot { outer: k, x: x.clone(), x_prev: prev.clone(), first_params, first_lipschitz });
        }
    }

    Ok(SolverRun {
        state: ExtrapolState { current: x, previous: prev },
        trace,
        history,
        condition_violations: tracker.violations,
    })
}
