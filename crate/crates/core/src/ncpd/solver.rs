use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_khatri_chain, ncpd_gram, NcpdInstance};
use crate::block::{BlockVector, StepParams};
use crate::error::{Error, Result};
use crate::factor::{column_sweeps, inertial_gradient_repeats, FactorSystem, RepeatRule};
use crate::matops::{cp_reconstruct, ensure_finite, frobenius_norm, mode_unfold};
use crate::nmf::nesterov_tau_step;
use crate::trace::{diverged, Budget, RunClock, Trace, TracePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NcpdAlgo {
    IbpgA,
    Ibpg,
    Apgc,
    AHals,
}

impl NcpdAlgo {
    pub const ALL: [NcpdAlgo; 4] = [NcpdAlgo::IbpgA, NcpdAlgo::Ibpg, NcpdAlgo::Apgc, NcpdAlgo::AHals];

    pub fn tag(self) -> &'static str {
        match self {
            NcpdAlgo::IbpgA => "ibpg-a",
            NcpdAlgo::Ibpg => "ibpg",
            NcpdAlgo::Apgc => "apgc",
            NcpdAlgo::AHals => "a-hals",
        }
    }
}

impl fmt::Display for NcpdAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for NcpdAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("ncpd:").unwrap_or(&t);
        NcpdAlgo::ALL
            .into_iter()
            .find(|a| a.tag() == t)
            .ok_or_else(|| Error::invalid(format!("unknown NCPD algorithm '{s}'")))
    }
}

/// Inertia of the factor updates: `w = min(w_hat, delta_w * sqrt(L_prev / L))`,
/// gradient point `X + w (X - X_prev)`, anchor `X + beta * w (X - X_prev)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcpdConstants {
    pub delta_w: f64,
    pub beta: f64,
}

impl NcpdConstants {
    pub const IBPG: NcpdConstants = NcpdConstants { delta_w: 0.99, beta: 1.01 };
    pub const APGC: NcpdConstants = NcpdConstants { delta_w: 0.9999, beta: 0.9999 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcpdInit {
    pub factors: [Array2<f64>; 3],
}

impl NcpdInit {
    /// Entries i.i.d. uniform on `[0, 1)`, factors in mode order.
    pub fn random(dims: (usize, usize, usize), r: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_rng(&mut rng, dims, r)
    }

    pub fn from_rng<R: Rng + ?Sized>(rng: &mut R, dims: (usize, usize, usize), r: usize) -> Self {
        let mut draw = |p: usize| Array2::from_shape_simple_fn((p, r), || rng.gen::<f64>());
        NcpdInit { factors: [draw(dims.0), draw(dims.1), draw(dims.2)] }
    }
}

#[derive(Debug, Clone)]
pub struct NcpdOptions {
    pub budget: Budget,
    pub repeat: RepeatRule,
    /// Replaces the algorithm's default constants.
    pub constants: Option<NcpdConstants>,
    /// Advance the `t` sequence before every factor update instead of once
    /// per sweep.
    pub t_per_factor: bool,
}

impl NcpdOptions {
    pub fn new(budget: Budget) -> Self {
        NcpdOptions { budget, repeat: RepeatRule::default(), constants: None, t_per_factor: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcpdState {
    pub factors: [Array2<f64>; 3],
    pub previous: [Array2<f64>; 3],
    /// `|B_i^T B_i|` at each factor's last update; NaN for A-HALS.
    pub lipschitz: [f64; 3],
    pub t: f64,
    pub outer: usize,
}

#[derive(Debug, Clone)]
pub struct NcpdRun {
    pub state: NcpdState,
    pub trace: Trace,
}

const EXACT_BELOW: f64 = 1e-4;

fn check_init(instance: &NcpdInstance, init: &NcpdInit) -> Result<()> {
    let (a, b, c) = instance.dims();
    let r = instance.rank();
    for (f, p) in init.factors.iter().zip([a, b, c]) {
        if f.dim() != (p, r) {
            return Err(Error::dims("ncpd init", format!("{p}x{r}"), format!("{}x{}", f.nrows(), f.ncols())));
        }
        ensure_finite(f.view(), "initial factor")?;
        if f.iter().any(|x| *x < 0.0) {
            return Err(Error::invalid("initial factors must be nonnegative"));
        }
    }
    Ok(())
}

fn exact_objective(instance: &NcpdInstance, f: &[Array2<f64>; 3]) -> f64 {
    let rec = cp_reconstruct(f[0].view(), f[1].view(), f[2].view()).expect("factor shapes checked");
    0.5 * Zip::from(&rec).and(instance.data()).fold(0.0, |acc, a, b| acc + (a - b) * (a - b))
}

fn as_blocks(f: &[Array2<f64>; 3]) -> BlockVector {
    BlockVector::new(f.iter().map(|x| x.iter().copied().collect()).collect()).expect("finite factors")
}

/// Cyclic factor updates (mode 0, 1, 2) until the budget is exhausted.
pub fn run_ncpd(instance: &NcpdInstance, algo: NcpdAlgo, init: &NcpdInit, opts: &NcpdOptions) -> Result<NcpdRun> {
    check_init(instance, init)?;
    let clock = RunClock::start(opts.budget)?;
    let consts = opts.constants.unwrap_or(match algo {
        NcpdAlgo::Apgc => NcpdConstants::APGC,
        _ => NcpdConstants::IBPG,
    });
    if !(consts.delta_w >= 0.0) || !(consts.beta >= 0.0) {
        return Err(Error::invalid("NCPD inertial constants must be nonnegative"));
    }
    let norm = frobenius_norm(instance.data());
    if norm == 0.0 {
        return Err(Error::invalid("tensor is zero"));
    }
    let half = 0.5 * norm * norm;
    let relerror = |obj: f64| (2.0 * obj).sqrt() / norm;
    let unfolded = [
        mode_unfold(instance.data(), 0)?,
        mode_unfold(instance.data(), 1)?,
        mode_unfold(instance.data(), 2)?,
    ];
    let (d0, d1, d2) = instance.dims();
    let dims = [d0, d1, d2];
    let r = instance.rank();

    let mut x = init.factors.clone();
    let mut prev = init.factors.clone();
    let mut lip = [f64::NAN; 3];
    let mut lip_last: [Option<f64>; 3] = [None; 3];
    let f0 = exact_objective(instance, &x);
    let mut trace = Trace::default();
    trace.push(TracePoint { k: 0, elapsed_s: 0.0, objective: f0, relerror: relerror(f0) });

    let mut t = 1.0;
    let mut k = 0;
    while !clock.done(k, trace.last().map_or(f64::NAN, |p| p.relerror)) {
        k += 1;
        let snapshot = x.clone();
        let mut w_hat = 0.0;
        if !opts.t_per_factor {
            let t_next = nesterov_tau_step(t)?;
            w_hat = (t - 1.0) / t_next;
            t = t_next;
        }
        let mut last_sys = None;
        for i in 0..3 {
            if opts.t_per_factor {
                let t_next = nesterov_tau_step(t)?;
                w_hat = (t - 1.0) / t_next;
                t = t_next;
            }
            let b = build_khatri_chain(&x, i)?;
            let sys = FactorSystem { cross: unfolded[i].dot(&b), gram: ncpd_gram(&x, i)? };
            let other = dims.iter().product::<usize>() / dims[i];
            let reps = match algo {
                NcpdAlgo::Ibpg | NcpdAlgo::Apgc => 1,
                _ => opts.repeat.max_repeats(other, r),
            };
            match algo {
                NcpdAlgo::AHals => column_sweeps(&mut x[i], &mut prev[i], &sys, None, reps, &opts.repeat, half),
                _ => {
                    let l = sys.lipschitz();
                    if l > 0.0 {
                        let l_prev = lip_last[i].unwrap_or(l);
                        let w = w_hat.min(consts.delta_w * (l_prev / l).sqrt());
                        let p = StepParams { alpha: consts.beta * w, beta: 1.0 / l, gamma: w };
                        inertial_gradient_repeats(&mut x[i], &mut prev[i], &sys, p, reps, &opts.repeat, half);
                        lip[i] = l;
                        lip_last[i] = Some(l);
                    }
                }
            }
            last_sys = Some(sys);
        }
        let sys = last_sys.expect("three factor updates");
        let cached = sys.objective(x[2].view(), half);
        let objective = if cached < EXACT_BELOW * half { exact_objective(instance, &x) } else { cached };
        if diverged(objective, f0) {
            return Err(Error::Diverged { outer: k, objective, last_finite: Box::new(as_blocks(&snapshot)) });
        }
        trace.push(TracePoint { k, elapsed_s: clock.elapsed(k), objective, relerror: relerror(objective) });
    }

    Ok(NcpdRun { state: NcpdState { factors: x, previous: prev, lipschitz: lip, t, outer: k }, trace })
}
