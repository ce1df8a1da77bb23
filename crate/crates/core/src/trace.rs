//! Per-run convergence traces and run budgets.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Outer iteration index; 0 is the initial point.
    pub k: usize,
    pub elapsed_s: f64,
    pub objective: f64,
    pub relerror: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub points: Vec<TracePoint>,
}

impl Trace {
    pub fn push(&mut self, p: TracePoint) {
        self.points.push(p);
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn final_relerror(&self) -> Option<f64> {
        self.last().map(|p| p.relerror)
    }
}

/// Stopping budget for a solver run. A run stops at whichever limit is hit
/// first. Without a time limit the run is deterministic and its trace uses a
/// logical clock (`elapsed_s == k`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_outer: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Stop early once the relative error is at or below this value.
    pub target_relerror: Option<f64>,
}

impl Budget {
    pub fn iterations(n: usize) -> Self {
        Budget { max_outer: Some(n), time_limit: None, target_relerror: None }
    }

    pub fn seconds(s: f64) -> Self {
        Budget { max_outer: None, time_limit: Some(Duration::from_secs_f64(s)), target_relerror: None }
    }

    pub fn with_target(self, relerror: f64) -> Self {
        Budget { target_relerror: Some(relerror), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.target_relerror {
            if !(t >= 0.0) {
                return Err(Error::invalid(format!("target relative error {t} must be nonnegative")));
            }
        }
        match (self.max_outer, self.time_limit) {
            (None, None) => Err(Error::invalid("budget needs an iteration cap or a time limit")),
            (_, Some(t)) if t.is_zero() => Err(Error::invalid("time budget must be positive")),
            _ => Ok(()),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.time_limit.is_none()
    }
}

/// Measures run progress against a [`Budget`].
#[derive(Debug, Clone)]
pub struct RunClock {
    budget: Budget,
    start: Instant,
}

impl RunClock {
    pub fn start(budget: Budget) -> Result<Self> {
        budget.validate()?;
        Ok(RunClock { budget, start: Instant::now() })
    }

    /// Elapsed seconds after `k` completed outer iterations.
    pub fn elapsed(&self, k: usize) -> f64 {
        if self.budget.is_deterministic() {
            k as f64
        } else {
            self.start.elapsed().as_secs_f64()
        }
    }

    /// True once `k` outer iterations are done or the time limit has passed.
    pub fn exhausted(&self, k: usize) -> bool {
        if let Some(n) = self.budget.max_outer {
            if k >= n {
                return true;
            }
        }
        match self.budget.time_limit {
            Some(t) => self.start.elapsed() >= t,
            None => false,
        }
    }
}

impl RunClock {
    /// [`RunClock::exhausted`], or the last recorded relative error reached the target.
    pub fn done(&self, k: usize, relerror: f64) -> bool {
        self.exhausted(k) || self.budget.target_relerror.is_some_and(|t| relerror <= t)
    }
}

/// Objective blow-up guard: non-finite, or more than 1e12 times the initial
/// objective. A zero initial objective only trips on non-finite values.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

pub fn diverged(objective: f64, initial: f64) -> bool {
    !objective.is_finite() || (initial > 0.0 && objective > DIVERGENCE_FACTOR * initial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_validation() {
        assert!(Budget { max_outer: None, time_limit: None, target_relerror: None }.validate().is_err());
        assert!(Budget::seconds(1.0).with_target(-1.0).validate().is_err());
        assert!(Budget { time_limit: Some(Duration::ZERO), ..Budget::iterations(1) }.validate().is_err());
        assert!(Budget::iterations(0).validate().is_ok());
        assert!(Budget::seconds(0.5).validate().is_ok());
    }

    #[test]
    fn logical_clock_counts_iterations() {
        let c = RunClock::start(Budget::iterations(3)).unwrap();
        assert_eq!(c.elapsed(2), 2.0);
        assert!(!c.exhausted(2));
        assert!(c.exhausted(3));
        let t = RunClock::start(Budget::iterations(3).with_target(1e-3)).unwrap();
        assert!(t.done(1, 1e-3));
        assert!(!t.done(1, 2e-3));
        assert!(!t.done(1, f64::NAN));
    }

    #[test]
    fn divergence_guard() {
        assert!(diverged(f64::NAN, 1.0));
        assert!(diverged(f64::INFINITY, 1.0));
        assert!(diverged(2e12, 1.0));
        assert!(!diverged(1e11, 1.0));
        assert!(!diverged(5.0, 0.0));
    }
}
