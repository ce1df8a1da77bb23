//! Error curves `E(k) = relerror_k - e_min`, rank counts and time-averaged
//! curves.

use std::fmt;
use std::str::FromStr;

use ibpg::trace::Trace;

use crate::error::{BenchError, Result};

/// Relative tolerance under which two final errors count as tied.
pub const TIE_RTOL: f64 = 1e-12;

/// Number of points of the shared time grid of averaged curves.
pub const GRID_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EminPolicy {
    /// The data is exactly factorizable.
    Zero,
    /// Smallest final relative error among the supplied runs.
    BestObserved,
}

impl fmt::Display for EminPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EminPolicy::Zero => "zero",
            EminPolicy::BestObserved => "best-observed",
        })
    }
}

impl FromStr for EminPolicy {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(EminPolicy::Zero),
            "best-observed" | "best" => Ok(EminPolicy::BestObserved),
            other => Err(BenchError::Config(format!("unknown e-min policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ECurves {
    pub e_min: f64,
    /// One `E(k)` sequence per supplied trace.
    pub curves: Vec<Vec<f64>>,
}

/// `E(k)` for every trace of one instance.
pub fn compute_e(traces: &[&Trace], policy: EminPolicy) -> Result<ECurves> {
    if traces.is_empty() || traces.iter().any(|t| t.is_empty()) {
        return Err(BenchError::Data("error curves need at least one non-empty trace".into()));
    }
    let e_min = match policy {
        EminPolicy::Zero => 0.0,
        EminPolicy::BestObserved => traces
            .iter()
            .filter_map(|t| t.final_relerror())
            .fold(f64::INFINITY, f64::min),
    };
    let curves = traces.iter().map(|t| t.points.iter().map(|p| p.relerror - e_min).collect()).collect();
    Ok(ECurves { e_min, curves })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub algo: String,
    pub mean_e: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_e: f64,
    /// Entry `i` counts the runs in which this algorithm had the
    /// `(i + 1)`-th best final error.
    pub rank_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingTable {
    pub rows: Vec<RankingRow>,
}

fn tied(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_RTOL * a.abs().max(b.abs())
}

/// Ranks within each group of final errors (one group per seed, one entry
/// per algorithm in `algos` order). Tied errors share the better rank.
pub fn rank_groups(algos: &[String], groups: &[Vec<f64>]) -> Result<RankingTable> {
    let n = algos.len();
    if n == 0 || groups.is_empty() {
        return Err(BenchError::Data("ranking needs at least one algorithm and one run".into()));
    }
    if let Some(g) = groups.iter().find(|g| g.len() != n) {
        return Err(BenchError::Data(format!("a run group has {} errors for {n} algorithms", g.len())));
    }
    let mut counts = vec![vec![0usize; n]; n];
    for g in groups {
        for (a, &ea) in g.iter().enumerate() {
            let better = g.iter().filter(|&&eb| eb < ea && !tied(ea, eb)).count();
            counts[a][better] += 1;
        }
    }
    let runs = groups.len() as f64;
    let rows = algos
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let mean = groups.iter().map(|g| g[a]).sum::<f64>() / runs;
            let std = if groups.len() > 1 {
                (groups.iter().map(|g| (g[a] - mean).powi(2)).sum::<f64>() / (runs - 1.0)).sqrt()
            } else {
                0.0
            };
            RankingRow { algo: name.clone(), mean_e: mean, std_e: std, rank_counts: counts[a].clone() }
        })
        .collect();
    Ok(RankingTable { rows })
}

/// `n` log-spaced points from `lo` to `hi` (both positive), increasing.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![lo; n.min(1)];
    }
    let ratio = hi / lo;
    (0..n)
        .map(|j| if j + 1 == n { hi } else { lo * ratio.powf(j as f64 / (n - 1) as f64) })
        .collect()
}

/// Linear interpolation of `(t, value)` points sorted by `t`; `None` outside
/// the observed span.
pub fn interpolate(points: &[(f64, f64)], t: f64) -> Option<f64> {
    let (first, last) = (points.first()?, points.last()?);
    if t < first.0 || t > last.0 {
        return None;
    }
    let idx = points.partition_point(|p| p.0 < t);
    let hi = points[idx];
    if hi.0 == t || idx == 0 {
        return Some(hi.1);
    }
    let lo = points[idx - 1];
    let w = (t - lo.0) / (hi.0 - lo.0);
    Some(lo.1 + w * (hi.1 - lo.1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub algo: String,
    pub t: f64,
    pub mean_e: f64,
    /// Runs whose observed span contains `t`.
    pub runs: usize,
}

/// Averages each algorithm's `E` curves over a shared log-spaced time grid
/// running from the earliest positive time stamp to the latest one.
/// `runs` holds `(algorithm index, [(elapsed, E)])`.
pub fn average_curves(algos: &[String], runs: &[(usize, Vec<(f64, f64)>)], grid_points: usize) -> Vec<CurvePoint> {
    let lo = runs
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .filter(|t| *t > 0.0)
        .fold(f64::INFINITY, f64::min);
    let hi = runs.iter().filter_map(|(_, pts)| pts.last().map(|p| p.0)).fold(0.0, f64::max);
    if !lo.is_finite() || !(hi >= lo) {
        return Vec::new();
    }
    let grid = log_grid(lo, hi, grid_points);
    let mut out = Vec::new();
    for (a, name) in algos.iter().enumerate() {
        for &t in &grid {
            let vals: Vec<f64> = runs.iter().filter(|(i, _)| *i == a).filter_map(|(_, pts)| interpolate(pts, t)).collect();
            if !vals.is_empty() {
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                out.push(CurvePoint { algo: name.clone(), t, mean_e: mean, runs: vals.len() });
            }
        }
    }
    out
}
