//! Multi-algorithm, multi-seed runs on synthetic data with shared
//! initializations.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use ibpg::block::OrderPolicy;
use ibpg::ncpd::{run_ncpd, NcpdAlgo, NcpdConstants, NcpdInit, NcpdOptions};
use ibpg::nmf::{run_nmf, IbpgConstants, NmfAlgo, NmfInit, NmfOptions};
use ibpg::trace::{Budget, Trace};
use ndarray::Array2;

use crate::data::{gen_synthetic_ncpd, gen_synthetic_nmf, init_rng, DataKind};
use crate::error::{BenchError, Result};
use crate::ranking::{average_curves, compute_e, CurvePoint, EminPolicy, RankingTable, GRID_POINTS};
use crate::records::{
    ranking_from_records, trace_records, write_curves, write_ranking, write_runs, write_traces, RunInfo,
    TraceRecord, CURVES_FILE, RANKING_FILE, RUNS_FILE, TRACES_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoSpec {
    Nmf(NmfAlgo),
    Ncpd(NcpdAlgo),
}

impl AlgoSpec {
    /// NCPD algorithms are reported as `ncpd:<tag>`.
    pub fn parse(s: &str, kind: DataKind) -> Result<Self> {
        let res = if kind.is_tensor() {
            s.parse().map(AlgoSpec::Ncpd)
        } else {
            s.parse().map(AlgoSpec::Nmf)
        };
        res.map_err(|e| BenchError::Config(e.to_string()))
    }
}

impl fmt::Display for AlgoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgoSpec::Nmf(a) => write!(f, "{a}"),
            AlgoSpec::Ncpd(a) => write!(f, "ncpd:{a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitPolicy {
    /// Uniform factors on `[0, 1)`.
    #[default]
    Uniform,
    /// Uniform factors rescaled by the least-squares optimal scalar.
    Scaled,
}

impl std::str::FromStr for InitPolicy {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(InitPolicy::Uniform),
            "scaled" => Ok(InitPolicy::Scaled),
            other => Err(BenchError::Config(format!("unknown init policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dims {
    Matrix { m: usize, n: usize },
    Tensor { i: usize, j: usize, k: usize },
}

/// Optional replacements of solver constants; `None` keeps the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    /// IBPG and IBPG-A on NMF.
    pub gamma_tilde: Option<f64>,
    pub alpha_breve: Option<f64>,
    /// IBPG, IBPG-A on NCPD.
    pub delta_w: Option<f64>,
    pub beta_w: Option<f64>,
    pub repeat_cap: Option<usize>,
    pub ibp_inv_beta: Option<f64>,
    pub t_per_factor: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: DataKind,
    pub dims: Dims,
    pub rank: usize,
    pub algos: Vec<AlgoSpec>,
    pub seeds: Vec<u64>,
    pub budget: Budget,
    pub init: InitPolicy,
    /// Output directory for the CSV files.
    pub out: Option<PathBuf>,
    pub order: OrderPolicy,
    pub overrides: Overrides,
    /// Defaults to zero for exactly factorizable data.
    pub e_min: Option<EminPolicy>,
}

impl RunConfig {
    pub fn new(kind: DataKind, dims: Dims, rank: usize, algos: Vec<AlgoSpec>, seeds: Vec<u64>, budget: Budget) -> Self {
        RunConfig {
            kind,
            dims,
            rank,
            algos,
            seeds,
            budget,
            init: InitPolicy::Uniform,
            out: None,
            order: OrderPolicy::Cyclic,
            overrides: Overrides::default(),
            e_min: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algos.is_empty() {
            return Err(BenchError::Config("at least one algorithm is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Config("at least one seed is required".into()));
        }
        self.budget.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        let tensor_algos = self.algos.iter().all(|a| matches!(a, AlgoSpec::Ncpd(_)));
        let matrix_algos = self.algos.iter().all(|a| matches!(a, AlgoSpec::Nmf(_)));
        match (self.kind.is_tensor(), self.dims) {
            (true, Dims::Tensor { .. }) if tensor_algos => Ok(()),
            (false, Dims::Matrix { .. }) if matrix_algos => Ok(()),
            _ => Err(BenchError::Config(format!("algorithms and dimensions do not match data kind {}", self.kind))),
        }
    }

    pub fn e_min_policy(&self) -> EminPolicy {
        self.e_min.unwrap_or(match self.kind {
            DataKind::FullRank => EminPolicy::BestObserved,
            _ => EminPolicy::Zero,
        })
    }

    pub fn nmf_options(&self, algo: NmfAlgo, seed: u64) -> NmfOptions {
        let mut o = NmfOptions::new(self.budget);
        o.order = self.order;
        o.seed = seed;
        let ov = self.overrides;
        if matches!(algo, NmfAlgo::Ibpg | NmfAlgo::IbpgA) && (ov.gamma_tilde.is_some() || ov.alpha_breve.is_some()) {
            let d = IbpgConstants::IBPG;
            o.ibpg = Some(IbpgConstants {
                gamma_tilde: ov.gamma_tilde.unwrap_or(d.gamma_tilde),
                alpha_breve: ov.alpha_breve.unwrap_or(d.alpha_breve),
            });
        }
        if let Some(c) = ov.repeat_cap {
            o.repeat.cap = c;
        }
        if let Some(ib) = ov.ibp_inv_beta {
            o.ibp.inv_beta = ib;
        }
        o
    }

    pub fn ncpd_options(&self, algo: NcpdAlgo) -> NcpdOptions {
        let mut o = NcpdOptions::new(self.budget);
        let ov = self.overrides;
        if matches!(algo, NcpdAlgo::Ibpg | NcpdAlgo::IbpgA) && (ov.delta_w.is_some() || ov.beta_w.is_some()) {
            let d = NcpdConstants::IBPG;
            o.constants =
                Some(NcpdConstants { delta_w: ov.delta_w.unwrap_or(d.delta_w), beta: ov.beta_w.unwrap_or(d.beta) });
        }
        if let Some(c) = ov.repeat_cap {
            o.repeat.cap = c;
        }
        o.t_per_factor = ov.t_per_factor;
        o
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    /// Sorted by run id, then `k`.
    pub records: Vec<TraceRecord>,
    pub runs: Vec<RunInfo>,
    pub ranking: RankingTable,
    pub curves: Vec<CurvePoint>,
}

/// Scales `factors` so that their product best matches the data in norm:
/// `c = <X, P> / |P|^2`, applied as `c^(1/len)` to each factor.
fn rescale(factors: &mut [Array2<f64>], data_dot_model: f64, model_sq: f64) {
    if model_sq > 0.0 && data_dot_model > 0.0 {
        let c = (data_dot_model / model_sq).powf(1.0 / factors.len() as f64);
        for f in factors.iter_mut() {
            f.mapv_inplace(|x| x * c);
        }
    }
}

fn run_seed(cfg: &RunConfig, seed: u64) -> Result<Vec<Trace>> {
    let mut traces = Vec::with_capacity(cfg.algos.len());
    match cfg.dims {
        Dims::Matrix { m, n } => {
            let data = gen_synthetic_nmf(cfg.kind, m, n, cfg.rank, seed)?;
            let mut init = NmfInit::from_rng(&mut init_rng(seed), m, n, cfg.rank);
            if cfg.init == InitPolicy::Scaled {
                let p = init.u.dot(&init.v);
                let x = data.instance.data();
                let dot = (&p * &x).sum();
                let sq = (&p * &p).sum();
                let mut f = [init.u, init.v];
                rescale(&mut f, dot, sq);
                let [u, v] = f;
                init = NmfInit { u, v };
            }
            for algo in &cfg.algos {
                let AlgoSpec::Nmf(a) = *algo else { unreachable!("validated") };
                log::debug!("seed {seed}: {a}");
                traces.push(run_nmf(&data.instance, a, &init, &cfg.nmf_options(a, seed))?.trace);
            }
        }
        Dims::Tensor { i, j, k } => {
            let data = gen_synthetic_ncpd((i, j, k), cfg.rank, seed)?;
            let mut init = NcpdInit::from_rng(&mut init_rng(seed), (i, j, k), cfg.rank);
            if cfg.init == InitPolicy::Scaled {
                let f = &init.factors;
                let p = ibpg::matops::cp_reconstruct(f[0].view(), f[1].view(), f[2].view())?;
                let dot = (&p * &data.instance.data()).sum();
                let sq = (&p * &p).sum();
                rescale(&mut init.factors, dot, sq);
            }
            for algo in &cfg.algos {
                let AlgoSpec::Ncpd(a) = *algo else { unreachable!("validated") };
                log::debug!("seed {seed}: ncpd:{a}");
                traces.push(run_ncpd(&data.instance, a, &init, &cfg.ncpd_options(a))?.trace);
            }
        }
    }
    Ok(traces)
}

/// Runs every algorithm on every seed. Run `seed_index * n_algos + algo_index`
/// uses the data and initialization of its seed.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let policy = cfg.e_min_policy();
    let names: Vec<String> = cfg.algos.iter().map(|a| a.to_string()).collect();
    let mut records = Vec::new();
    let mut runs = Vec::new();
    let mut curve_runs = Vec::new();
    for (si, &seed) in cfg.seeds.iter().enumerate() {
        let traces = run_seed(cfg, seed)?;
        let refs: Vec<&Trace> = traces.iter().collect();
        let e = compute_e(&refs, policy)?;
        for (ai, trace) in traces.iter().enumerate() {
            let run_id = si * names.len() + ai;
            records.extend(trace_records(run_id, &names[ai], trace));
            runs.push(RunInfo { run_id, algo: names[ai].clone(), seed, e_min: e.e_min });
            let pts = trace.points.iter().zip(&e.curves[ai]).map(|(p, &v)| (p.elapsed_s, v)).collect();
            curve_runs.push((ai, pts));
        }
        log::info!("seed {seed} done ({}/{})", si + 1, cfg.seeds.len());
    }
    let ranking = ranking_from_records(&records, &runs)?;
    let curves = average_curves(&names, &curve_runs, GRID_POINTS);
    let output = BenchOutput { records, runs, ranking, curves };
    if let Some(dir) = &cfg.out {
        write_output(dir, &output)?;
    }
    Ok(output)
}

pub fn write_output(dir: &std::path::Path, out: &BenchOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let create = |name: &str| {
        let path = dir.join(name);
        File::create(&path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))
    };
    write_traces(create(TRACES_FILE)?, &out.records)?;
    write_runs(create(RUNS_FILE)?, &out.runs)?;
    write_ranking(create(RANKING_FILE)?, &out.ranking)?;
    write_curves(create(CURVES_FILE)?, &out.curves)?;
    Ok(())
}
