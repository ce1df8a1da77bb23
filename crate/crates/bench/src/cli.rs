//! The `ibpg` command line: `gen`, `run`, `bench` and `check-params`.
//!
//! `--config <file>` reads flat `key = value` lines (`#` starts a comment)
//! and treats each as `--key value` placed before the command-line flags, so
//! flags given explicitly win.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use ibpg::block::{
    check_ibp_condition, check_ibpg_condition, max_feasible_ibp_alpha, BlockUpdates, ConditionConstants,
    ConditionReport, GeneratorConstants, IbpVariant, IbpgVariant, OrderPolicy, StepParams, Variant,
};
use ibpg::matops::{fmt_f64, read_matrix, read_tensor, write_matrix, write_tensor};
use ibpg::ncpd::{run_ncpd, NcpdInit, NcpdInstance};
use ibpg::nmf::{ibp_alpha_step, ibpg_nmf_params, nesterov_tau_step, run_nmf, IbpConstants, IbpgConstants, NmfInit, NmfInstance};
use ibpg::trace::{Budget, Trace};
use std::time::Duration;

use crate::data::{gen_synthetic_ncpd, gen_synthetic_nmf, init_rng, DataKind};
use crate::error::{BenchError, Result};
use crate::experiment::{run_benchmark, AlgoSpec, Dims, InitPolicy, Overrides, RunConfig};
use crate::records::{trace_records, write_ranking, write_traces};
use crate::ranking::EminPolicy;

#[derive(Debug, Parser)]
#[command(name = "ibpg", version, about = "Inertial block proximal methods for NMF and NCPD", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic instance in the matrix/tensor text format.
    Gen(GenArgs),
    /// Run one algorithm and write its trace as CSV.
    Run(RunArgs),
    /// Run several algorithms over several seeds and write traces, rankings and curves.
    Bench(BenchArgs),
    /// Check step-parameter schedules against the sufficient-decrease conditions.
    CheckParams(CheckArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// low-rank, full-rank or tensor.
    #[arg(long, default_value = "low-rank")]
    kind: String,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "I")]
    i: Option<usize>,
    #[arg(long = "J")]
    j: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    rank: usize,
}

impl DataArgs {
    fn kind(&self) -> Result<DataKind> {
        self.kind.parse()
    }

    fn dims(&self) -> Result<Dims> {
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| BenchError::Config(format!("--{name} is required")));
        if self.kind()?.is_tensor() {
            Ok(Dims::Tensor { i: need(self.i, "I")?, j: need(self.j, "J")?, k: need(self.k, "K")? })
        } else {
            Ok(Dims::Matrix { m: need(self.m, "m")?, n: need(self.n, "n")? })
        }
    }
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Wall-clock seconds per run.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Outer iterations per run; without a time budget runs are deterministic.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Stop a run once its relative error reaches this value.
    #[arg(long)]
    target_relerror: Option<f64>,
}

impl BudgetArgs {
    fn budget(&self) -> Result<Budget> {
        let time_limit = match self.time_budget {
            None => None,
            Some(t) if t > 0.0 && t.is_finite() => Some(Duration::from_secs_f64(t)),
            Some(t) => return Err(BenchError::Config(format!("time budget {t} must be positive"))),
        };
        let b = Budget { max_outer: self.max_iters, time_limit, target_relerror: self.target_relerror };
        b.validate().map_err(|e| BenchError::Config(format!("{e}; pass --time-budget or --max-iters")))?;
        Ok(b)
    }
}

#[derive(Debug, Args)]
struct OverrideArgs {
    #[arg(long)]
    gamma_tilde: Option<f64>,
    #[arg(long)]
    alpha_breve: Option<f64>,
    #[arg(long)]
    delta_w: Option<f64>,
    #[arg(long)]
    beta_w: Option<f64>,
    #[arg(long)]
    repeat_cap: Option<usize>,
    #[arg(long)]
    inv_beta: Option<f64>,
    /// Advance the NCPD momentum sequence before every factor update.
    #[arg(long)]
    t_per_factor: bool,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            gamma_tilde: self.gamma_tilde,
            alpha_breve: self.alpha_breve,
            delta_w: self.delta_w,
            beta_w: self.beta_w,
            repeat_cap: self.repeat_cap,
            ibp_inv_beta: self.inv_beta,
            t_per_factor: self.t_per_factor,
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    algo: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read the instance from a matrix or tensor text file instead of generating it.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value = "cyclic")]
    order: String,
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Trace CSV file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated algorithm tags.
    #[arg(long)]
    algos: String,
    /// `a..b` (exclusive), `a..=b`, or a comma-separated list.
    #[arg(long, default_value = "0")]
    seeds: String,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value = "cyclic")]
    order: String,
    /// uniform or scaled.
    #[arg(long, default_value = "uniform")]
    init: String,
    /// zero or best-observed; defaults to zero unless the data is full-rank.
    #[arg(long)]
    e_min: Option<String>,
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// ibpg or ibp.
    #[arg(long, default_value = "ibpg")]
    method: String,
    /// Condition variant; defaults to the block-convex one of the method.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    kappa: f64,
    #[arg(long, default_value_t = IbpgConstants::IBPG.gamma_tilde)]
    gamma_tilde: f64,
    #[arg(long, default_value_t = IbpgConstants::IBPG.alpha_breve)]
    alpha_breve: f64,
    /// Block Lipschitz constant, held fixed over the schedule.
    #[arg(long, default_value_t = 1.0)]
    lipschitz: f64,
    #[arg(long, default_value_t = 200)]
    loops: usize,
    #[arg(long, default_value_t = IbpConstants::default().alpha_start)]
    alpha_start: f64,
    #[arg(long, default_value_t = IbpConstants::default().growth)]
    alpha_growth: f64,
    #[arg(long, default_value_t = IbpConstants::default().cap)]
    alpha_cap: f64,
    #[arg(long, default_value_t = IbpConstants::default().inv_beta)]
    inv_beta: f64,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Parses `0..10`, `0..=9` or `1,4,7`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || BenchError::Config(format!("invalid seed list '{s}'"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let seeds = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<Result<Vec<_>>>()?
    };
    if seeds.is_empty() {
        return Err(BenchError::Config(format!("seed list '{s}' is empty")));
    }
    Ok(seeds)
}

fn parse_algos(s: &str, kind: DataKind) -> Result<Vec<AlgoSpec>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| AlgoSpec::parse(t, kind)).collect()
}

fn parse_order(s: &str) -> Result<OrderPolicy> {
    s.parse().map_err(|e: ibpg::Error| BenchError::Config(e.to_string()))
}

/// Turns `key = value` lines into flags.
pub fn config_flags(text: &str) -> Result<Vec<String>> {
    let mut flags = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("config line {}: expected 'key = value'", no + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(BenchError::Config(format!("config line {}: empty key", no + 1)));
        }
        let key = if key.len() == 1 && key.chars().all(|c| c.is_ascii_uppercase()) { key.to_string() } else { key.replace('_', "-") };
        let value = value.trim();
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => {
                flags.push(format!("--{key}"));
                flags.push(value.to_string());
            }
        }
    }
    Ok(flags)
}

fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    if args.len() < 2 {
        return Ok(args);
    }
    let text = fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
    let mut out = args[..2].to_vec();
    out.extend(config_flags(&text)?);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

/// Runs the command line and returns the exit status: 0 on success, 1 for
/// usage errors, 2 for runtime failures.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report(err, &e),
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    let res = match cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Run(a) => run_one(a, out, err),
        Command::Bench(a) => bench(a, out),
        Command::CheckParams(a) => check_params(a, out),
    };
    match res {
        Ok(()) => 0,
        Err(e) => report(err, &e),
    }
}

fn report(err: &mut dyn Write, e: &BenchError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    if e.is_usage() {
        1
    } else {
        2
    }
}

fn with_output(path: Option<&Path>, out: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| BenchError::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| BenchError::io(p, e))
        }
        None => f(out),
    }
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<()> {
    let kind = a.data.kind()?;
    match a.data.dims()? {
        Dims::Matrix { m, n } => {
            let d = gen_synthetic_nmf(kind, m, n, a.data.rank, a.seed)?;
            with_output(a.out.as_deref(), out, |w| Ok(write_matrix(w, d.instance.data())?))
        }
        Dims::Tensor { i, j, k } => {
            let d = gen_synthetic_ncpd((i, j, k), a.data.rank, a.seed)?;
            with_output(a.out.as_deref(), out, |w| Ok(write_tensor(w, d.instance.data())?))
        }
    }
}

fn run_one(a: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let kind = a.data.kind()?;
    let algo = AlgoSpec::parse(&a.algo, kind)?;
    let budget = a.budget.budget()?;
    let mut cfg = RunConfig::new(kind, Dims::Matrix { m: 0, n: 0 }, a.data.rank, vec![algo], vec![a.seed], budget);
    cfg.order = parse_order(&a.order)?;
    cfg.overrides = a.overrides.overrides();
    let read = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| BenchError::io(p, e));
    let trace: Trace = match algo {
        AlgoSpec::Nmf(alg) => {
            let instance = match &a.input {
                Some(p) => NmfInstance::new(read_matrix(read(p)?)?, a.data.rank)?,
                None => {
                    let Dims::Matrix { m, n } = a.data.dims()? else { unreachable!("matrix kind") };
                    gen_synthetic_nmf(kind, m, n, a.data.rank, a.seed)?.instance
                }
            };
            let (m, n) = instance.dims();
            let init = NmfInit::from_rng(&mut init_rng(a.seed), m, n, a.data.rank);
            let opts = cfg.nmf_options(alg, a.seed);
            run_nmf(&instance, alg, &init, &opts)?.trace
        }
        AlgoSpec::Ncpd(alg) => {
            let instance = match &a.input {
                Some(p) => NcpdInstance::new(read_tensor(read(p)?)?, a.data.rank)?,
                None => {
                    let Dims::Tensor { i, j, k } = a.data.dims()? else { unreachable!("tensor kind") };
                    gen_synthetic_ncpd((i, j, k), a.data.rank, a.seed)?.instance
                }
            };
            let init = NcpdInit::from_rng(&mut init_rng(a.seed), instance.dims(), a.data.rank);
            let opts = cfg.ncpd_options(alg);
            run_ncpd(&instance, alg, &init, &opts)?.trace
        }
    };
    if let Some(last) = trace.last() {
        let _ = writeln!(err, "{algo}: {} iterations, relative error {}", last.k, fmt_f64(last.relerror));
    }
    let records = trace_records(0, &algo.to_string(), &trace);
    with_output(a.out.as_deref(), out, |w| write_traces(w, &records))
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<()> {
    let kind = a.data.kind()?;
    let mut cfg = RunConfig::new(
        kind,
        a.data.dims()?,
        a.data.rank,
        parse_algos(&a.algos, kind)?,
        parse_seeds(&a.seeds)?,
        a.budget.budget()?,
    );
    cfg.order = parse_order(&a.order)?;
    cfg.init = a.init.parse::<InitPolicy>()?;
    cfg.e_min = a.e_min.as_deref().map(str::parse::<EminPolicy>).transpose()?;
    cfg.overrides = a.overrides.overrides();
    cfg.out = a.out;
    let res = run_benchmark(&cfg)?;
    write_ranking(out, &res.ranking)
}

fn ibpg_schedule(a: &CheckArgs) -> Result<Vec<BlockUpdates>> {
    let consts = IbpgConstants { gamma_tilde: a.gamma_tilde, alpha_breve: a.alpha_breve };
    let l = a.lipschitz;
    let mut tau = 1.0;
    let mut params = Vec::with_capacity(a.loops + 1);
    for _ in 0..=a.loops {
        tau = nesterov_tau_step(tau)?;
        params.push(ibpg_nmf_params(tau, l, l, consts)?);
    }
    Ok(pairs(params, Some(l)))
}

fn ibp_schedule(a: &CheckArgs) -> Result<Vec<BlockUpdates>> {
    if !(a.inv_beta > 0.0) {
        return Err(BenchError::Config(format!("--inv-beta {} must be positive", a.inv_beta)));
    }
    let c = IbpConstants { alpha_start: a.alpha_start, growth: a.alpha_growth, cap: a.alpha_cap, inv_beta: a.inv_beta };
    let mut alpha = None;
    let mut params = Vec::with_capacity(a.loops + 1);
    for _ in 0..=a.loops {
        let next = ibp_alpha_step(alpha, c);
        alpha = Some(next);
        params.push(StepParams { alpha: next, beta: 1.0 / a.inv_beta, gamma: 0.0 });
    }
    Ok(pairs(params, None))
}

/// One block updated once per loop: loop `k` pairs its update with the first
/// update of loop `k + 1`.
fn pairs(params: Vec<StepParams>, l: Option<f64>) -> Vec<BlockUpdates> {
    params
        .windows(2)
        .enumerate()
        .map(|(k, w)| BlockUpdates {
            block: 0,
            outer: k + 1,
            params: w.to_vec(),
            lipschitz: l.map(|l| vec![l, l]).unwrap_or_default(),
        })
        .collect()
}

fn check_params(a: CheckArgs, out: &mut dyn Write) -> Result<()> {
    let cfg_err = |e: ibpg::Error| BenchError::Config(e.to_string());
    if a.loops == 0 {
        return Err(BenchError::Config("--loops must be at least 1".into()));
    }
    let g = GeneratorConstants::EUCLIDEAN;
    let w = |e: std::io::Error| BenchError::io("standard output", e);
    match a.method.as_str() {
        "ibpg" => {
            let variant = match a.variant.as_deref() {
                None => IbpgVariant::BlockConvex,
                Some(v) => match v.parse::<Variant>().map_err(cfg_err)? {
                    Variant::Ibpg(v) => v,
                    Variant::Ibp(_) => return Err(BenchError::Config(format!("variant {v} belongs to ibp"))),
                },
            };
            let c = ConditionConstants { nu: a.nu.unwrap_or(0.0099), delta: a.delta.unwrap_or(1.00005), kappa: a.kappa };
            c.validate(Variant::Ibpg(variant)).map_err(cfg_err)?;
            let report = check_ibpg_condition(&ibpg_schedule(&a)?, c, g, variant)?;
            report.write_csv(&mut *out)?;
            summary(out, &report, Variant::Ibpg(variant), c).map_err(w)?;
        }
        "ibp" => {
            let variant = match a.variant.as_deref() {
                None => IbpVariant::BlockConvex,
                Some(v) => match v.parse::<Variant>().map_err(cfg_err)? {
                    Variant::Ibp(v) => v,
                    Variant::Ibpg(_) => return Err(BenchError::Config(format!("variant {v} belongs to ibpg"))),
                },
            };
            let c = ConditionConstants { nu: a.nu.unwrap_or(0.5), delta: a.delta.unwrap_or(1.01), kappa: a.kappa };
            c.validate(Variant::Ibp(variant)).map_err(cfg_err)?;
            let report = check_ibp_condition(&ibp_schedule(&a)?, c, g, variant)?;
            report.write_csv(&mut *out)?;
            summary(out, &report, Variant::Ibp(variant), c).map_err(w)?;
            let amax = max_feasible_ibp_alpha(c, g, variant)?;
            writeln!(out, "# max feasible constant alpha: {}", fmt_f64(amax)).map_err(w)?;
        }
        other => return Err(BenchError::Config(format!("unknown method '{other}' (expected ibpg or ibp)"))),
    }
    Ok(())
}

fn summary(out: &mut dyn Write, r: &ConditionReport, v: Variant, c: ConditionConstants) -> std::io::Result<()> {
    writeln!(out, "# variant: {v}, nu: {}, delta: {}", fmt_f64(c.nu), fmt_f64(c.delta))?;
    writeln!(out, "# feasible: {}", r.feasible())?;
    writeln!(out, "# min margin: {}", fmt_f64(r.min_margin()))?;
    writeln!(out, "# max delta: {}", fmt_f64(r.max_delta()))
}
