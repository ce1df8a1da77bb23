//! CSV files of a benchmark: `traces.csv`, `runs.csv`, `ranking.csv` and
//! `curves.csv`. Floats are written with 17 significant digits so that
//! reading a file back reproduces every value exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ibpg::matops::fmt_f64;
use ibpg::trace::{Trace, TracePoint};

use crate::error::{BenchError, Result};
use crate::ranking::{rank_groups, CurvePoint, RankingTable};

pub const TRACES_FILE: &str = "traces.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const RANKING_FILE: &str = "ranking.csv";
pub const CURVES_FILE: &str = "curves.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub run_id: usize,
    pub algo: String,
    pub k: usize,
    pub elapsed_s: f64,
    pub objective: f64,
    pub relerror: f64,
}

/// One `(algorithm, seed)` run and the `e_min` of its seed group.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub run_id: usize,
    pub algo: String,
    pub seed: u64,
    pub e_min: f64,
}

pub fn trace_records(run_id: usize, algo: &str, trace: &Trace) -> Vec<TraceRecord> {
    trace
        .points
        .iter()
        .map(|p| TraceRecord {
            run_id,
            algo: algo.to_string(),
            k: p.k,
            elapsed_s: p.elapsed_s,
            objective: p.objective,
            relerror: p.relerror,
        })
        .collect()
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| BenchError::Data(format!("bad {what} value '{field}'")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field.trim().parse().map_err(|_| BenchError::Data(format!("bad {what} value '{field}'")))
}

pub fn write_traces<W: Write>(w: W, records: &[TraceRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run_id", "algo", "k", "elapsed_s", "objective", "relerror"])?;
    for r in records {
        out.write_record([
            r.run_id.to_string(),
            r.algo.clone(),
            r.k.to_string(),
            fmt_f64(r.elapsed_s),
            fmt_f64(r.objective),
            fmt_f64(r.relerror),
        ])?;
    }
    out.flush().map_err(|e| BenchError::io("trace output", e))?;
    Ok(())
}

pub fn read_traces<R: Read>(r: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 6 {
            return Err(BenchError::Data(format!("trace row has {} fields, expected 6", row.len())));
        }
        out.push(TraceRecord {
            run_id: parse_usize(&row[0], "run_id")?,
            algo: row[1].to_string(),
            k: parse_usize(&row[2], "k")?,
            elapsed_s: parse_f64(&row[3], "elapsed_s")?,
            objective: parse_f64(&row[4], "objective")?,
            relerror: parse_f64(&row[5], "relerror")?,
        });
    }
    Ok(out)
}

pub fn write_runs<W: Write>(w: W, runs: &[RunInfo]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run_id", "algo", "seed", "e_min"])?;
    for r in runs {
        out.write_record([r.run_id.to_string(), r.algo.clone(), r.seed.to_string(), fmt_f64(r.e_min)])?;
    }
    out.flush().map_err(|e| BenchError::io("run output", e))?;
    Ok(())
}

pub fn read_runs<R: Read>(r: R) -> Result<Vec<RunInfo>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 4 {
            return Err(BenchError::Data(format!("run row has {} fields, expected 4", row.len())));
        }
        out.push(RunInfo {
            run_id: parse_usize(&row[0], "run_id")?,
            algo: row[1].to_string(),
            seed: row[2].trim().parse().map_err(|_| BenchError::Data(format!("bad seed '{}'", &row[2])))?,
            e_min: parse_f64(&row[3], "e_min")?,
        });
    }
    Ok(out)
}

pub fn write_ranking<W: Write>(w: W, table: &RankingTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = table.rows.first().map_or(0, |r| r.rank_counts.len());
    let mut header = vec!["algo".to_string(), "mean_E".to_string(), "std_E".to_string()];
    header.extend((1..=n).map(|i| format!("rank_{i}")));
    out.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![row.algo.clone(), fmt_f64(row.mean_e), fmt_f64(row.std_e)];
        rec.extend(row.rank_counts.iter().map(|c| c.to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| BenchError::io("ranking output", e))?;
    Ok(())
}

pub fn write_curves<W: Write>(w: W, curves: &[CurvePoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["algo", "t", "mean_E", "runs"])?;
    for c in curves {
        out.write_record([c.algo.clone(), fmt_f64(c.t), fmt_f64(c.mean_e), c.runs.to_string()])?;
    }
    out.flush().map_err(|e| BenchError::io("curve output", e))?;
    Ok(())
}

/// Per-run traces rebuilt from records, keyed by run id.
pub fn traces_by_run(records: &[TraceRecord]) -> BTreeMap<usize, (String, Trace)> {
    let mut out: BTreeMap<usize, (String, Trace)> = BTreeMap::new();
    for r in records {
        let entry = out.entry(r.run_id).or_insert_with(|| (r.algo.clone(), Trace::default()));
        entry.1.push(TracePoint { k: r.k, elapsed_s: r.elapsed_s, objective: r.objective, relerror: r.relerror });
    }
    out
}

/// Rebuilds the ranking from trace and run records: final error minus the
/// run's `e_min`, grouped by seed, algorithms in order of first appearance.
pub fn ranking_from_records(records: &[TraceRecord], runs: &[RunInfo]) -> Result<RankingTable> {
    let traces = traces_by_run(records);
    let mut algos: Vec<String> = Vec::new();
    for r in runs {
        if !algos.contains(&r.algo) {
            algos.push(r.algo.clone());
        }
    }
    let mut groups: BTreeMap<u64, Vec<Option<f64>>> = BTreeMap::new();
    let mut order: Vec<u64> = Vec::new();
    for r in runs {
        let (_, trace) = traces
            .get(&r.run_id)
            .ok_or_else(|| BenchError::Data(format!("run {} has no trace records", r.run_id)))?;
        let e = trace.final_relerror().expect("non-empty trace") - r.e_min;
        let a = algos.iter().position(|x| *x == r.algo).expect("collected above");
        if !groups.contains_key(&r.seed) {
            order.push(r.seed);
        }
        groups.entry(r.seed).or_insert_with(|| vec![None; algos.len()])[a] = Some(e);
    }
    let mut rows = Vec::with_capacity(order.len());
    for seed in order {
        let g = &groups[&seed];
        let vals: Option<Vec<f64>> = g.iter().copied().collect();
        rows.push(vals.ok_or_else(|| BenchError::Data(format!("seed {seed} is missing an algorithm")))?);
    }
    rank_groups(&algos, &rows)
}

/// [`ranking_from_records`] on the files of a benchmark output directory.
pub fn ranking_from_dir(dir: &Path) -> Result<RankingTable> {
    let open = |name: &str| File::open(dir.join(name)).map_err(|e| BenchError::io(dir.join(name), e));
    let records = read_traces(open(TRACES_FILE)?)?;
    let runs = read_runs(open(RUNS_FILE)?)?;
    ranking_from_records(&records, &runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_csv_round_trip_is_exact() {
        let recs = vec![
            TraceRecord { run_id: 0, algo: "ibpg".into(), k: 0, elapsed_s: 0.0, objective: 0.1 + 0.2, relerror: 1.0 / 3.0 },
            TraceRecord { run_id: 1, algo: "ncpd:apgc".into(), k: 7, elapsed_s: 1e-300, objective: 5e-324, relerror: 2.0f64.sqrt() },
        ];
        let mut buf = Vec::new();
        write_traces(&mut buf, &recs).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("run_id,algo,k,elapsed_s,objective,relerror\n"));
        assert_eq!(read_traces(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn ranking_rebuilds_from_records() {
        let mk = |run_id, algo: &str, e: f64| TraceRecord {
            run_id,
            algo: algo.into(),
            k: 0,
            elapsed_s: 0.0,
            objective: e,
            relerror: e,
        };
        let records = vec![mk(0, "a", 0.3), mk(1, "b", 0.2), mk(2, "a", 0.1), mk(3, "b", 0.4)];
        let runs = vec![
            RunInfo { run_id: 0, algo: "a".into(), seed: 5, e_min: 0.0 },
            RunInfo { run_id: 1, algo: "b".into(), seed: 5, e_min: 0.0 },
            RunInfo { run_id: 2, algo: "a".into(), seed: 6, e_min: 0.0 },
            RunInfo { run_id: 3, algo: "b".into(), seed: 6, e_min: 0.0 },
        ];
        let t = ranking_from_records(&records, &runs).unwrap();
        assert_eq!(t.rows[0].rank_counts, vec![1, 1]);
        assert_eq!(t.rows[1].rank_counts, vec![1, 1]);
        assert!(ranking_from_records(&records[..3], &runs).is_err());
    }
}
