use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use qcl_core::analysis::report;
use qcl_core::simulate;
use rayon::prelude::*;

use crate::source::{build, Builder, Cell, FixedParams};

const HEADER: &str = "n,delta,a,b,seed,policy,t_con,bound,bound_ok,avg_drift,status";

/// Parsed list-valued flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Values<T>(pub Vec<T>);

/// Comma list of integers, or an inclusive range `lo..hi` (empty if lo > hi).
fn parse_ints<T>(s: &str) -> Result<Values<T>, String>
where
    T: std::str::FromStr + TryFrom<u64>,
{
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
        return (lo..=hi)
            .map(|v| T::try_from(v).map_err(|_| format!("{v} out of range")))
            .collect::<Result<_, _>>()
            .map(Values);
    }
    list(s)
}

fn list<T: std::str::FromStr>(s: &str) -> Result<Values<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| format!("cannot parse {p:?}")))
        .collect::<Result<_, _>>()
        .map(Values)
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub builder: Builder,
    /// Agent counts: `3,4,5` or `3..8`.
    #[arg(long, default_value = "3", value_parser = parse_ints::<usize>)]
    pub n: Values<usize>,
    #[arg(long, default_value = "1", value_parser = list::<f64>)]
    pub delta: Values<f64>,
    #[arg(long, default_value = "1", value_parser = list::<f64>)]
    pub a: Values<f64>,
    #[arg(long, default_value = "1", value_parser = list::<f64>)]
    pub b: Values<f64>,
    #[arg(long, default_value = "0", value_parser = parse_ints::<u64>)]
    pub seed: Values<u64>,
    #[command(flatten)]
    pub fixed: FixedParams,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Row {
    cell: Cell,
    policy: String,
    t_con: Option<f64>,
    bound: Option<f64>,
    avg_drift: Option<f64>,
    status: String,
    failed: bool,
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

impl Row {
    fn csv(&self) -> String {
        let bound_ok = match (self.t_con, self.bound) {
            (Some(t), Some(b)) => (t <= b).to_string(),
            _ => String::new(),
        };
        let c = &self.cell;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.n,
            c.delta,
            c.a,
            c.b,
            c.seed,
            self.policy,
            opt(self.t_con),
            opt(self.bound),
            bound_ok,
            opt(self.avg_drift),
            self.status
        )
    }
}

fn run_cell(builder: Builder, cell: Cell, fixed: &FixedParams) -> Row {
    let mut row = Row {
        cell,
        policy: fixed.policy.map_or("", |p| p.name()).to_string(),
        t_con: None,
        bound: None,
        avg_drift: None,
        status: String::new(),
        failed: false,
    };
    let outcome = build(builder, &cell, fixed).and_then(|c| {
        row.policy = c.policy.name().to_string();
        let traj = simulate(&c)?;
        Ok(report(&traj, &c.schedule))
    });
    match outcome {
        Ok(r) => {
            row.t_con = r.t_con;
            row.bound = r.bound;
            row.avg_drift = Some(r.average_drift);
            row.status = if r.converged { "converged" } else { "horizon" }.into();
        }
        Err(e) => {
            row.failed = true;
            // keep the row a single CSV record
            row.status = format!("error: {e:#}").replace([',', '\n', '\r'], ";");
        }
    }
    row
}

pub fn sweep(args: &SweepArgs) -> Result<ExitCode> {
    let mut cells = Vec::new();
    for &n in &args.n.0 {
        for &delta in &args.delta.0 {
            for &a in &args.a.0 {
                for &b in &args.b.0 {
                    for &seed in &args.seed.0 {
                        cells.push(Cell { n, delta, a, b, seed });
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    let rows: Vec<Row> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| run_cell(args.builder, cell, &args.fixed))
            .collect()
    });

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    writeln!(out, "{HEADER}")?;
    for r in &rows {
        writeln!(out, "{}", r.csv())?;
    }
    out.flush()?;
    Ok(if rows.iter().any(|r| r.failed) { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
