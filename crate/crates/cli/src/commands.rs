use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use qcl_core::analysis::{report, tcon_bound};
use qcl_core::dynamics::{max_deviation, simulate_regularized, RegularizedOptions};
use qcl_core::io::{to_json_string, write_json, write_trajectory_csv};
use qcl_core::{simulate, Error, ScenarioConfig, Trajectory};

use crate::source::ScenarioArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: ScenarioArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Trajectory formats to write.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Format::Csv, Format::Json])]
    pub format: Vec<Format>,
    /// Also add CSV sample rows at multiples of this time step.
    #[arg(long)]
    pub stride: Option<f64>,
    /// Compare against the regularized RK4 reference.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub oracle_eps: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub oracle_h: f64,
}

fn write_trajectory(out: &Path, traj: &Trajectory, formats: &[Format], stride: Option<f64>) -> Result<()> {
    for f in formats {
        match f {
            Format::Csv => {
                let path = out.join("trajectory.csv");
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_trajectory_csv(BufWriter::new(file), traj, stride)?;
            }
            Format::Json => {
                let path = out.join("trajectory.json");
                fs::write(&path, to_json_string(traj)?).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

pub fn oracle_deviation(c: &ScenarioConfig, traj: &Trajectory, eps: f64, h: f64) -> Result<f64> {
    let t_end = traj.end_time() + 1.0;
    let stride = ((0.01 / h).round() as usize).max(1);
    let samples = simulate_regularized(&c.schedule, &c.quantizer, &c.x0, &RegularizedOptions { eps, h, t_end, stride })?;
    Ok(max_deviation(traj, &samples))
}

pub fn run(args: &RunArgs) -> Result<ExitCode> {
    let c = args.source.load()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let traj = match simulate(&c) {
        Ok(t) => t,
        Err(Error::MaxEventsExceeded { limit, partial }) => {
            write_trajectory(&args.out, &partial, &args.format, args.stride)?;
            bail!(
                "event limit of {limit} exceeded at t = {}; partial trajectory written (raise QCL_MAX_EVENTS)",
                partial.end_time()
            );
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory(&args.out, &traj, &args.format, args.stride)?;
    let mut rep = report(&traj, &c.schedule);
    if args.oracle {
        rep.oracle_max_deviation = Some(oracle_deviation(&c, &traj, args.oracle_eps, args.oracle_h)?);
    }
    let text = to_json_string(&rep)?;
    fs::write(args.out.join("report.json"), &text)?;
    print!("{text}");
    Ok(if rep.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub source: ScenarioArgs,
    /// Print JSON instead of plain text.
    #[arg(long)]
    pub json: bool,
}

#[derive(serde::Serialize)]
struct BoundOutput {
    bound: f64,
    spread: f64,
    n: usize,
    a_low: f64,
    a_high: f64,
    delta: f64,
}

pub fn bound(args: &BoundArgs) -> Result<ExitCode> {
    let c = args.source.load()?;
    let s = &c.schedule;
    if !s.has_time_invariant_topology() {
        bail!("bound requires time-invariant topology");
    }
    let Some(delta) = c.quantizer.delta() else {
        bail!("bound requires a uniform quantizer");
    };
    let levels: Vec<f64> = c.x0.iter().map(|&x| c.quantizer.quantize(x)).collect::<qcl_core::Result<_>>()?;
    let spread = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - levels.iter().copied().fold(f64::INFINITY, f64::min);
    let out = BoundOutput {
        bound: tcon_bound(s.a_low(), s.a_high(), &c.x0, &c.quantizer)?,
        spread,
        n: c.n(),
        a_low: s.a_low(),
        a_high: s.a_high(),
        delta,
    };
    if args.json {
        let stdout = std::io::stdout();
        write_json(stdout.lock(), &out)?;
        println!();
    } else {
        println!("bound {}", out.bound);
        println!("spread {}", out.spread);
    }
    Ok(ExitCode::SUCCESS)
}
