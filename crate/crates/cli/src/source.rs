//! Scenario selection shared by the subcommands: a JSON file or a named
//! builder with parameters.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use qcl_core::scenarios::{line_ramp, slow_chain, random_connected, RandomScenarioParams};
use qcl_core::{ScenarioConfig, SelectionPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builder {
    LineRamp,
    SlowChain,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Sliding,
    SequentialSlow,
    /// Keep the overrides the scenario defines.
    FixedAlpha,
}

impl PolicyArg {
    pub fn name(self) -> &'static str {
        match self {
            PolicyArg::Sliding => "sliding",
            PolicyArg::SequentialSlow => "sequential_slow",
            PolicyArg::FixedAlpha => "fixed_alpha",
        }
    }
}

/// Builder parameters that do not vary across a sweep.
#[derive(Debug, Clone, Args)]
pub struct FixedParams {
    /// Extra-edge density for the random builder.
    #[arg(long, default_value_t = 0.3)]
    pub density: f64,
    /// Random builder: mirror every edge with equal weight.
    #[arg(long)]
    pub symmetric: bool,
    /// Override the selection policy.
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Safety limit on emitted events.
    #[arg(long, env = "QCL_MAX_EVENTS")]
    pub max_events: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "builder", required_unless_present = "builder")]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub builder: Option<Builder>,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub fixed: FixedParams,
}

/// One point of the builder parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub seed: u64,
}

pub fn build(builder: Builder, cell: &Cell, fixed: &FixedParams) -> Result<ScenarioConfig> {
    let c = match builder {
        Builder::LineRamp => line_ramp(cell.n, cell.delta)?,
        Builder::SlowChain => slow_chain(cell.n, cell.a, cell.b)?,
        Builder::Random => {
            let (lo, hi) = if cell.a <= cell.b { (cell.a, cell.b) } else { (cell.b, cell.a) };
            random_connected(&RandomScenarioParams {
                n: cell.n,
                seed: cell.seed,
                edge_density: fixed.density,
                weight_range: (lo, hi),
                a_low: lo,
                a_high: hi,
                delta: cell.delta,
                x0_spread: 4.0 * cell.delta,
                symmetric: fixed.symmetric,
                ..Default::default()
            })?
        }
    };
    apply(c, fixed)
}

fn apply(mut c: ScenarioConfig, fixed: &FixedParams) -> Result<ScenarioConfig> {
    match fixed.policy {
        None | Some(PolicyArg::FixedAlpha) if matches!(c.policy, SelectionPolicy::FixedAlpha { .. }) => {}
        None => {}
        Some(PolicyArg::FixedAlpha) => bail!("fixed-alpha needs a scenario that defines alpha overrides"),
        Some(PolicyArg::Sliding) => c.policy = SelectionPolicy::Sliding,
        Some(PolicyArg::SequentialSlow) => c.policy = SelectionPolicy::SequentialSlow,
    }
    if let Some(h) = fixed.horizon {
        c.horizon = h;
    }
    if let Some(m) = fixed.max_events {
        c.max_events = m;
    }
    c.validate()?;
    Ok(c)
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<ScenarioConfig> {
        match (&self.scenario, self.builder) {
            (Some(path), _) => {
                let text =
                    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let c = ScenarioConfig::from_json(&text)
                    .with_context(|| format!("invalid scenario {}", path.display()))?;
                apply(c, &self.fixed)
            }
            (None, Some(builder)) => {
                let cell = Cell { n: self.n, delta: self.delta, a: self.a, b: self.b, seed: self.seed };
                build(builder, &cell, &self.fixed)
            }
            (None, None) => bail!("give --scenario or --builder"),
        }
    }
}
