use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use qcl_core::analysis::{
    average_conservation, convergence_time, envelopes, limit_value_check, tcon_bound, LimitVerdict,
    AVERAGE_DRIFT_TOL,
};
use qcl_core::io::trajectory_from_json;
use qcl_core::scenarios::{line_ramp, slow_chain, random_connected, RandomScenarioParams};
use qcl_core::{simulate, GraphSchedule, QuantizerSpec, ScenarioConfig, SelectionPolicy, WeightedDigraph};

use crate::commands::oracle_deviation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Envelope,
    Bounds,
    Conservation,
    Oracle,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Run only these suites (repeatable or comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub suite: Vec<Suite>,
    /// Extra scenario JSON files or directories for the simulation suites.
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// Trajectory JSON files added to the envelope suite.
    #[arg(long)]
    pub trajectory: Vec<PathBuf>,
}

fn corpus_files(paths: &[PathBuf]) -> Result<Vec<(String, ScenarioConfig)>> {
    let mut out = Vec::new();
    for p in paths {
        let mut files = Vec::new();
        if p.is_dir() {
            for e in fs::read_dir(p).with_context(|| format!("reading {}", p.display()))? {
                let path = e?.path();
                if path.extension().is_some_and(|x| x == "json") {
                    files.push(path);
                }
            }
            files.sort();
        } else {
            files.push(p.clone());
        }
        for f in files {
            let text = fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
            let c = ScenarioConfig::from_json(&text).with_context(|| format!("invalid scenario {}", f.display()))?;
            out.push((f.display().to_string(), c));
        }
    }
    Ok(out)
}

fn builtin_corpus() -> Vec<(String, ScenarioConfig)> {
    let mut v = Vec::new();
    for n in 3..=6 {
        v.push((format!("line-ramp n={n}"), line_ramp(n, 1.0).unwrap()));
        v.push((format!("slow-chain n={n}"), slow_chain(n, 1.0, 1.0).unwrap()));
    }
    for seed in 0..40 {
        let p = RandomScenarioParams { n: 2 + seed as usize % 5, seed, ..Default::default() };
        v.push((format!("random seed={seed}"), random_connected(&p).unwrap()));
    }
    v
}

fn balanced_corpus() -> Vec<(String, ScenarioConfig)> {
    (0..40)
        .map(|seed| {
            let p = RandomScenarioParams {
                n: 2 + seed as usize % 5,
                seed: 500 + seed,
                symmetric: true,
                ..Default::default()
            };
            (format!("balanced seed={}", p.seed), random_connected(&p).unwrap())
        })
        .collect()
}

fn line_reference(x0: Vec<f64>) -> ScenarioConfig {
    let n = x0.len();
    let g = WeightedDigraph::from_edges(n, (0..n - 1).flat_map(|i| [(i, i + 1, 1.0), (i + 1, i, 1.0)])).unwrap();
    let s = GraphSchedule::constant(g, 1.0, 1.0).unwrap();
    ScenarioConfig::new(s, QuantizerSpec::uniform(1.0).unwrap(), x0).unwrap()
}

fn oracle_corpus() -> Vec<(String, ScenarioConfig)> {
    let mut v = vec![
        ("line n=2".to_string(), line_reference(vec![0.0, 1.0])),
        ("line n=3".to_string(), line_reference(vec![0.0, 1.0, 2.0])),
        ("line n=4".to_string(), line_reference(vec![0.0, 1.0, 2.0, 3.0])),
    ];
    for n in [3, 4] {
        let mut c = slow_chain(n, 1.0, 1.0).unwrap();
        c.policy = SelectionPolicy::Sliding;
        v.push((format!("slow-chain n={n}"), c));
    }
    v
}

fn envelope_suite(extra: &[(String, ScenarioConfig)], fixtures: &[PathBuf]) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    for (name, c) in builtin_corpus().iter().chain(extra) {
        let tr = simulate(c).with_context(|| name.clone())?;
        let env = envelopes(&tr);
        if !env.ok() {
            failures.push(format!("{name}: violation at {:?}", env.first_violation));
        }
    }
    for f in fixtures {
        let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        let tr = trajectory_from_json(&text).with_context(|| format!("invalid trajectory {}", f.display()))?;
        let env = envelopes(&tr);
        if !env.ok() {
            failures.push(format!("{}: violation at {:?}", f.display(), env.first_violation));
        }
    }
    Ok(failures)
}

fn bounds_suite(extra: &[(String, ScenarioConfig)]) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    for (name, c) in builtin_corpus().iter().chain(extra) {
        if !c.schedule.has_time_invariant_topology() || !c.quantizer.is_uniform() {
            continue;
        }
        let tr = simulate(c).with_context(|| name.clone())?;
        let bound = tcon_bound(c.schedule.a_low(), c.schedule.a_high(), &c.x0, &c.quantizer)?;
        match convergence_time(&tr) {
            Some(conv) if conv.t_con <= bound => {}
            Some(conv) => failures.push(format!("{name}: t_con {} > bound {bound}", conv.t_con)),
            None => failures.push(format!("{name}: did not converge")),
        }
    }
    Ok(failures)
}

fn conservation_suite(extra: &[(String, ScenarioConfig)]) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    let balanced = extra
        .iter()
        .filter(|(_, c)| c.schedule.is_weight_balanced(qcl_core::graphkit::BALANCE_TOL))
        .cloned();
    for (name, c) in balanced_corpus().into_iter().chain(balanced) {
        let tr = simulate(&c).with_context(|| name.clone())?;
        let drift = average_conservation(&tr);
        if drift > AVERAGE_DRIFT_TOL {
            failures.push(format!("{name}: average drift {drift}"));
        }
        if let LimitVerdict::Fail(why) = limit_value_check(&tr, &c.schedule) {
            failures.push(format!("{name}: {why}"));
        }
    }
    Ok(failures)
}

fn oracle_suite() -> Result<Vec<String>> {
    let mut failures = Vec::new();
    for (name, c) in oracle_corpus() {
        let tr = simulate(&c)?;
        let dev = oracle_deviation(&c, &tr, 1e-3, 1e-5)?;
        if dev > 5e-3 {
            failures.push(format!("{name}: deviation {dev}"));
        }
    }
    Ok(failures)
}

pub fn check(args: &CheckArgs) -> Result<ExitCode> {
    let suites = if args.suite.is_empty() {
        vec![Suite::Envelope, Suite::Bounds, Suite::Conservation, Suite::Oracle]
    } else {
        args.suite.clone()
    };
    let extra = corpus_files(&args.corpus)?;
    let mut all_ok = true;
    for suite in suites {
        let (name, failures) = match suite {
            Suite::Envelope => ("envelope", envelope_suite(&extra, &args.trajectory)?),
            Suite::Bounds => ("bounds", bounds_suite(&extra)?),
            Suite::Conservation => ("conservation", conservation_suite(&extra)?),
            Suite::Oracle => ("oracle", oracle_suite()?),
        };
        if failures.is_empty() {
            println!("suite {name}: PASS");
        } else {
            all_ok = false;
            println!("suite {name}: FAIL ({} failures)", failures.len());
            for f in failures {
                println!("  {f}");
            }
        }
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
