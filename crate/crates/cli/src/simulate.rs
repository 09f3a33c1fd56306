//! The `simulate` command: Monte Carlo estimates in CSV form.

use std::io::Write;

use anyhow::Result;
use pcosync_core::analysis::{monte_carlo, MonteCarloConfig, RewardKind, Start};
use rayon::prelude::*;

use crate::args::SimulateArgs;
use crate::csv_writer;
use crate::sweep::{key_columns, load_config, parse_start, scalar, status_row, ModelSpace};
use crate::values::num;

pub const HEADER: [&str; 16] = [
    "N",
    "T",
    "R",
    "epsilon",
    "mu",
    "lambda",
    "U",
    "profile",
    "metric",
    "seed",
    "samples",
    "mean",
    "std_error",
    "max_observed",
    "per_node_mWh",
    "censored",
];

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = load_config(&args.model)?;
    let space = ModelSpace::resolve(&args.model, &cfg)?;
    let specs = cfg.merged("metric", &args.metric);
    let metrics: Vec<RewardKind> = if specs.is_empty() {
        vec![RewardKind::Time, RewardKind::Power]
    } else {
        specs.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };
    let samples = scalar(&cfg, "samples", args.samples)?.unwrap_or(DEFAULT_SAMPLES);
    let max_steps = scalar(&cfg, "max_steps", args.max_steps)?.unwrap_or(DEFAULT_MAX_STEPS);
    let points = space.points()?;
    let start = parse_start(args.start.as_deref(), &points)?;

    let mut jobs = Vec::new();
    for i in 0..points.len() {
        for &lambda in &space.lambda {
            for &reward in &metrics {
                jobs.push((i, lambda, reward));
            }
        }
    }
    let results: Vec<Result<Vec<String>>> = jobs
        .par_iter()
        .map(|&(i, lambda, reward)| {
            let pt = &points[i];
            let cfg = MonteCarloConfig {
                lambda,
                reward,
                samples,
                seed: args.seed,
                max_steps,
                start: match &start {
                    Some(s) => Start::State(s.clone()),
                    None => Start::Initial(pt.mode),
                },
            };
            let est = monte_carlo(&pt.params, &space.profile, &cfg)?;
            let mut row = key_columns(pt, Some(lambda), &space.profile.name);
            let per_node =
                (reward == RewardKind::Power).then(|| est.mean / f64::from(pt.params.n) * 1000.0);
            row.extend([
                reward.id().to_string(),
                args.seed.to_string(),
                est.samples.to_string(),
                num(est.mean),
                num(est.std_error),
                num(est.max_observed),
                per_node.map(num).unwrap_or_default(),
                est.censored.to_string(),
            ]);
            Ok(row)
        })
        .collect();

    let mut out = csv_writer(space.output.as_deref())?;
    out.write_record(HEADER)?;
    let mut censored = 0usize;
    for (&(i, _, _), res) in jobs.iter().zip(results) {
        match res {
            Ok(row) => {
                censored += row[15].parse::<usize>().unwrap_or(0);
                out.write_record(&row)?;
            }
            Err(e) => {
                out.write_record(status_row(
                    &points[i],
                    &space.profile.name,
                    HEADER.len(),
                    &format!("{e:#}"),
                ))?;
                out.flush()?;
                return Err(e);
            }
        }
    }
    out.flush()?;
    if censored > 0 {
        let _ = writeln!(
            std::io::stderr(),
            "warning: {censored} runs hit the {max_steps}-step cap; their means are biased low"
        );
    }
    Ok(())
}
