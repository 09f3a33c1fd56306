//! Parameter resolution and the exact-analysis sweep.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pcosync_core::analysis::{
    analyze_many, expected_rewards, reach_probability, target_set, Aggregate, RewardKind, Solver,
    DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};
use pcosync_core::dtmc::state_count;
use pcosync_core::{
    build_dtmc, BuildLimits, DtmcModel, GlobalState, HardwareProfile, InitialMode, ModelParams,
    PerceptionRule, RestabilisationSpec,
};
use rayon::prelude::*;

use crate::args::{AnalyzeArgs, ModelArgs};
use crate::config::ConfigFile;
use crate::values::{num, parse_f64_list, parse_u32_list};
use crate::{csv_writer, profile};

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
    "aggregate",
    "value",
    "per_node_mWh",
    "reach_probability",
    "states",
    "transitions",
    "wall_ms",
];

pub const DEFAULT_QUERIES: [(RewardKind, Aggregate); 4] = [
    (RewardKind::Time, Aggregate::Avg),
    (RewardKind::Time, Aggregate::Max),
    (RewardKind::Power, Aggregate::Avg),
    (RewardKind::Power, Aggregate::Max),
];

/// One model to build.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub params: ModelParams,
    pub mode: InitialMode,
}

/// The cross product of all model parameters, plus settings shared by
/// every point.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    pub n: Vec<u32>,
    pub t: Vec<u32>,
    pub r: Vec<u32>,
    pub eps: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub u: Vec<Option<u32>>,
    pub profile: HardwareProfile,
    pub perception: PerceptionRule,
    pub limits: BuildLimits,
    pub output: Option<PathBuf>,
}

fn list_u32(cfg: &ConfigFile, key: &str, flags: &[String], default: &str) -> Result<Vec<u32>> {
    let specs = cfg.merged(key, flags);
    if specs.is_empty() {
        return parse_u32_list(default);
    }
    let mut out = Vec::new();
    for s in specs {
        out.extend(parse_u32_list(s).with_context(|| format!("--{key}"))?);
    }
    Ok(out)
}

fn list_f64(cfg: &ConfigFile, key: &str, flags: &[String], default: &str) -> Result<Vec<f64>> {
    let specs = cfg.merged(key, flags);
    if specs.is_empty() {
        return parse_f64_list(default);
    }
    let mut out = Vec::new();
    for s in specs {
        out.extend(parse_f64_list(s).with_context(|| format!("--{key}"))?);
    }
    Ok(out)
}

pub(crate) fn scalar<T: std::str::FromStr>(
    cfg: &ConfigFile,
    key: &str,
    flag: Option<T>,
) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg
            .scalar(key)
            .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("`{key}`: {e}")))
            .transpose(),
    }
}

pub fn load_config(args: &ModelArgs) -> Result<ConfigFile> {
    match &args.config {
        Some(path) => ConfigFile::load(path),
        None => Ok(ConfigFile::default()),
    }
}

impl ModelSpace {
    pub fn resolve(args: &ModelArgs, cfg: &ConfigFile) -> Result<Self> {
        let u = list_u32(cfg, "u", &args.u, "0")?;
        let u = if cfg.merged("u", &args.u).is_empty() {
            vec![None]
        } else {
            u.into_iter().map(Some).collect()
        };
        let profile_name =
            scalar(cfg, "profile", args.profile.clone())?.unwrap_or_else(|| "micaz".into());
        let mut hw = profile::resolve(&profile_name, args.profile_dir.as_deref())?;
        if let Some(c) = scalar(cfg, "cycle_s", args.cycle_s)? {
            hw.cycle_s = c;
        }
        if let Some(m) = scalar(cfg, "message_s", args.message_s)? {
            hw.message_s = m;
        }
        let hw = hw.validate()?;
        let perception = match scalar::<String>(cfg, "perception", args.perception.clone())? {
            Some(s) => s.parse()?,
            None => PerceptionRule::default(),
        };
        let mut limits = BuildLimits::default();
        if let Some(m) = scalar(cfg, "max_states", args.max_states)? {
            limits.max_states = m;
        }
        let lambda = list_f64(cfg, "lambda", &args.lambda, "1.0")?;
        if let Some(l) = lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            bail!("lambda must lie in [0, 1] (got {l})");
        }
        Ok(ModelSpace {
            n: list_u32(cfg, "n", &args.n, "8")?,
            t: list_u32(cfg, "t", &args.t, "10")?,
            r: list_u32(cfg, "r", &args.r, "1")?,
            eps: list_f64(cfg, "eps", &args.eps, "0.1")?,
            mu: list_f64(cfg, "mu", &args.mu, "0.2")?,
            lambda,
            u,
            profile: hw,
            perception,
            limits,
            output: scalar(cfg, "output", args.output.clone())?,
        })
    }

    /// Every point in N, T, R, ε, μ, U order, validated up front.
    pub fn points(&self) -> Result<Vec<Point>> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &t in &self.t {
                for &r in &self.r {
                    for &eps in &self.eps {
                        for &mu in &self.mu {
                            for &u in &self.u {
                                let params = ModelParams::new(n, t, r, eps, mu)?
                                    .with_perception(self.perception);
                                let mode = match u {
                                    None => InitialMode::Full,
                                    Some(u) => InitialMode::Restabilisation(
                                        RestabilisationSpec::new(u, n)?,
                                    ),
                                };
                                out.push(Point { params, mode });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Leading columns `N..profile` for a point.
pub fn key_columns(point: &Point, lambda: Option<f64>, profile: &str) -> Vec<String> {
    let p = &point.params;
    vec![
        p.n.to_string(),
        p.t.to_string(),
        p.r.to_string(),
        num(p.epsilon),
        num(p.mu),
        lambda.map(num).unwrap_or_default(),
        point.mode.u().map(|u| u.to_string()).unwrap_or_default(),
        profile.to_string(),
    ]
}

pub fn status_row(point: &Point, profile: &str, width: usize, message: &str) -> Vec<String> {
    let mut row = key_columns(point, None, profile);
    row.extend([
        "status".to_string(),
        "error".to_string(),
        message.to_string(),
    ]);
    row.resize(width, String::new());
    row
}

pub fn parse_query(s: &str) -> Result<(RewardKind, Aggregate)> {
    let Some((m, a)) = s.split_once(':') else {
        bail!("query `{s}` must look like metric:aggregate, e.g. power:avg");
    };
    Ok((m.trim().parse()?, a.trim().parse()?))
}

fn solver(args: &AnalyzeArgs, cfg: &ConfigFile) -> Result<Solver> {
    let name =
        scalar::<String>(cfg, "solver", args.solver.clone())?.unwrap_or_else(|| "exact".into());
    let tolerance = scalar(cfg, "tolerance", args.tolerance)?;
    let max_iterations = scalar(cfg, "max_iterations", args.max_iterations)?;
    match name.as_str() {
        "exact" => {
            if tolerance.is_some() || max_iterations.is_some() {
                bail!("--tolerance and --max-iterations apply to the iterative solver only");
            }
            Ok(Solver::Exact)
        }
        "iterative" => {
            let tolerance = tolerance.unwrap_or(DEFAULT_TOLERANCE);
            if tolerance.is_nan() || tolerance <= 0.0 {
                bail!("tolerance must be positive (got {tolerance})");
            }
            Ok(Solver::Iterative {
                tolerance,
                max_iterations: max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
            })
        }
        other => bail!("unknown solver `{other}` (expected exact or iterative)"),
    }
}

/// Result of one query at one λ.
struct Answer {
    value: f64,
    per_node: Option<f64>,
    reach: f64,
}

pub fn parse_start(s: Option<&str>, points: &[Point]) -> Result<Option<GlobalState>> {
    let Some(s) = s else { return Ok(None) };
    let state: GlobalState = s.parse()?;
    for pt in points {
        state.check(&pt.params)?;
    }
    Ok(Some(state))
}

fn answers_from(
    model: &DtmcModel,
    lambda: f64,
    queries: &[(RewardKind, Aggregate)],
    solver: Solver,
    start: &GlobalState,
) -> Result<Vec<Answer>> {
    let idx = model
        .index_of(start)
        .with_context(|| format!("state {start} is not reachable in this model"))?;
    let target = target_set(model, lambda);
    let reach = reach_probability(model, &target, solver)?.probabilities[idx];
    let kinds = [RewardKind::Time, RewardKind::Power];
    let values = expected_rewards(model, &target, &kinds, solver)?;
    let n = f64::from(model.params().n);
    Ok(queries
        .iter()
        .map(|&(kind, _)| {
            let value = values[kinds
                .iter()
                .position(|k| *k == kind)
                .expect("both kinds solved")]
            .values[idx];
            Answer {
                value,
                per_node: (kind == RewardKind::Power).then(|| value / n * 1000.0),
                reach,
            }
        })
        .collect())
}

fn run_point(
    point: &Point,
    space: &ModelSpace,
    queries: &[(RewardKind, Aggregate)],
    solver: Solver,
    start: Option<&GlobalState>,
    timing: bool,
) -> Result<(Vec<Vec<String>>, usize)> {
    let started = Instant::now();
    let model = build_dtmc(&point.params, &space.profile, point.mode, space.limits)?;
    let build_ms = started.elapsed().as_secs_f64() * 1e3;
    let mut rows = Vec::new();
    for &lambda in &space.lambda {
        let solve_started = Instant::now();
        let answers = match start {
            Some(s) => answers_from(&model, lambda, queries, solver, s)?,
            None => analyze_many(&model, lambda, queries, solver)?
                .into_iter()
                .map(|r| Answer {
                    value: r.value,
                    per_node: r.per_node_mwh,
                    reach: r.reach_probability,
                })
                .collect(),
        };
        let wall_ms = build_ms + solve_started.elapsed().as_secs_f64() * 1e3;
        for (&(kind, agg), a) in queries.iter().zip(answers) {
            let mut row = key_columns(point, Some(lambda), &space.profile.name);
            row.extend([
                kind.id().to_string(),
                agg.id().to_string(),
                num(a.value),
                a.per_node.map(num).unwrap_or_default(),
                num(a.reach),
                model.num_states().to_string(),
                model.num_transitions().to_string(),
                if timing {
                    format!("{wall_ms:.3}")
                } else {
                    String::new()
                },
            ]);
            rows.push(row);
        }
    }
    Ok((rows, model.num_states()))
}

/// `analyze` and `restab`. Rows are written in parameter order; on the
/// first failing point the rows before it are kept, a status row is
/// appended and the error returned.
pub fn run_analyze(args: &AnalyzeArgs, restab: bool) -> Result<()> {
    let cfg = load_config(&args.model)?;
    let space = ModelSpace::resolve(&args.model, &cfg)?;
    if restab && space.u.iter().any(Option::is_none) {
        bail!("restab needs --u (number of desynchronised oscillators)");
    }
    let specs = cfg.merged("query", &args.query);
    let queries: Vec<(RewardKind, Aggregate)> = if specs.is_empty() {
        DEFAULT_QUERIES.to_vec()
    } else {
        specs
            .iter()
            .map(|s| parse_query(s))
            .collect::<Result<_>>()?
    };
    let solver = solver(args, &cfg)?;
    let points = space.points()?;
    let start = parse_start(args.start.as_deref(), &points)?;

    let results: Vec<Result<(Vec<Vec<String>>, usize)>> = points
        .par_iter()
        .map(|pt| run_point(pt, &space, &queries, solver, start.as_ref(), args.timing))
        .collect();

    let mut out = csv_writer(space.output.as_deref())?;
    out.write_record(HEADER)?;
    for (pt, res) in points.iter().zip(results) {
        match res {
            Ok((rows, states)) => {
                for row in rows {
                    out.write_record(&row)?;
                }
                if restab {
                    report_reduction(pt, states);
                }
            }
            Err(e) => {
                out.write_record(status_row(
                    pt,
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
    Ok(())
}

fn report_reduction(pt: &Point, states: usize) {
    let all =
        state_count(pt.params.n, pt.params.t).map_or("overflow".to_string(), |c| c.to_string());
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "N={} T={} U={}: {states} reachable states of {all} global states",
        pt.params.n,
        pt.params.t,
        pt.mode.u().unwrap_or(0)
    );
}
