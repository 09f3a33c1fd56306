//! Reachability probabilities and expected accumulated rewards to a phase
//! coherence target, aggregated over the initial distribution.

mod montecarlo;
mod solver;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub use montecarlo::{monte_carlo, MonteCarloConfig, MonteCarloEstimate, Start};
pub use solver::{Solver, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, DENSE_LIMIT};

use crate::dtmc::{DtmcModel, Transition};
use crate::error::{Error, Result};
use crate::metrics::phase_coherence;
use crate::state::GlobalState;

/// States with reach probability below `1 − INFINITY_THRESHOLD` accumulate
/// unbounded reward.
pub const INFINITY_THRESHOLD: f64 = 1e-6;

/// Slack when comparing a state's phase coherence against λ, so that states
/// whose coherence equals λ exactly are not lost to rounding.
pub const TARGET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardKind {
    Time,
    Power,
}

impl RewardKind {
    pub fn id(self) -> &'static str {
        match self {
            RewardKind::Time => "time",
            RewardKind::Power => "power",
        }
    }

    #[inline]
    pub fn of(self, tr: &Transition) -> f64 {
        match self {
            RewardKind::Time => tr.time,
            RewardKind::Power => tr.power,
        }
    }
}

impl FromStr for RewardKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(RewardKind::Time),
            "power" => Ok(RewardKind::Power),
            _ => Err(Error::InvalidQuery(format!("unknown reward kind {s:?}"))),
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregate {
    Min,
    Avg,
    Max,
}

impl Aggregate {
    pub fn id(self) -> &'static str {
        match self {
            Aggregate::Min => "min",
            Aggregate::Avg => "avg",
            Aggregate::Max => "max",
        }
    }
}

impl FromStr for Aggregate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Aggregate::Min),
            "avg" => Ok(Aggregate::Avg),
            "max" => Ok(Aggregate::Max),
            _ => Err(Error::InvalidQuery(format!("unknown aggregate {s:?}"))),
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisQuery {
    pub lambda: f64,
    pub reward: RewardKind,
    pub aggregate: Aggregate,
    pub solver: Solver,
}

impl AnalysisQuery {
    pub fn new(lambda: f64, reward: RewardKind, aggregate: Aggregate) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(AnalysisQuery {
            lambda,
            reward,
            aggregate,
            solver: Solver::default(),
        })
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidQuery(format!(
            "lambda must lie in [0, 1] (got {lambda})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisResult {
    /// Expected accumulated reward (cycles or Watt-hours), possibly `+∞`.
    pub value: f64,
    pub reach_probability: f64,
    /// `value / N` in milliwatt-hours, for power queries.
    pub per_node_mwh: Option<f64>,
    pub states_explored: usize,
    pub transitions: usize,
    pub solve_iterations: usize,
    pub wall_time: Duration,
}

#[inline]
pub fn in_target(sigma: &GlobalState, lambda: f64) -> bool {
    phase_coherence(sigma) >= lambda - TARGET_SLACK
}

/// `B_λ = {σ : PCF(σ) ≥ λ}` as a membership mask.
pub fn target_set(model: &DtmcModel, lambda: f64) -> Vec<bool> {
    model
        .states()
        .iter()
        .map(|s| in_target(s, lambda))
        .collect()
}

fn predecessors(model: &DtmcModel) -> Vec<Vec<usize>> {
    let mut pred = vec![Vec::new(); model.num_states()];
    for s in 0..model.num_states() {
        for tr in model.transitions(s) {
            pred[tr.target].push(s);
        }
    }
    pred
}

/// States from which some path reaches the target.
pub fn can_reach(model: &DtmcModel, target: &[bool]) -> Vec<bool> {
    let pred = predecessors(model);
    let mut seen = target.to_vec();
    let mut stack: Vec<usize> = (0..target.len()).filter(|&i| target[i]).collect();
    while let Some(s) = stack.pop() {
        for &q in &pred[s] {
            if !seen[q] {
                seen[q] = true;
                stack.push(q);
            }
        }
    }
    seen
}

/// States that reach the target with probability exactly one: those that
/// cannot, while avoiding the target, reach a state that misses it.
pub fn almost_sure(model: &DtmcModel, target: &[bool]) -> Vec<bool> {
    let reach = can_reach(model, target);
    let pred = predecessors(model);
    let mut bad: Vec<bool> = reach.iter().map(|r| !r).collect();
    let mut stack: Vec<usize> = (0..bad.len()).filter(|&i| bad[i]).collect();
    while let Some(s) = stack.pop() {
        for &q in &pred[s] {
            if !bad[q] && !target[q] {
                bad[q] = true;
                stack.push(q);
            }
        }
    }
    bad.iter().map(|b| !b).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachSolution {
    pub probabilities: Vec<f64>,
    pub iterations: usize,
}

/// Probability of eventually entering the target from every state.
pub fn reach_probability(
    model: &DtmcModel,
    target: &[bool],
    solver: Solver,
) -> Result<ReachSolution> {
    let reach = can_reach(model, target);
    let unknowns: Vec<usize> = (0..model.num_states())
        .filter(|&s| reach[s] && !target[s])
        .collect();
    let pos = positions(model.num_states(), &unknowns);
    let b: Vec<f64> = unknowns
        .iter()
        .map(|&s| {
            model
                .transitions(s)
                .iter()
                .filter(|tr| target[tr.target])
                .map(|tr| tr.probability)
                .sum()
        })
        .collect();
    let sol = solver::solve(model, &unknowns, &pos, &[b], solver)?;
    let mut probabilities: Vec<f64> = target.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    for (&s, &x) in unknowns.iter().zip(&sol.values[0]) {
        probabilities[s] = x.clamp(0.0, 1.0);
    }
    Ok(ReachSolution {
        probabilities,
        iterations: sol.iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSolution {
    pub kind: RewardKind,
    /// Per-state expected reward; `+∞` where the target is missed with
    /// positive probability.
    pub values: Vec<f64>,
    pub iterations: usize,
}

fn positions(n: usize, unknowns: &[usize]) -> Vec<Option<usize>> {
    let mut pos = vec![None; n];
    for (j, &s) in unknowns.iter().enumerate() {
        pos[s] = Some(j);
    }
    pos
}

/// Expected reward accumulated until the target is entered.
pub fn expected_reward(
    model: &DtmcModel,
    target: &[bool],
    kind: RewardKind,
    solver: Solver,
) -> Result<RewardSolution> {
    Ok(expected_rewards(model, target, &[kind], solver)?.remove(0))
}

/// [`expected_reward`] for several reward kinds sharing one factorisation.
pub fn expected_rewards(
    model: &DtmcModel,
    target: &[bool],
    kinds: &[RewardKind],
    solver: Solver,
) -> Result<Vec<RewardSolution>> {
    let sure = almost_sure(model, target);
    let unknowns: Vec<usize> = (0..model.num_states())
        .filter(|&s| sure[s] && !target[s])
        .collect();
    let pos = positions(model.num_states(), &unknowns);
    let rhs: Vec<Vec<f64>> = kinds
        .iter()
        .map(|&kind| {
            unknowns
                .iter()
                .map(|&s| {
                    model
                        .transitions(s)
                        .iter()
                        .map(|tr| tr.probability * kind.of(tr))
                        .sum()
                })
                .collect()
        })
        .collect();
    let sol = solver::solve(model, &unknowns, &pos, &rhs, solver)?;
    Ok(kinds
        .iter()
        .zip(sol.values)
        .map(|(&kind, x)| {
            let mut values: Vec<f64> = (0..model.num_states())
                .map(|s| if target[s] { 0.0 } else { f64::INFINITY })
                .collect();
            for (&s, v) in unknowns.iter().zip(x) {
                values[s] = v.max(0.0);
            }
            RewardSolution {
                kind,
                values,
                iterations: sol.iterations,
            }
        })
        .collect())
}

/// min / avg / max of per-state values over the initial distribution.
///
/// The reported reach probability is the smallest over the support for
/// avg and max, and the largest for min, i.e. the one deciding finiteness.
pub fn aggregate(
    model: &DtmcModel,
    values: &[f64],
    reach: &[f64],
    kind: RewardKind,
    agg: Aggregate,
) -> AnalysisResult {
    let support = model.initial().iter().filter(|&&(_, w)| w > 0.0);
    let (value, reach_probability) = match agg {
        Aggregate::Avg => support.fold((0.0, 1.0f64), |(v, r), &(s, w)| {
            let term = if values[s].is_infinite() {
                f64::INFINITY
            } else {
                w * values[s]
            };
            (v + term, r.min(reach[s]))
        }),
        Aggregate::Max => support.fold((0.0f64, 1.0f64), |(v, r), &(s, _)| {
            (v.max(values[s]), r.min(reach[s]))
        }),
        Aggregate::Min => support.fold((f64::INFINITY, 0.0f64), |(v, r), &(s, _)| {
            (v.min(values[s]), r.max(reach[s]))
        }),
    };
    let per_node_mwh =
        (kind == RewardKind::Power).then(|| value / f64::from(model.params().n) * 1000.0);
    AnalysisResult {
        value,
        reach_probability,
        per_node_mwh,
        states_explored: model.num_states(),
        transitions: model.num_transitions(),
        solve_iterations: 0,
        wall_time: Duration::ZERO,
    }
}

/// Answers one query.
pub fn analyze(model: &DtmcModel, query: &AnalysisQuery) -> Result<AnalysisResult> {
    Ok(analyze_many(
        model,
        query.lambda,
        &[(query.reward, query.aggregate)],
        query.solver,
    )?
    .remove(0))
}

/// Answers several (reward, aggregate) queries against one target, solving
/// each reward kind once.
pub fn analyze_many(
    model: &DtmcModel,
    lambda: f64,
    queries: &[(RewardKind, Aggregate)],
    solver: Solver,
) -> Result<Vec<AnalysisResult>> {
    check_lambda(lambda)?;
    let started = Instant::now();
    let target = target_set(model, lambda);
    let reach = reach_probability(model, &target, solver)?;
    let mut kinds: Vec<RewardKind> = Vec::new();
    for (k, _) in queries {
        if !kinds.contains(k) {
            kinds.push(*k);
        }
    }
    let rewards = expected_rewards(model, &target, &kinds, solver)?;
    let wall_time = started.elapsed();
    Ok(queries
        .iter()
        .map(|&(kind, agg)| {
            let sol = rewards
                .iter()
                .find(|r| r.kind == kind)
                .expect("solved above");
            AnalysisResult {
                solve_iterations: reach.iterations.max(sol.iterations),
                wall_time,
                ..aggregate(model, &sol.values, &reach.probabilities, kind, agg)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtmc::{build_dtmc, BuildLimits, HardwareProfile, InitialMode};
    use crate::params::ModelParams;

    fn model(n: u32, t: u32, r: u32, eps: f64, mu: f64) -> DtmcModel {
        let p = ModelParams::new(n, t, r, eps, mu).unwrap();
        build_dtmc(
            &p,
            &HardwareProfile::micaz(),
            InitialMode::Full,
            BuildLimits::default(),
        )
        .unwrap()
    }

    fn value(m: &DtmcModel, lambda: f64, kind: RewardKind, agg: Aggregate, solver: Solver) -> f64 {
        let q = AnalysisQuery::new(lambda, kind, agg)
            .unwrap()
            .with_solver(solver);
        analyze(m, &q).unwrap().value
    }

    #[test]
    fn single_step_chain() {
        // (1,1) fires straight into (2,0)
        let m = model(2, 2, 0, 0.5, 0.0);
        let target = target_set(&m, 1.0);
        let e = expected_reward(&m, &target, RewardKind::Time, Solver::Exact).unwrap();
        let mixed = m.index_of(&"(1,1)".parse().unwrap()).unwrap();
        assert_eq!(e.values[mixed], 0.5);
        assert_eq!(
            value(&m, 1.0, RewardKind::Time, Aggregate::Avg, Solver::Exact),
            0.25
        );
    }

    #[test]
    fn hand_solved_deterministic_chain() {
        // (1,1,0) skips to (0,1,1) [1/3], which fires into (2,0,0) [1/3];
        // (1,0,1) fires into (1,1,0) [1/3].
        let m = model(2, 3, 1, 0.5, 0.0);
        let target = target_set(&m, 1.0);
        let e = expected_reward(&m, &target, RewardKind::Time, Solver::Exact).unwrap();
        for (s, v) in [
            ("(1,1,0)", 2.0 / 3.0),
            ("(0,1,1)", 1.0 / 3.0),
            ("(1,0,1)", 1.0),
            ("(0,2,0)", 0.0),
        ] {
            let i = m.index_of(&s.parse().unwrap()).unwrap();
            assert!((e.values[i] - v).abs() < 1e-12, "{s}: {}", e.values[i]);
        }
        let avg = value(&m, 1.0, RewardKind::Time, Aggregate::Avg, Solver::Exact);
        assert!((avg - 4.0 / 9.0).abs() < 1e-12);
        assert!(
            (value(&m, 1.0, RewardKind::Time, Aggregate::Max, Solver::Exact) - 1.0).abs() < 1e-12
        );
        assert_eq!(
            value(&m, 1.0, RewardKind::Time, Aggregate::Min, Solver::Exact),
            0.0
        );
    }

    #[test]
    fn target_sets() {
        let m = model(8, 10, 1, 0.1, 0.2);
        assert!(target_set(&m, 0.0).iter().all(|&b| b));
        let b1 = target_set(&m, 1.0);
        let sync: Vec<usize> = (0..m.num_states()).filter(|&i| b1[i]).collect();
        assert_eq!(sync.len(), 10);
        assert!(sync.iter().all(|&i| m.state(i).is_synchronised()));
        let s1 = m
            .index_of(&"(0,0,0,0,0,2,1,0,0,5)".parse().unwrap())
            .unwrap();
        assert!(!target_set(&m, 0.5)[s1]);
        assert!(target_set(&m, 0.46)[s1]);
    }

    #[test]
    fn exact_and_iterative_agree() {
        for (n, t, r) in [(6, 8, 2), (5, 10, 3)] {
            let m = model(n, t, r, 0.1, 0.2);
            let target = target_set(&m, 0.9);
            let kinds = [RewardKind::Time, RewardKind::Power];
            let exact = expected_rewards(&m, &target, &kinds, Solver::Exact).unwrap();
            let iter = expected_rewards(&m, &target, &kinds, Solver::iterative()).unwrap();
            assert!(iter[0].iterations > 0);
            for (a, b) in exact.iter().zip(&iter) {
                for (x, y) in a.values.iter().zip(&b.values) {
                    if x.is_infinite() {
                        assert_eq!(x, y);
                    } else {
                        assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300), "{x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let m = model(4, 6, 1, 0.1, 0.2);
        let target = target_set(&m, 1.0);
        let solver = Solver::Iterative {
            tolerance: 1e-15,
            max_iterations: 2,
        };
        assert!(matches!(
            expected_reward(&m, &target, RewardKind::Time, solver),
            Err(Error::NotConverged { iterations: 2, .. })
        ));
    }

    #[test]
    fn infinity_exactly_where_target_can_be_missed() {
        let m = model(4, 6, 3, 0.1, 0.2);
        let target = target_set(&m, 1.0);
        let reach = reach_probability(&m, &target, Solver::Exact).unwrap();
        let e = expected_reward(&m, &target, RewardKind::Time, Solver::Exact).unwrap();
        assert!(reach
            .probabilities
            .iter()
            .any(|&x| x < 1.0 - INFINITY_THRESHOLD));
        for (x, v) in reach.probabilities.iter().zip(&e.values) {
            assert_eq!(
                v.is_infinite(),
                *x < 1.0 - INFINITY_THRESHOLD,
                "reach {x} value {v}"
            );
        }
        let r = analyze(
            &m,
            &AnalysisQuery::new(1.0, RewardKind::Power, Aggregate::Avg).unwrap(),
        )
        .unwrap();
        assert!(r.value.is_infinite() && r.reach_probability < 1.0);
        assert_eq!(r.per_node_mwh, Some(f64::INFINITY));
    }

    #[test]
    fn lambda_validated() {
        assert!(AnalysisQuery::new(1.5, RewardKind::Time, Aggregate::Avg).is_err());
        assert!(AnalysisQuery::new(-0.1, RewardKind::Time, Aggregate::Avg).is_err());
        assert!("energy".parse::<RewardKind>().is_err());
        assert_eq!("power".parse::<RewardKind>(), Ok(RewardKind::Power));
        assert_eq!("max".parse::<Aggregate>(), Ok(Aggregate::Max));
    }
}
