//! DTMC construction: state enumeration, initial distributions, reward
//! structures and the reachable transition graph.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use rayon::prelude::*;

use crate::dynamics::successor_distribution;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::state::GlobalState;

/// Weak compositions of `n` into `t` parts in canonical order.
#[derive(Debug, Clone)]
pub struct Compositions {
    next: Option<Vec<u32>>,
}

impl Compositions {
    pub fn new(n: u32, t: u32) -> Self {
        let next = (t > 0).then(|| {
            let mut c = vec![0; t as usize];
            c[0] = n;
            c
        });
        Compositions { next }
    }
}

impl Iterator for Compositions {
    type Item = GlobalState;

    fn next(&mut self) -> Option<GlobalState> {
        let current = self.next.take()?;
        let t = current.len();
        if t >= 2 {
            if let Some(i) = (0..t - 1).rev().find(|&i| current[i] > 0) {
                let mut c = current.clone();
                let tail: u32 = c[i + 1..].iter().sum();
                c[i] -= 1;
                c[i + 1] = tail + 1;
                c[i + 2..].iter_mut().for_each(|x| *x = 0);
                self.next = Some(c);
            }
        }
        Some(GlobalState::new(current))
    }
}

/// Iterator over Γ for the model, in canonical order.
pub fn enumerate_states(p: &ModelParams) -> Compositions {
    Compositions::new(p.n, p.t)
}

/// `|Γ| = C(N+T−1, T−1)`, `None` on overflow.
pub fn state_count(n: u32, t: u32) -> Option<u128> {
    binomial_u128(u128::from(n) + u128::from(t) - 1, u128::from(t) - 1)
}

fn binomial_u128(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of phase assignments to distinguishable oscillators that produce
/// `sigma`; `None` on overflow.
pub fn multinomial(sigma: &GlobalState) -> Option<u128> {
    let mut total: u128 = 0;
    let mut acc: u128 = 1;
    for &k in sigma.counts() {
        for j in 1..=u128::from(k) {
            total += 1;
            acc = acc.checked_mul(total)? / j;
        }
    }
    Some(acc)
}

/// Multinomial coefficient in floating point (exact while below 2^53).
pub fn multinomial_f64(sigma: &GlobalState) -> f64 {
    let mut total = 0.0;
    let mut acc = 1.0;
    for &k in sigma.counts() {
        for j in 1..=k {
            total += 1.0;
            acc *= total / f64::from(j);
        }
    }
    acc.round()
}

/// Current draws and timing of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    pub name: String,
    /// Idle current in amperes.
    pub idle_a: f64,
    /// Receive current in amperes.
    pub receive_a: f64,
    /// Transmit current in amperes.
    pub transmit_a: f64,
    pub voltage_v: f64,
    /// Length of one oscillation cycle, seconds.
    pub cycle_s: f64,
    /// Time to transmit one synchronisation message, seconds.
    pub message_s: f64,
}

impl HardwareProfile {
    /// MICAz mote at 3.0 V with a 1 s cycle and 1 ms messages.
    pub fn micaz() -> Self {
        HardwareProfile {
            name: "micaz".into(),
            idle_a: 20e-6,
            receive_a: 19.7e-3,
            transmit_a: 17.4e-3,
            voltage_v: 3.0,
            cycle_s: 1.0,
            message_s: 1e-3,
        }
    }

    pub fn validate(self) -> Result<Self> {
        let fields = [
            ("idle_a", self.idle_a),
            ("receive_a", self.receive_a),
            ("transmit_a", self.transmit_a),
            ("voltage_v", self.voltage_v),
            ("cycle_s", self.cycle_s),
            ("message_s", self.message_s),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProfile(format!(
                    "{name} must be positive (got {v})"
                )));
            }
        }
        Ok(self)
    }

    /// Per-step Watt-hour costs for a cycle split into `t` phases.
    pub fn energies(&self, t: u32) -> StepEnergies {
        let steps = 3600.0 * f64::from(t);
        StepEnergies {
            idle_wh: self.idle_a * self.voltage_v * self.cycle_s / steps,
            receive_wh: self.receive_a * self.voltage_v * self.cycle_s / steps,
            transmit_wh: self.transmit_a * self.voltage_v * self.message_s / 3600.0,
        }
    }
}

/// `W_I`, `W_R` (one node, one discrete step) and `W_T` (one message).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEnergies {
    pub idle_wh: f64,
    pub receive_wh: f64,
    pub transmit_wh: f64,
}

/// Energy drawn by the network during one step in `sigma`: idle inside the
/// refractory interval, receive outside it.
pub fn state_power(sigma: &GlobalState, r: u32, e: &StepEnergies) -> f64 {
    sigma
        .counts()
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            f64::from(k)
                * if (i as u32) < r {
                    e.idle_wh
                } else {
                    e.receive_wh
                }
        })
        .sum()
}

/// Energy drawn while a non-firing state advances to the next firing state.
///
/// Step `j` of the skip places the group at `Φ` on phase `Φ + j`; groups
/// whose shifted phase leaves the refractory window switch to receive mode.
pub fn skip_power(sigma: &GlobalState, r: u32, e: &StepEnergies) -> f64 {
    let t = i64::from(sigma.phases());
    let Some(delta) = sigma.max_phase() else {
        return 0.0;
    };
    let delta = i64::from(delta);
    let r = i64::from(r);
    let k = |phi: i64| f64::from(sigma.counts()[(phi - 1) as usize]);
    let mut total = 0.0;
    for j in 0..(t - delta) {
        let idle: f64 = (1..=(r - j)).map(k).sum();
        let receive: f64 = (((r + 1) - j).max(1)..=delta).map(k).sum();
        total += idle * e.idle_wh + receive * e.receive_wh;
    }
    total
}

/// `U` oscillators with arbitrary phases in an otherwise synchronised
/// network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestabilisationSpec {
    u: u32,
}

impl RestabilisationSpec {
    pub fn new(u: u32, n: u32) -> Result<Self> {
        if u < 1 || u >= n {
            return Err(Error::RestabilisationRange { u, n });
        }
        Ok(RestabilisationSpec { u })
    }

    pub fn u(self) -> u32 {
        self.u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialMode {
    /// Every configuration, weighted by its multinomial count.
    #[default]
    Full,
    /// Configurations where at least `N − U` oscillators share a phase.
    Restabilisation(RestabilisationSpec),
}

impl InitialMode {
    pub fn u(self) -> Option<u32> {
        match self {
            InitialMode::Full => None,
            InitialMode::Restabilisation(spec) => Some(spec.u()),
        }
    }
}

impl fmt::Display for InitialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialMode::Full => f.write_str("full"),
            InitialMode::Restabilisation(s) => write!(f, "restabilisation(U={})", s.u()),
        }
    }
}

/// Γ_U: states with some `k_i ≥ N − U`, in canonical order.
pub fn restabilisation_support(
    p: &ModelParams,
    spec: RestabilisationSpec,
) -> Result<Vec<GlobalState>> {
    let u = spec.u();
    if u >= p.n {
        return Err(Error::RestabilisationRange { u, n: p.n });
    }
    let mut out = std::collections::BTreeSet::new();
    for rest in Compositions::new(u, p.t) {
        for i in 0..p.t as usize {
            let mut counts = rest.counts().to_vec();
            counts[i] += p.n - u;
            out.insert(GlobalState::new(counts));
        }
    }
    Ok(out.into_iter().collect())
}

/// Initial distribution over configured states, normalised multinomial
/// weights over the mode's support.
pub fn initial_distribution(p: &ModelParams, mode: InitialMode) -> Result<Vec<(GlobalState, f64)>> {
    let support: Vec<GlobalState> = match mode {
        InitialMode::Full => enumerate_states(p).collect(),
        InitialMode::Restabilisation(spec) => restabilisation_support(p, spec)?,
    };
    let weights: Vec<f64> = support.iter().map(multinomial_f64).collect();
    let total: f64 = match mode {
        InitialMode::Full => f64::from(p.t).powi(p.n as i32),
        InitialMode::Restabilisation(_) => weights.iter().sum(),
    };
    Ok(support
        .into_iter()
        .zip(weights)
        .map(|(s, w)| (s, w / total))
        .collect())
}

/// One outgoing transition with its rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub target: usize,
    pub probability: f64,
    /// Oscillation cycles elapsed.
    pub time: f64,
    /// Network energy in Watt-hours.
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildLimits {
    pub max_states: usize,
    pub max_transitions: usize,
}

impl Default for BuildLimits {
    fn default() -> Self {
        BuildLimits {
            max_states: 2_000_000,
            max_transitions: 50_000_000,
        }
    }
}

/// Reachable fragment of the DTMC with its initial distribution.
///
/// The unconfigured initial state is implicit in `initial`: leaving it costs
/// no reward. States are stored in canonical order.
#[derive(Debug, Clone)]
pub struct DtmcModel {
    params: ModelParams,
    profile: HardwareProfile,
    mode: InitialMode,
    energies: StepEnergies,
    states: Vec<GlobalState>,
    index: HashMap<GlobalState, usize>,
    initial: Vec<(usize, f64)>,
    row_start: Vec<usize>,
    transitions: Vec<Transition>,
}

impl DtmcModel {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn profile(&self) -> &HardwareProfile {
        &self.profile
    }

    pub fn mode(&self) -> InitialMode {
        self.mode
    }

    pub fn energies(&self) -> &StepEnergies {
        &self.energies
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn states(&self) -> &[GlobalState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &GlobalState {
        &self.states[i]
    }

    pub fn index_of(&self, sigma: &GlobalState) -> Option<usize> {
        self.index.get(sigma).copied()
    }

    /// Outgoing transitions of state `i`, sorted by target.
    pub fn transitions(&self, i: usize) -> &[Transition] {
        &self.transitions[self.row_start[i]..self.row_start[i + 1]]
    }

    /// `(state index, probability)` pairs of the initial distribution.
    pub fn initial(&self) -> &[(usize, f64)] {
        &self.initial
    }
}

struct Expanded {
    targets: Vec<(GlobalState, f64, f64, f64)>,
}

fn expand(sigma: &GlobalState, p: &ModelParams, e: &StepEnergies) -> Result<Expanded> {
    let dist = successor_distribution(sigma, p)?;
    let t = f64::from(p.t);
    let targets = if sigma.is_firing() {
        let base = state_power(sigma, p.r, e);
        dist.branches
            .into_iter()
            .map(|b| {
                let power = base + f64::from(b.target.count(1)) * e.transmit_wh;
                (b.target, b.probability, 1.0 / t, power)
            })
            .collect()
    } else {
        let delta = sigma.max_phase().unwrap_or(p.t);
        let time = f64::from(p.t - delta) / t;
        let power = skip_power(sigma, p.r, e);
        dist.branches
            .into_iter()
            .map(|b| (b.target, b.probability, time, power))
            .collect()
    };
    Ok(Expanded { targets })
}

/// Breadth-first closure of the initial support under the successor
/// relation, annotated with time and power rewards.
pub fn build_dtmc(
    p: &ModelParams,
    profile: &HardwareProfile,
    mode: InitialMode,
    limits: BuildLimits,
) -> Result<DtmcModel> {
    let p = p.validate()?;
    let profile = profile.clone().validate()?;
    if mode == InitialMode::Full {
        let count = state_count(p.n, p.t).unwrap_or(u128::MAX);
        if count > limits.max_states as u128 {
            return Err(Error::ResourceLimit {
                states: usize::try_from(count).unwrap_or(usize::MAX),
                transitions: 0,
            });
        }
    }
    let energies = profile.energies(p.t);
    let init = initial_distribution(&p, mode)?;

    let mut index: HashMap<GlobalState, usize> = HashMap::new();
    let mut discovered: Vec<GlobalState> = Vec::new();
    let mut frontier: VecDeque<usize> = VecDeque::new();
    for (s, _) in &init {
        if !index.contains_key(s) {
            index.insert(s.clone(), discovered.len());
            frontier.push_back(discovered.len());
            discovered.push(s.clone());
        }
    }

    let mut rows: Vec<Vec<Transition>> = vec![Vec::new(); discovered.len()];
    let mut transitions_total = 0usize;
    while !frontier.is_empty() {
        let layer: Vec<usize> = frontier.drain(..).collect();
        let expanded: Vec<Result<Expanded>> = layer
            .par_iter()
            .map(|&i| expand(&discovered[i], &p, &energies))
            .collect();
        for (&src, exp) in layer.iter().zip(expanded) {
            let exp = exp?;
            let mut row = Vec::with_capacity(exp.targets.len());
            for (target, probability, time, power) in exp.targets {
                let dst = match index.get(&target) {
                    Some(&d) => d,
                    None => {
                        let d = discovered.len();
                        index.insert(target.clone(), d);
                        discovered.push(target);
                        rows.push(Vec::new());
                        frontier.push_back(d);
                        d
                    }
                };
                row.push(Transition {
                    target: dst,
                    probability,
                    time,
                    power,
                });
            }
            transitions_total += row.len();
            rows[src] = row;
        }
        if discovered.len() > limits.max_states || transitions_total > limits.max_transitions {
            return Err(Error::ResourceLimit {
                states: discovered.len(),
                transitions: transitions_total,
            });
        }
    }

    // canonical renumbering
    let mut order: Vec<usize> = (0..discovered.len()).collect();
    order.sort_by(|&a, &b| discovered[a].cmp(&discovered[b]));
    let mut rank = vec![0usize; order.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let mut states = Vec::with_capacity(order.len());
    let mut row_start = Vec::with_capacity(order.len() + 1);
    let mut transitions = Vec::with_capacity(transitions_total);
    row_start.push(0);
    for &old in &order {
        states.push(discovered[old].clone());
        let mut row: Vec<Transition> = rows[old]
            .iter()
            .map(|tr| Transition {
                target: rank[tr.target],
                ..*tr
            })
            .collect();
        row.sort_by_key(|tr| tr.target);
        transitions.extend(row);
        row_start.push(transitions.len());
    }
    let mut initial: Vec<(usize, f64)> = init.iter().map(|(s, w)| (rank[index[s]], *w)).collect();
    initial.sort_by_key(|&(i, _)| i);
    let index = states
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();

    Ok(DtmcModel {
        params: p,
        profile,
        mode,
        energies,
        states,
        index,
        initial,
        row_start,
        transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(s: &str) -> GlobalState {
        s.parse().unwrap()
    }

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn canonical_order_small() {
        let p = ModelParams::new(2, 2, 0, 0.5, 0.0).unwrap();
        let all: Vec<_> = enumerate_states(&p).map(|s| s.to_string()).collect();
        assert_eq!(all, ["(2,0)", "(1,1)", "(0,2)"]);
        let p = ModelParams::new(1, 3, 0, 0.5, 0.0).unwrap();
        assert_eq!(enumerate_states(&p).count(), 3);
    }

    #[test]
    fn counts_match_stars_and_bars() {
        for n in 1..=8u32 {
            for t in 2..=6u32 {
                let expected = binomial(u64::from(n + t - 1), u64::from(t - 1));
                assert_eq!(state_count(n, t), Some(u128::from(expected)));
            }
        }
        let p = ModelParams::new(8, 10, 1, 0.1, 0.2).unwrap();
        let states: Vec<_> = enumerate_states(&p).collect();
        assert_eq!(states.len(), 24310);
        assert!(states.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn multinomial_identity() {
        let p = ModelParams::new(5, 4, 1, 0.1, 0.2).unwrap();
        let total: u128 = enumerate_states(&p).map(|s| multinomial(&s).unwrap()).sum();
        assert_eq!(total, 4u128.pow(5));
        assert_eq!(multinomial(&st("(2,1,0,0,5,0,0,0,0,0)")), Some(168));
    }

    #[test]
    fn initial_distributions() {
        let p = ModelParams::new(2, 2, 0, 0.5, 0.0).unwrap();
        let d = initial_distribution(&p, InitialMode::Full).unwrap();
        let w: Vec<f64> = d.iter().map(|(_, w)| *w).collect();
        assert_eq!(w, [0.25, 0.5, 0.25]);

        let p = ModelParams::new(4, 2, 0, 0.5, 0.0).unwrap();
        let spec = RestabilisationSpec::new(1, 4).unwrap();
        let d = initial_distribution(&p, InitialMode::Restabilisation(spec)).unwrap();
        let support: Vec<String> = d.iter().map(|(s, _)| s.to_string()).collect();
        assert_eq!(support, ["(4,0)", "(3,1)", "(1,3)", "(0,4)"]);
        let w: Vec<f64> = d.iter().map(|(_, w)| w * 10.0).collect();
        for (a, b) in w.iter().zip([1.0, 4.0, 4.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(RestabilisationSpec::new(4, 4).is_err());
        assert!(RestabilisationSpec::new(0, 4).is_err());
    }

    #[test]
    fn micaz_step_energies() {
        let e = HardwareProfile::micaz().energies(10);
        assert!((e.idle_wh - 20e-6 * 3.0 / 36000.0).abs() < 1e-20);
        assert!((e.idle_wh - 1.6667e-9).abs() < 1e-13);
        assert!((e.transmit_wh - 17.4e-3 * 3.0 * 1e-3 / 3600.0).abs() < 1e-20);
    }

    #[test]
    fn profile_validation() {
        let mut bad = HardwareProfile::micaz();
        bad.cycle_s = 0.0;
        assert!(matches!(bad.validate(), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn synchronised_cycle_rewards() {
        let (n, t, r) = (3u32, 5u32, 2u32);
        let p = ModelParams::new(n, t, r, 0.2, 0.3).unwrap();
        let profile = HardwareProfile::micaz();
        let e = profile.energies(t);
        let model = build_dtmc(&p, &profile, InitialMode::Full, BuildLimits::default()).unwrap();
        let mut s = model.index_of(&GlobalState::synchronised(n, t, 1)).unwrap();
        let (mut time, mut power) = (0.0, 0.0);
        loop {
            let out = model.transitions(s);
            assert_eq!(out.len(), 1);
            time += out[0].time;
            power += out[0].power;
            s = out[0].target;
            if model.state(s).count(1) == n {
                break;
            }
        }
        assert!((time - 1.0).abs() < 1e-12);
        let n = f64::from(n);
        let expected =
            n * (f64::from(r) * e.idle_wh + f64::from(t - r) * e.receive_wh) + n * e.transmit_wh;
        assert!((power - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn built_model_is_stochastic_and_canonical() {
        let p = ModelParams::new(4, 5, 1, 0.3, 0.4).unwrap();
        let model = build_dtmc(
            &p,
            &HardwareProfile::micaz(),
            InitialMode::Full,
            BuildLimits::default(),
        )
        .unwrap();
        assert!(model.states().windows(2).all(|w| w[0] < w[1]));
        for i in 0..model.num_states() {
            let out = model.transitions(i);
            let mass: f64 = out.iter().map(|t| t.probability).sum();
            assert!((mass - 1.0).abs() < 1e-12);
            assert!(out.windows(2).all(|w| w[0].target < w[1].target));
            for tr in out {
                assert!(tr.time > 0.0 && tr.time <= 1.0);
                assert!(tr.power >= 0.0);
            }
        }
        let init: f64 = model.initial().iter().map(|(_, w)| w).sum();
        assert!((init - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resource_limit_reported() {
        let p = ModelParams::new(8, 10, 1, 0.1, 0.2).unwrap();
        let limits = BuildLimits {
            max_states: 1000,
            ..BuildLimits::default()
        };
        assert!(matches!(
            build_dtmc(&p, &HardwareProfile::micaz(), InitialMode::Full, limits),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
