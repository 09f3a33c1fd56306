//! Successors of global states.
//!
//! A non-firing state jumps straight to the next firing state. A firing
//! state resolves its chain reaction once per failure vector: phases are
//! processed from `T` down to `1`, each group's perceived firing count is
//! built from the successful broadcasts of groups already processed, and a
//! group fires when its updated phase `Φ + 1 + ref(Φ, Δ(Φ, α, ε))` passes `T`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::params::{ModelParams, PerceptionRule, Phase};
use crate::state::{FailureVector, GlobalState};

/// Per-phase result of resolving one chain reaction. Vectors are indexed by
/// `phase - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainOutcome {
    pub fired: Vec<bool>,
    pub updated: Vec<u32>,
    pub perceived: Vec<u32>,
}

impl ChainOutcome {
    #[inline]
    pub fn fired(&self, phi: Phase) -> bool {
        self.fired[(phi - 1) as usize]
    }

    #[inline]
    pub fn updated(&self, phi: Phase) -> u32 {
        self.updated[(phi - 1) as usize]
    }

    #[inline]
    pub fn perceived(&self, phi: Phase) -> u32 {
        self.perceived[(phi - 1) as usize]
    }

    /// Phase transition function τ: where oscillators at `phi` end up.
    #[inline]
    pub fn next_phase(&self, phi: Phase) -> Phase {
        if self.fired(phi) {
            1
        } else {
            self.updated(phi)
        }
    }

    pub fn fired_phases(&self) -> Vec<Phase> {
        (1..=self.fired.len() as Phase)
            .filter(|&phi| self.fired(phi))
            .collect()
    }
}

/// One merged successor of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub target: GlobalState,
    pub probability: f64,
    /// Failure vectors leading to `target`; empty for a skip transition.
    pub witnesses: Vec<FailureVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorDistribution {
    pub source: GlobalState,
    /// Branches in canonical target order.
    pub branches: Vec<Branch>,
}

impl SuccessorDistribution {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

/// Running broadcast tallies while walking phases downward.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    /// Successful broadcasts of every fired group processed so far.
    all: u32,
    /// Successful broadcasts of the phase-`T` group.
    initiators: u32,
}

impl Tally {
    #[inline]
    fn perceived(self, rule: PerceptionRule) -> u32 {
        match rule {
            PerceptionRule::Initiators => self.initiators,
            PerceptionRule::Cascade => self.all,
        }
    }

    #[inline]
    fn record(self, phi: Phase, t: u32, successes: u32) -> Tally {
        Tally {
            all: self.all + successes,
            initiators: if phi == t { successes } else { self.initiators },
        }
    }
}

/// Updated phase and firing predicate of the group at `phi`.
#[inline]
fn group_update(p: &ModelParams, phi: Phase, perceived: u32) -> (u32, bool) {
    let updated = phi + 1 + p.effective_perturbation(phi, perceived);
    (updated, updated > p.t)
}

fn check_state(sigma: &GlobalState, p: &ModelParams) -> Result<()> {
    sigma.check(p)
}

/// Jumps a non-firing state to the next firing state, returning it and the
/// number of omitted single steps `T − δ`.
pub fn skip_successor(sigma: &GlobalState) -> Result<(GlobalState, u32)> {
    if sigma.is_firing() {
        return Err(Error::FiringState(sigma.to_string()));
    }
    let t = sigma.phases();
    let delta = sigma
        .max_phase()
        .ok_or_else(|| Error::InvalidParams(format!("state {sigma} is empty")))?;
    let skipped = t - delta;
    let mut counts = vec![0; t as usize];
    for (i, &k) in sigma.counts().iter().enumerate() {
        if k > 0 {
            counts[i + skipped as usize] = k;
        }
    }
    Ok((GlobalState::new(counts), skipped))
}

/// Resolves the chain reaction of a firing state under failure vector `f`.
pub fn resolve_chain(
    sigma: &GlobalState,
    f: &FailureVector,
    p: &ModelParams,
) -> Result<ChainOutcome> {
    check_state(sigma, p)?;
    if !sigma.is_firing() {
        return Err(Error::NonFiringState(sigma.to_string()));
    }
    if f.phases() != p.t {
        return Err(inconsistent(sigma, f, 0));
    }
    let t = p.t as usize;
    let mut out = ChainOutcome {
        fired: vec![false; t],
        updated: vec![0; t],
        perceived: vec![0; t],
    };
    let mut tally = Tally::default();
    for phi in (1..=p.t).rev() {
        let i = (phi - 1) as usize;
        let alpha = tally.perceived(p.perception);
        let (updated, fired) = group_update(p, phi, alpha);
        out.perceived[i] = alpha;
        out.updated[i] = updated;
        out.fired[i] = fired;
        let k = sigma.count(phi);
        match (fired, f.get(phi)) {
            (true, Some(failures)) if failures <= k => {
                tally = tally.record(phi, p.t, k - failures);
            }
            (false, None) => {}
            _ => return Err(inconsistent(sigma, f, phi)),
        }
    }
    Ok(out)
}

fn inconsistent(sigma: &GlobalState, f: &FailureVector, phase: Phase) -> Error {
    Error::InconsistentFailureVector {
        state: sigma.to_string(),
        vector: f.to_string(),
        phase,
    }
}

/// Every failure vector that some resolution of the chain reaction of
/// `sigma` can produce, in depth-first order (phase `T` outermost, fewer
/// failures first).
pub fn enumerate_failure_vectors(
    sigma: &GlobalState,
    p: &ModelParams,
) -> Result<Vec<FailureVector>> {
    check_state(sigma, p)?;
    if !sigma.is_firing() {
        return Err(Error::NonFiringState(sigma.to_string()));
    }
    let mut out = Vec::new();
    let mut entries = vec![None; p.t as usize];
    descend(sigma, p, p.t, Tally::default(), &mut entries, &mut out);
    Ok(out)
}

fn descend(
    sigma: &GlobalState,
    p: &ModelParams,
    phi: Phase,
    tally: Tally,
    entries: &mut [Option<u32>],
    out: &mut Vec<FailureVector>,
) {
    if phi == 0 {
        out.push(FailureVector::new(entries.to_vec()));
        return;
    }
    let i = (phi - 1) as usize;
    let (_, fired) = group_update(p, phi, tally.perceived(p.perception));
    let k = sigma.count(phi);
    if !fired {
        entries[i] = None;
        descend(sigma, p, phi - 1, tally, entries, out);
    } else {
        for failures in 0..=k {
            entries[i] = Some(failures);
            descend(
                sigma,
                p,
                phi - 1,
                tally.record(phi, p.t, k - failures),
                entries,
                out,
            );
        }
    }
    entries[i] = None;
}

/// Firing successor: oscillators at `Ψ` move to `τ(σ, Ψ, F)`.
pub fn firing_successor(
    sigma: &GlobalState,
    f: &FailureVector,
    p: &ModelParams,
) -> Result<GlobalState> {
    let outcome = resolve_chain(sigma, f, p)?;
    Ok(apply_outcome(sigma, &outcome))
}

fn apply_outcome(sigma: &GlobalState, outcome: &ChainOutcome) -> GlobalState {
    let mut counts = vec![0; sigma.phases() as usize];
    for phi in 1..=sigma.phases() {
        let k = sigma.count(phi);
        if k > 0 {
            counts[(outcome.next_phase(phi) - 1) as usize] += k;
        }
    }
    GlobalState::new(counts)
}

fn binomial(k: u32, f: u32) -> f64 {
    let f = f.min(k - f);
    (0..f).fold(1.0, |acc, i| acc * f64::from(k - i) / f64::from(i + 1))
}

/// Probability of exactly `f` failures among `k` independent broadcasts.
pub fn pmf(k: u32, f: u32, mu: f64) -> f64 {
    if f > k {
        return 0.0;
    }
    binomial(k, f) * mu.powi(f as i32) * (1.0 - mu).powi((k - f) as i32)
}

/// Probability of the failures recorded in `f` occurring in `sigma`.
pub fn pfv(sigma: &GlobalState, f: &FailureVector, mu: f64) -> f64 {
    f.entries()
        .iter()
        .zip(sigma.counts())
        .map(|(e, &k)| e.map_or(1.0, |failures| pmf(k, failures, mu)))
        .product()
}

/// All successors of `sigma` with merged probabilities.
pub fn successor_distribution(
    sigma: &GlobalState,
    p: &ModelParams,
) -> Result<SuccessorDistribution> {
    check_state(sigma, p)?;
    if !sigma.is_firing() {
        let (target, _) = skip_successor(sigma)?;
        return Ok(SuccessorDistribution {
            source: sigma.clone(),
            branches: vec![Branch {
                target,
                probability: 1.0,
                witnesses: Vec::new(),
            }],
        });
    }
    let mut merged: BTreeMap<GlobalState, (f64, Vec<FailureVector>)> = BTreeMap::new();
    for f in enumerate_failure_vectors(sigma, p)? {
        let weight = pfv(sigma, &f, p.mu);
        if weight <= 0.0 {
            continue;
        }
        let target = firing_successor(sigma, &f, p)?;
        let entry = merged.entry(target).or_insert((0.0, Vec::new()));
        entry.0 += weight;
        entry.1.push(f);
    }
    Ok(SuccessorDistribution {
        source: sigma.clone(),
        branches: merged
            .into_iter()
            .map(|(target, (probability, witnesses))| Branch {
                target,
                probability,
                witnesses,
            })
            .collect(),
    })
}

/// Draws one failure vector for a firing state, sampling each fired group's
/// failures from a binomial distribution in processing order.
pub fn sample_failure_vector<R: Rng + ?Sized>(
    sigma: &GlobalState,
    p: &ModelParams,
    rng: &mut R,
) -> Result<FailureVector> {
    if !sigma.is_firing() {
        return Err(Error::NonFiringState(sigma.to_string()));
    }
    let mut entries = vec![None; p.t as usize];
    let mut tally = Tally::default();
    for phi in (1..=p.t).rev() {
        let (_, fired) = group_update(p, phi, tally.perceived(p.perception));
        if !fired {
            continue;
        }
        let k = sigma.count(phi);
        let failures = match k {
            0 => 0,
            _ => Binomial::new(u64::from(k), p.mu)
                .map_err(|e| Error::InvalidParams(e.to_string()))?
                .sample(rng) as u32,
        };
        entries[(phi - 1) as usize] = Some(failures);
        tally = tally.record(phi, p.t, k - failures);
    }
    Ok(FailureVector::new(entries))
}
