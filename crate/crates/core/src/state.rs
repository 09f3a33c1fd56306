//! Global states (oscillator counts per phase) and failure vectors.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::{ModelParams, Phase};

/// Counts `⟨k₁,…,k_T⟩` of oscillators per phase value.
///
/// Ordering is the canonical enumeration order used for state indices:
/// tuples compare lexicographically with *larger* leading counts first, so
/// for N=2, T=2 the order is ⟨2,0⟩, ⟨1,1⟩, ⟨0,2⟩.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GlobalState(Box<[u32]>);

impl GlobalState {
    pub fn new(counts: impl Into<Box<[u32]>>) -> Self {
        GlobalState(counts.into())
    }

    /// Builds a state and checks it against the model's `T` and `N`.
    pub fn for_model(counts: impl Into<Box<[u32]>>, p: &ModelParams) -> Result<Self> {
        let s = GlobalState::new(counts);
        s.check(p)?;
        Ok(s)
    }

    /// All `n` oscillators at phase `phi`.
    pub fn synchronised(n: u32, t: u32, phi: Phase) -> Self {
        let mut counts = vec![0; t as usize];
        counts[(phi - 1) as usize] = n;
        GlobalState::new(counts)
    }

    pub fn check(&self, p: &ModelParams) -> Result<()> {
        if self.0.len() != p.t as usize {
            return Err(Error::PhaseCountMismatch(self.to_string()));
        }
        let found = self.population();
        if found != p.n {
            return Err(Error::PopulationMismatch {
                state: self.to_string(),
                expected: p.n,
                found,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    /// Number of oscillators at (1-based) phase `phi`.
    #[inline]
    pub fn count(&self, phi: Phase) -> u32 {
        self.0[(phi - 1) as usize]
    }

    #[inline]
    pub fn phases(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn population(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `k_T > 0`.
    #[inline]
    pub fn is_firing(&self) -> bool {
        self.0.last().is_some_and(|&k| k > 0)
    }

    pub fn is_synchronised(&self) -> bool {
        self.0.iter().filter(|&&k| k > 0).count() <= 1
    }

    /// Highest occupied phase (δ), or `None` for an empty tuple.
    pub fn max_phase(&self) -> Option<Phase> {
        self.0.iter().rposition(|&k| k > 0).map(|i| i as Phase + 1)
    }

    /// Largest group size `max_Φ k_Φ`.
    pub fn largest_group(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Every occupied phase advanced by `offset`, wrapping modulo `T`.
    pub fn rotated(&self, offset: u32) -> GlobalState {
        let t = self.0.len();
        let mut out = vec![0; t];
        for (i, &k) in self.0.iter().enumerate() {
            out[(i + offset as usize) % t] = k;
        }
        GlobalState::new(out)
    }
}

impl Ord for GlobalState {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.cmp(&self.0)
    }
}

impl PartialOrd for GlobalState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GlobalState{self}")
    }
}

/// Parses `(k1,...,kT)`; the parentheses are optional.
impl FromStr for GlobalState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let counts = inner
            .split(',')
            .map(|x| x.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidParams(format!("cannot parse state {s:?}: {e}")))?;
        Ok(GlobalState::new(counts))
    }
}

/// Per-phase broadcast failures of one firing step; `None` is the ⋆ entry
/// for a phase whose oscillators did not fire.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FailureVector(Box<[Option<u32>]>);

impl FailureVector {
    pub fn new(entries: impl Into<Box<[Option<u32>]>>) -> Self {
        FailureVector(entries.into())
    }

    /// Zero failures for every fired phase in `fired`, ⋆ elsewhere.
    pub fn zero_failures(fired: &[bool]) -> Self {
        FailureVector::new(fired.iter().map(|&f| f.then_some(0)).collect::<Vec<_>>())
    }

    #[inline]
    pub fn entries(&self) -> &[Option<u32>] {
        &self.0
    }

    #[inline]
    pub fn get(&self, phi: Phase) -> Option<u32> {
        self.0[(phi - 1) as usize]
    }

    pub fn phases(&self) -> u32 {
        self.0.len() as u32
    }
}

impl fmt::Display for FailureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match e {
                Some(v) => write!(f, "{v}")?,
                None => f.write_str("*")?,
            }
        }
        f.write_str(")")
    }
}

impl fmt::Debug for FailureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FailureVector{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicates() {
        let s: GlobalState = "(0,0,0,0,0,2,1,0,0,5)".parse().unwrap();
        assert!(s.is_firing());
        assert!(!s.is_synchronised());
        assert_eq!(s.max_phase(), Some(10));
        assert_eq!(s.population(), 8);
        let s0: GlobalState = "2,1,0,0,5,0,0,0,0,0".parse().unwrap();
        assert!(!s0.is_firing());
        assert_eq!(s0.max_phase(), Some(5));
        assert!(GlobalState::synchronised(8, 10, 3).is_synchronised());
    }

    #[test]
    fn canonical_order() {
        let mut v: Vec<GlobalState> = ["(0,2)", "(2,0)", "(1,1)"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        v.sort();
        assert_eq!(
            v.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            ["(2,0)", "(1,1)", "(0,2)"]
        );
    }

    #[test]
    fn check_against_model() {
        let p = ModelParams::new(3, 3, 0, 0.1, 0.0).unwrap();
        assert!(GlobalState::for_model(vec![1, 1, 1], &p).is_ok());
        assert!(matches!(
            GlobalState::for_model(vec![1, 1], &p),
            Err(Error::PhaseCountMismatch(_))
        ));
        assert!(matches!(
            GlobalState::for_model(vec![1, 1, 0], &p),
            Err(Error::PopulationMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn failure_vector_display() {
        let f = FailureVector::new(vec![None, Some(0), Some(3)]);
        assert_eq!(f.to_string(), "(*,0,3)");
        assert_eq!(f.get(3), Some(3));
    }
}
