//! Model parameters and the per-oscillator response functions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Phase values are 1-based: an oscillator's phase lies in `1..=T`.
pub type Phase = u32;

/// Rounds to the nearest integer, ties away from zero.
///
/// Every perturbation passes through here, so swapping the tie rule is a
/// one-line change.
#[inline]
pub fn round_nearest(x: f64) -> u32 {
    debug_assert!(x >= 0.0);
    x.round() as u32
}

/// Family of phase response functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PhaseResponse {
    /// `Δ(Φ, α, ε) = [Φ·α·ε]`, linear in the phase and in the number of
    /// perceived firings.
    #[default]
    LinearMs,
}

impl PhaseResponse {
    pub const fn id(self) -> &'static str {
        match self {
            PhaseResponse::LinearMs => "linear-ms",
        }
    }

    pub fn perturbation(self, phi: Phase, alpha: u32, epsilon: f64) -> u32 {
        match self {
            PhaseResponse::LinearMs => perturbation(phi, alpha, epsilon),
        }
    }
}

impl FromStr for PhaseResponse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-ms" => Ok(PhaseResponse::LinearMs),
            other => Err(Error::UnknownResponse(other.to_string())),
        }
    }
}

impl fmt::Display for PhaseResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Which firing groups an oscillator perceives during a chain reaction.
///
/// With [`PerceptionRule::Initiators`] only the group that reached the end of
/// its cycle (phase `T`) perturbs the others; groups it absorbs fire in the
/// same step but their pulses are not counted again. This reproduces the
/// worked trajectory ⟨2,1,0,0,5,0,0,0,0,0⟩ ↠ ⟨0,0,0,0,0,2,1,0,0,5⟩ →
/// ⟨6,0,…,0,2⟩ → ⟨2,6,0,…,0⟩ for N=8, T=10, R=2, ε=0.1.
///
/// With [`PerceptionRule::Cascade`] every group that fires at a higher phase
/// contributes its successful broadcasts to the perceived count of lower
/// groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PerceptionRule {
    #[default]
    Initiators,
    Cascade,
}

impl PerceptionRule {
    pub const fn id(self) -> &'static str {
        match self {
            PerceptionRule::Initiators => "initiators",
            PerceptionRule::Cascade => "cascade",
        }
    }
}

impl FromStr for PerceptionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initiators" => Ok(PerceptionRule::Initiators),
            "cascade" => Ok(PerceptionRule::Cascade),
            other => Err(Error::UnknownPerception(other.to_string())),
        }
    }
}

impl fmt::Display for PerceptionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One population model: response function, population size `n`, phase
/// granularity `t`, refractory length `r`, coupling `epsilon` and broadcast
/// failure probability `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n: u32,
    pub t: u32,
    pub r: u32,
    pub epsilon: f64,
    pub mu: f64,
    pub response: PhaseResponse,
    pub perception: PerceptionRule,
}

impl ModelParams {
    /// Builds and validates a linear-response model with the default
    /// perception rule.
    pub fn new(n: u32, t: u32, r: u32, epsilon: f64, mu: f64) -> Result<Self> {
        ModelParams {
            n,
            t,
            r,
            epsilon,
            mu,
            response: PhaseResponse::LinearMs,
            perception: PerceptionRule::Initiators,
        }
        .validate()
    }

    pub fn with_perception(mut self, perception: PerceptionRule) -> Self {
        self.perception = perception;
        self
    }

    /// Checks every parameter bound, reporting the first violation.
    pub fn validate(self) -> Result<Self> {
        validate_params(self)
    }

    /// Perturbation after the refractory filter for a group at `phi`.
    #[inline]
    pub fn effective_perturbation(&self, phi: Phase, alpha: u32) -> u32 {
        refractory(
            phi,
            self.response.perturbation(phi, alpha, self.epsilon),
            self.r,
        )
    }

    #[inline]
    pub fn is_refractory(&self, phi: Phase) -> bool {
        phi >= 1 && phi <= self.r
    }
}

/// Returns `p` unchanged when `1 ≤ N`, `2 ≤ T`, `0 ≤ R < T`, `0 < ε` and
/// `0 ≤ μ ≤ 1`.
pub fn validate_params(p: ModelParams) -> Result<ModelParams> {
    if p.n < 1 {
        return Err(Error::InvalidParams(format!(
            "N must satisfy N ≥ 1 (got N={})",
            p.n
        )));
    }
    if p.t < 2 {
        return Err(Error::InvalidParams(format!(
            "T must satisfy T ≥ 2 (got T={})",
            p.t
        )));
    }
    if p.r >= p.t {
        return Err(Error::InvalidParams(format!(
            "R must satisfy 0 ≤ R < T (got R={}, T={})",
            p.r, p.t
        )));
    }
    if p.epsilon.is_nan() || p.epsilon <= 0.0 || !p.epsilon.is_finite() {
        return Err(Error::InvalidParams(format!(
            "epsilon must satisfy ε > 0 (got ε={})",
            p.epsilon
        )));
    }
    if !(0.0..=1.0).contains(&p.mu) {
        return Err(Error::InvalidParams(format!(
            "mu must satisfy 0 ≤ μ ≤ 1 (got μ={})",
            p.mu
        )));
    }
    Ok(p)
}

/// Linear phase response `[Φ·α·ε]`.
#[inline]
pub fn perturbation(phi: Phase, alpha: u32, epsilon: f64) -> u32 {
    round_nearest(f64::from(phi) * f64::from(alpha) * epsilon)
}

/// Zero inside the refractory interval `[1, R]`, `delta` outside it.
#[inline]
pub fn refractory(phi: Phase, delta: u32, r: u32) -> u32 {
    if phi >= 1 && phi <= r {
        0
    } else {
        delta
    }
}
