use thiserror::Error;

/// Errors produced anywhere in model construction and analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unknown phase response function {0:?} (built-in: \"linear-ms\")")]
    UnknownResponse(String),

    #[error("unknown perception rule {0:?} (expected \"initiators\" or \"cascade\")")]
    UnknownPerception(String),

    #[error("state {state} has {found} oscillators, model has N={expected}")]
    PopulationMismatch {
        state: String,
        expected: u32,
        found: u32,
    },

    #[error("state {0} has the wrong number of phases")]
    PhaseCountMismatch(String),

    #[error("state {0} is a firing state")]
    FiringState(String),

    #[error("state {0} is not a firing state")]
    NonFiringState(String),

    #[error("failure vector {vector} is inconsistent with state {state} at phase {phase}")]
    InconsistentFailureVector {
        state: String,
        vector: String,
        phase: u32,
    },

    #[error("restabilisation requires 1 <= U < N (got U={u}, N={n})")]
    RestabilisationRange { u: u32, n: u32 },

    #[error("invalid continuous configuration: {0}")]
    InvalidConfiguration(String),

    #[error("order parameter gradient is singular (f = {0:e})")]
    SingularGradient(f64),

    #[error("invalid hardware profile: {0}")]
    InvalidProfile(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("model exceeds resource limit: {states} states, {transitions} transitions")]
    ResourceLimit { states: usize, transitions: usize },

    #[error(
        "iterative solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
