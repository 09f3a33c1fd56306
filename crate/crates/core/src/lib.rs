//! Exact analysis of discrete-time population models of pulse-coupled
//! oscillators with broadcast failures.
//!
//! A [`ModelParams`] fixes the population. [`dtmc::build_dtmc`] explores the
//! reachable global states and annotates every transition with elapsed time
//! and energy. [`analysis`] then computes the probability of reaching a
//! phase-coherence target and the expected time or energy spent on the way.

pub mod analysis;
pub mod dtmc;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod params;
pub mod state;

pub use dtmc::{
    build_dtmc, BuildLimits, DtmcModel, HardwareProfile, InitialMode, RestabilisationSpec,
};
pub use error::{Error, Result};
pub use params::{ModelParams, PerceptionRule, Phase, PhaseResponse};
pub use state::{FailureVector, GlobalState};
