//! Phase coherence of global states and the continuous order parameter.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::Phase;
use crate::state::GlobalState;

/// Gradient evaluation refuses configurations with `f` below this.
pub const GRADIENT_SINGULARITY: f64 = 1e-9;

/// Position `e^{iθ_Φ}` of phase `phi` on the unit circle, `θ_Φ = 2π(Φ−1)/T`.
pub fn phase_position(phi: Phase, t: u32) -> Complex64 {
    Complex64::from_polar(1.0, phase_angle(phi, t))
}

#[inline]
pub fn phase_angle(phi: Phase, t: u32) -> f64 {
    TAU * f64::from(phi - 1) / f64::from(t)
}

/// Magnitude of the mean phase position. Exactly 1 for synchronised states.
pub fn phase_coherence(sigma: &GlobalState) -> f64 {
    if sigma.is_synchronised() {
        return 1.0;
    }
    let t = sigma.phases();
    let n = f64::from(sigma.population());
    let sum: Complex64 = sigma
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| phase_position(i as Phase + 1, t) * f64::from(k))
        .sum();
    (sum.norm() / n).clamp(0.0, 1.0)
}

/// Real phases `θ_j ∈ [0, 2π]` of `N ≥ 1` oscillators.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousConfig {
    thetas: Vec<f64>,
}

impl ContinuousConfig {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidConfiguration("no oscillators".into()));
        }
        if let Some(bad) = thetas.iter().find(|th| !(0.0..=TAU).contains(*th)) {
            return Err(Error::InvalidConfiguration(format!(
                "phase {bad} outside [0, 2π]"
            )));
        }
        Ok(ContinuousConfig { thetas })
    }

    /// `k_Φ` oscillators at `θ_Φ` for every phase of `sigma`.
    pub fn from_state(sigma: &GlobalState) -> Self {
        let t = sigma.phases();
        let thetas = sigma
            .counts()
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| std::iter::repeat_n(phase_angle(i as Phase + 1, t), k as usize))
            .collect();
        ContinuousConfig { thetas }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

/// Root-sum-square of the mean cosine and mean sine.
pub fn order_parameter(c: &ContinuousConfig) -> f64 {
    let n = c.len() as f64;
    let (cos, sin) = c
        .thetas()
        .iter()
        .fold((0.0, 0.0), |(a, b), th| (a + th.cos(), b + th.sin()));
    (((cos / n).powi(2) + (sin / n).powi(2)).sqrt()).min(1.0)
}

/// `N + 2 Σ_{i>j} cos(θ_i − θ_j)`, i.e. `N²f²`.
fn pairwise_radicand(thetas: &[f64]) -> f64 {
    let mut acc = thetas.len() as f64;
    for (i, a) in thetas.iter().enumerate() {
        for b in &thetas[..i] {
            acc += 2.0 * (a - b).cos();
        }
    }
    acc.max(0.0)
}

/// Order parameter through the pairwise-cosine closed form.
pub fn order_parameter_pairwise(c: &ContinuousConfig) -> f64 {
    (pairwise_radicand(c.thetas()).sqrt() / c.len() as f64).min(1.0)
}

/// Partial derivatives `∂f/∂θ_k = Σ_{i≠k} sin(θ_i − θ_k) / (N·√(N + 2ΣΣcos(θ_i − θ_j)))`.
pub fn order_parameter_gradient(c: &ContinuousConfig) -> Result<Vec<f64>> {
    let f = order_parameter(c);
    if f < GRADIENT_SINGULARITY {
        return Err(Error::SingularGradient(f));
    }
    let thetas = c.thetas();
    let denom = thetas.len() as f64 * pairwise_radicand(thetas).sqrt();
    Ok(thetas
        .iter()
        .enumerate()
        .map(|(k, &tk)| {
            let s: f64 = thetas
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &ti)| (ti - tk).sin())
                .sum();
            s / denom
        })
        .collect())
}

/// Infimum of the order parameter over configurations confined to one arc
/// of width `2π/T`.
///
/// The minimising configuration splits the oscillators between the two arc
/// endpoints, so it suffices to scan the split `m`.
pub fn r_min(n: u32, t: u32) -> f64 {
    let edge = Complex64::from_polar(1.0, TAU / f64::from(t));
    (0..=n)
        .map(|m| {
            (Complex64::new(f64::from(m), 0.0) + edge * f64::from(n - m)).norm() / f64::from(n)
        })
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}
