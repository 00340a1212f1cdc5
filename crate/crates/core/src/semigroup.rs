//! Spectral propagators for e^{tL} and e^{−tA} with Gaussian μ, together with
//! the resolvent of −A, ergodic means and the long-time projection.
//!
//! Everything acts on the finite truncation carried by the input. Because
//! e^{−tA} damps mode α by e^{−|α|²t}, truncation error only shrinks in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::SpectralFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub state: SpectralFunction,
    pub time: f64,
    /// ∫ e^{−tA}f dμ, equal to the Ĥ_0 coefficient of `state`.
    pub conserved_mean: f64,
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// e^{tL}: c_α ↦ e^{−|α|t} c_α.
pub fn evolve_l(s: &SpectralFunction, t: f64) -> Result<SpectralFunction> {
    check_time(t)?;
    Ok(s.map_modes(|a| (-(a.order() as f64) * t).exp()))
}

/// e^{−tA}: c_α ↦ e^{−|α|²t} c_α.
pub fn evolve_a(s: &SpectralFunction, t: f64) -> Result<EvolutionResult> {
    check_time(t)?;
    let state = s.map_modes(|a| (-(a.order() as f64).powi(2) * t).exp());
    let conserved_mean = state.mean();
    Ok(EvolutionResult { state, time: t, conserved_mean })
}

/// lim_{t→∞} e^{−tA}f = ∫ f dμ.
pub fn asymptotic_projection(s: &SpectralFunction) -> SpectralFunction {
    s.map_modes(|a| if a.order() == 0 { 1.0 } else { 0.0 })
}

/// R(λ, −A): c_α ↦ c_α/(λ + |α|²).
pub fn resolvent_a(s: &SpectralFunction, lambda: f64) -> Result<SpectralFunction> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("resolvent needs lambda > 0, got {lambda}")));
    }
    Ok(s.map_modes(|a| 1.0 / (lambda + (a.order() as f64).powi(2))))
}

/// t⁻¹∫₀ᵗ e^{−sA}f ds.
pub fn ergodic_average(s: &SpectralFunction, t: f64) -> Result<SpectralFunction> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("ergodic average needs t > 0, got {t}")));
    }
    Ok(s.map_modes(|a| {
        let k2 = (a.order() as f64).powi(2);
        if k2 == 0.0 {
            1.0
        } else {
            -(-k2 * t).exp_m1() / (t * k2)
        }
    }))
}
