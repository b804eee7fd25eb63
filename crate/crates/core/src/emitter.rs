//! A single driven two-level emitter acting as a saturable mirror.
//!
//! The emitter scatters at most about one photon per lifetime, so its power
//! reflectance drops as the impinging power `p` grows:
//!
//! ```text
//! R(p) = γ² / (γ² + 4δω² + 4pγ²)
//! θ    = arctan(2δω/γ) − π
//! ```
//!
//! Dephasing and incoherent pumping are zero and the waveguide coupling is
//! perfect throughout.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Decay rate and detuning `δω = ω − ω_emitter` of one emitter, both in units
/// of the reference rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterParams {
    pub gamma: f64,
    pub delta_omega: f64,
}

impl EmitterParams {
    pub fn new(gamma: f64, delta_omega: f64) -> Result<Self> {
        let em = EmitterParams { gamma, delta_omega };
        em.validate()?;
        Ok(em)
    }

    /// Unit decay rate at the given detuning.
    pub fn with_detuning(delta_omega: f64) -> Result<Self> {
        Self::new(1.0, delta_omega)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must be finite and > 0, got {}", self.gamma),
            ));
        }
        if !self.delta_omega.is_finite() {
            return Err(Error::invalid(
                "delta_omega",
                format!("must be finite, got {}", self.delta_omega),
            ));
        }
        Ok(())
    }

    /// `γ² + 4δω²`, the unsaturated part of every Lorentzian denominator.
    fn linewidth_term(&self) -> f64 {
        self.gamma * self.gamma + 4.0 * self.delta_omega * self.delta_omega
    }
}

/// Steady state of the optical Bloch equations under a coherent drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSteadyState {
    pub sigma_minus_re: f64,
    pub sigma_minus_im: f64,
    pub sigma_z: f64,
    /// Rabi frequency `Ω = γ√(2p)`.
    pub rabi: f64,
}

impl BlochSteadyState {
    /// `|⟨σ₋⟩|²`, the coherent dipole strength.
    pub fn coherence_sq(&self) -> f64 {
        self.sigma_minus_re * self.sigma_minus_re + self.sigma_minus_im * self.sigma_minus_im
    }
}

/// Power reflectance and reflection phase at a given impinging power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterResponse {
    pub reflectance: f64,
    pub phase_shift: f64,
}

fn check_power(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::invalid(
            "p",
            format!("impinging power must be finite and >= 0, got {p}"),
        ));
    }
    Ok(())
}

pub fn bloch_steady_state(p: f64, em: &EmitterParams) -> Result<BlochSteadyState> {
    check_power(p)?;
    em.validate()?;
    let rabi = em.gamma * (2.0 * p).sqrt();
    let den = em.linewidth_term() + 2.0 * rabi * rabi;
    let re = -em.gamma * rabi / den;
    Ok(BlochSteadyState {
        sigma_minus_re: re,
        sigma_minus_im: 2.0 * em.delta_omega / em.gamma * re,
        sigma_z: -0.5 + rabi * rabi / den,
        rabi,
    })
}

/// Fraction of the impinging power reflected back into the waveguide.
///
/// Regular at `p = 0`, where a resonant emitter is a perfect mirror.
pub fn reflectance(p: f64, em: &EmitterParams) -> Result<f64> {
    check_power(p)?;
    em.validate()?;
    let g2 = em.gamma * em.gamma;
    Ok(g2 / (em.linewidth_term() + 4.0 * p * g2))
}

/// Reflectance obtained from the Bloch steady state instead of the closed form.
///
/// The drive delivers energy at the rate `−Ω·Re⟨σ₋⟩`, which equals the total
/// scattering rate `γ(⟨σ_z⟩ + 1/2)`. With perfect waveguide coupling half of it
/// is emitted backwards, giving the reflected rate `γ³p/(γ² + 4δω² + 4γ²p)`.
/// Normalising by the impinging rate `pγ` yields the reflectance, so `p` must
/// be strictly positive.
pub fn reflectance_from_bloch(p: f64, em: &EmitterParams) -> Result<f64> {
    check_power(p)?;
    if p == 0.0 {
        return Err(Error::invalid(
            "p",
            "the Bloch route normalises by the impinging rate and needs p > 0",
        ));
    }
    let ss = bloch_steady_state(p, em)?;
    let reflected_rate = -0.5 * ss.rabi * ss.sigma_minus_re;
    Ok(reflected_rate / (p * em.gamma))
}

/// Reflection phase `arctan(2δω/γ) − π`, in `(−3π/2, −π/2)`.
pub fn phase_shift(em: &EmitterParams) -> Result<f64> {
    em.validate()?;
    Ok((2.0 * em.delta_omega / em.gamma).atan() - PI)
}

pub fn response(p: f64, em: &EmitterParams) -> Result<EmitterResponse> {
    Ok(EmitterResponse {
        reflectance: reflectance(p, em)?,
        phase_shift: phase_shift(em)?,
    })
}
