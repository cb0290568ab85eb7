//! Probe-light coupling: dispersive detuning factors for the two hyperfine
//! lines, the beam-geometry coupling strength, and the per-manifold
//! atom-light constants entering the polarimetry signal.

use crate::angular::HalfInt;
use crate::species::{SpeciesSpec, SPEED_OF_LIGHT};

#[derive(Debug, thiserror::Error)]
pub enum OpticsError {
    #[error("probe linewidth must be positive, got {0} Hz")]
    BadLinewidth(f64),
    #[error("effective beam area must be positive, got {0} m^2")]
    BadArea(f64),
    #[error("photon flux must be non-negative, got {0} /s")]
    BadFlux(f64),
}

/// Far-detuned Faraday probe description. Frequencies in Hz, area in m^2,
/// flux in photons/s.
#[derive(Clone, Debug)]
pub struct ProbeSpec {
    /// Probe detuning from the line center of gravity.
    pub frequency_detuning: f64,
    /// Optical transition frequency from ground manifold a.
    pub nu_a: f64,
    /// Optical transition frequency from ground manifold b.
    pub nu_b: f64,
    /// Reference frequency the detuning is measured from.
    pub nu_ref: f64,
    /// Half width at half maximum of the pressure-broadened line.
    pub gamma_hwhm: f64,
    pub f_osc: f64,
    pub a_eff: f64,
    /// Photon flux.
    pub phi: f64,
    /// Classical electron radius, m.
    pub r_e: f64,
    pub j_excited: HalfInt,
}

impl ProbeSpec {
    /// Builds a probe from species data. `detuning` and `gamma_fwhm` in Hz;
    /// the detuning is referenced to the D1 line center of gravity.
    pub fn new(
        species: &SpeciesSpec,
        detuning: f64,
        gamma_fwhm: f64,
        a_eff: f64,
        phi: f64,
        r_e: f64,
    ) -> Result<Self, OpticsError> {
        if gamma_fwhm <= 0.0 {
            return Err(OpticsError::BadLinewidth(gamma_fwhm));
        }
        if a_eff <= 0.0 {
            return Err(OpticsError::BadArea(a_eff));
        }
        if phi < 0.0 {
            return Err(OpticsError::BadFlux(phi));
        }
        Ok(ProbeSpec {
            frequency_detuning: detuning,
            nu_a: species.nu_a(),
            nu_b: species.nu_b(),
            nu_ref: species.d1_frequency_hz,
            gamma_hwhm: 0.5 * gamma_fwhm,
            f_osc: species.d1_f_osc,
            a_eff,
            phi,
            r_e,
            j_excited: species.j_excited,
        })
    }

    /// Absolute probe frequency.
    pub fn nu(&self) -> f64 {
        self.nu_ref + self.frequency_detuning
    }
}

/// Detuning factors, coupling strength and per-manifold coupling constants.
#[derive(Clone, Copy, Debug)]
pub struct ProbeCouplings {
    pub d_a: f64,
    pub d_b: f64,
    /// Beam-geometry coupling strength, 1/s per photon-flux unit.
    pub g_strength: f64,
    pub g_a: f64,
    pub g_b: f64,
}

/// Dispersive lineshape `D(x) = x / (x^2 + 1)` with `x = (nu - nu_line) / Gamma`.
pub fn detuning_factor(nu: f64, nu_line: f64, gamma_hwhm: f64) -> f64 {
    let x = (nu - nu_line) / gamma_hwhm;
    x / (x * x + 1.0)
}

/// Evaluates `D_a`, `D_b`, `G = 4 c r_e f_osc / ((2j+1)(2I+1) A_eff)` and
/// `g_alpha = G D_alpha` at the probe frequency.
pub fn probe_couplings(probe: &ProbeSpec, nuclear_spin: HalfInt) -> ProbeCouplings {
    let nu = probe.nu();
    let d_a = detuning_factor(nu, probe.nu_a, probe.gamma_hwhm);
    let d_b = detuning_factor(nu, probe.nu_b, probe.gamma_hwhm);
    let degeneracy =
        (probe.j_excited.multiplicity() * nuclear_spin.multiplicity()) as f64;
    let g_strength = 4.0 / degeneracy * SPEED_OF_LIGHT * probe.r_e * probe.f_osc / probe.a_eff;
    ProbeCouplings {
        d_a,
        d_b,
        g_strength,
        g_a: g_strength * d_a,
        g_b: g_strength * d_b,
    }
}
