//! Configuration file schema, validation, and unit normalization.
//! Boundary units follow lab conventions (G, GHz, cm^-3, cm^2, degrees);
//! everything downstream is SI.

use std::path::Path;

use serde::Deserialize;
use spinopm::drift::RateSet;
use spinopm::optics::ProbeSpec;
use spinopm::species::{ConstantsTable, SpeciesSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("species: {0}")]
    Species(#[from] spinopm::species::SpeciesError),
    #[error("probe: {0}")]
    Probe(#[from] spinopm::optics::OpticsError),
}

/// On-disk schema. Optional blocks fall back to documented defaults.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub species: String,
    pub ensemble: EnsembleCfg,
    pub probe: ProbeCfg,
    #[serde(default)]
    pub drive: DriveCfg,
    #[serde(default)]
    pub analysis: AnalysisCfg,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleCfg {
    /// Number density in cm^-3 (with the probe geometry this sets N_at).
    pub density_cm3: Option<f64>,
    /// Probed atom number, alternative to density + geometry.
    pub n_at: Option<f64>,
    /// Cell temperature, degrees Celsius (bookkeeping only).
    pub temperature_c: Option<f64>,
    /// Electron spin polarization; exclusive with `r_op`.
    pub p: Option<f64>,
    /// Optical pumping rate, 1/s; exclusive with `p`.
    pub r_op: Option<f64>,
    /// Spin-exchange rate, 1/s.
    pub r_se: f64,
    /// Spin-destruction rate, 1/s.
    pub r_sd: f64,
    /// Longitudinal field, gauss.
    pub b_z_g: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeCfg {
    /// Probe detuning from the D1 center of gravity, GHz.
    pub detuning_ghz: f64,
    /// Pressure-broadened optical FWHM, GHz.
    pub gamma_fwhm_ghz: f64,
    /// Probe photon flux, photons/s.
    pub photon_flux: f64,
    /// Effective beam area, cm^2.
    pub a_eff_cm2: f64,
    /// Probed cell length, cm; required when N_at comes from the density.
    pub cell_length_cm: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveCfg {
    /// Calibration drive amplitude, gauss.
    pub b0_perp_g: f64,
    /// Polarization angle b, degrees (0 = pure x drive).
    pub b_angle_deg: f64,
    /// Relative y-phase, degrees.
    pub phi_deg: f64,
}

impl Default for DriveCfg {
    fn default() -> Self {
        DriveCfg {
            b0_perp_g: 1e-6,
            b_angle_deg: 0.0,
            phi_deg: 0.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisCfg {
    /// Frequency grid bounds, Hz; defaults to an automatic grid spanning
    /// the resonances.
    pub freq_min_hz: Option<f64>,
    pub freq_max_hz: Option<f64>,
    pub n_points: Option<usize>,
    /// Measurement (averaging) time, s.
    pub t_meas_s: Option<f64>,
    /// Lock-in time constant, s; defaults to 10 / (2 pi nu_res).
    pub t_bw_s: Option<f64>,
}

#[allow(clippy::derivable_impls)]
impl Default for AnalysisCfg {
    fn default() -> Self {
        AnalysisCfg {
            freq_min_hz: None,
            freq_max_hz: None,
            n_points: None,
            t_meas_s: None,
            t_bw_s: None,
        }
    }
}

/// Fully validated, SI-normalized run description.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub species: SpeciesSpec,
    pub p: f64,
    pub rates: RateSet,
    /// Longitudinal field, tesla.
    pub b_z: f64,
    pub n_at: f64,
    pub probe: ProbeSpec,
    /// Drive amplitude, tesla.
    pub b0_perp: f64,
    /// Drive polarization angle, rad.
    pub b_angle: f64,
    /// Drive y-phase, rad.
    pub phi: f64,
    pub freq_min: Option<f64>,
    pub freq_max: Option<f64>,
    pub n_points: usize,
    pub t_meas: f64,
    pub t_bw: Option<f64>,
}

pub fn config_from_str(text: &str, constants: &ConstantsTable) -> Result<RunConfig, ConfigError> {
    let file: FileConfig = serde_json::from_str(text)?;
    validate(&file, constants)
}

pub fn config_load(path: &Path, constants: &ConstantsTable) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    config_from_str(&text, constants)
}

fn validate(file: &FileConfig, constants: &ConstantsTable) -> Result<RunConfig, ConfigError> {
    let mut problems = Vec::new();
    let e = &file.ensemble;

    // exactly one polarization specifier
    let p = match (e.p, e.r_op) {
        (Some(_), Some(_)) => {
            problems.push("ensemble: give exactly one of `p` and `r_op`, not both".to_string());
            0.0
        }
        (None, None) => {
            problems.push("ensemble: one of `p` or `r_op` is required".to_string());
            0.0
        }
        (Some(p), None) => {
            if !(0.0..1.0).contains(&p) {
                problems.push(format!("ensemble: p = {p} must lie in [0, 1)"));
            }
            p
        }
        (None, Some(r_op)) => {
            if r_op < 0.0 {
                problems.push(format!("ensemble: r_op = {r_op} must be non-negative"));
            }
            // invert R_op = p R_sd / (1 - p)
            r_op / (r_op + e.r_sd)
        }
    };
    let r_op = e.r_op.unwrap_or_else(|| p * e.r_sd / (1.0 - p));

    if e.r_se <= 0.0 {
        problems.push(format!("ensemble: r_se = {} must be positive", e.r_se));
    }
    if e.r_sd <= 0.0 {
        problems.push(format!("ensemble: r_sd = {} must be positive", e.r_sd));
    }

    // exactly one atom-number specifier
    let n_at = match (e.n_at, e.density_cm3) {
        (Some(_), Some(_)) => {
            problems
                .push("ensemble: give exactly one of `n_at` and `density_cm3`".to_string());
            0.0
        }
        (None, None) => {
            problems.push("ensemble: one of `n_at` or `density_cm3` is required".to_string());
            0.0
        }
        (Some(n), None) => {
            if n <= 0.0 {
                problems.push(format!("ensemble: n_at = {n} must be positive"));
            }
            n
        }
        (None, Some(density)) => match file.probe.cell_length_cm {
            // N_at = n A_eff L, all in cm
            Some(l) => density * file.probe.a_eff_cm2 * l,
            None => {
                problems.push(
                    "probe: `cell_length_cm` is required when the atom number \
                     comes from `density_cm3`"
                        .to_string(),
                );
                0.0
            }
        },
    };

    if !problems.is_empty() {
        return Err(ConfigError::Invalid(problems));
    }

    let species = SpeciesSpec::from_constants(&file.species, constants)?;
    let r_e = constants
        .get("physics.r_e_m")
        .unwrap_or(spinopm::species::R_E_DEFAULT);
    let probe = ProbeSpec::new(
        &species,
        file.probe.detuning_ghz * 1e9,
        file.probe.gamma_fwhm_ghz * 1e9,
        file.probe.a_eff_cm2 * 1e-4,
        file.probe.photon_flux,
        r_e,
    )?;

    Ok(RunConfig {
        species,
        p,
        rates: RateSet {
            r_se: e.r_se,
            r_sd: e.r_sd,
            r_op,
            s0: 1.0,
        },
        b_z: e.b_z_g * 1e-4,
        n_at,
        probe,
        b0_perp: file.drive.b0_perp_g * 1e-4,
        b_angle: file.drive.b_angle_deg.to_radians(),
        phi: file.drive.phi_deg.to_radians(),
        freq_min: file.analysis.freq_min_hz,
        freq_max: file.analysis.freq_max_hz,
        n_points: file.analysis.n_points.unwrap_or(1201),
        t_meas: file.analysis.t_meas_s.unwrap_or(1.0),
        t_bw: file.analysis.t_bw_s,
    })
}
