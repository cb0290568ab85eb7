//! Atomic species data and physical constants: nuclear spin, hyperfine
//! splitting, optical-line defaults, gyromagnetic ratios, and the flat
//! key-value constants table with built-in defaults.

use std::collections::HashMap;
use std::path::Path;

use crate::angular::HalfInt;

/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s.
pub const PLANCK_H: f64 = 6.626_070_15e-34;
/// Electron g-factor (absolute value).
pub const G_S: f64 = 2.002_319_304_36;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Classical electron radius, m.
pub const R_E_DEFAULT: f64 = 2.83e-15;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Free-electron gyromagnetic ratio, rad/s/T.
pub fn gamma_e() -> f64 {
    G_S * MU_B / HBAR
}

#[derive(Debug, thiserror::Error)]
pub enum SpeciesError {
    #[error("unknown species '{0}'")]
    UnknownSpecies(String),
    #[error("constants file line {line}: expected 'key = value', got '{text}'")]
    BadLine { line: usize, text: String },
    #[error("constants file: malformed number for key '{0}'")]
    BadNumber(String),
    #[error("constants file: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing constant '{0}'")]
    MissingKey(String),
}

/// Flat key-value constants table; built-in defaults, optionally overridden
/// from a text file with lines like `rb87.d1.f_osc = 0.342`.
#[derive(Clone, Debug)]
pub struct ConstantsTable {
    values: HashMap<String, f64>,
}

impl ConstantsTable {
    pub fn builtin() -> Self {
        let mut values = HashMap::new();
        let mut set = |k: &str, v: f64| {
            values.insert(k.to_string(), v);
        };
        // 87Rb ground state and D1 line
        set("rb87.nuclear_spin_2", 3.0);
        set("rb87.hyperfine_splitting_hz", 6.834_682_610_904e9);
        set("rb87.d1.frequency_hz", 377.107_463_5e12);
        set("rb87.d1.f_osc", 0.342);
        set("rb87.d1.j_excited_2", 1.0);
        // shared physical input that is a modeling choice rather than CODATA
        set("physics.r_e_m", R_E_DEFAULT);
        ConstantsTable { values }
    }

    /// Builtin defaults overlaid with the entries of `path`.
    pub fn with_overrides(path: &Path) -> Result<Self, SpeciesError> {
        let mut table = Self::builtin();
        let text = std::fs::read_to_string(path)?;
        table.apply_text(&text)?;
        Ok(table)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), SpeciesError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SpeciesError::BadLine {
                line: k + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim().to_string();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| SpeciesError::BadNumber(key.clone()))?;
            self.values.insert(key, value);
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<f64, SpeciesError> {
        self.values
            .get(key)
            .copied()
            .ok_or_else(|| SpeciesError::MissingKey(key.to_string()))
    }
}

/// One alkali species: ground-state spin structure and D1-line data.
#[derive(Clone, Debug)]
pub struct SpeciesSpec {
    pub name: String,
    pub nuclear_spin: HalfInt,
    /// Ground-state hyperfine splitting `nu_hf = E(a) - E(b)` in Hz.
    pub hyperfine_splitting_hz: f64,
    /// D1 line center of gravity, Hz.
    pub d1_frequency_hz: f64,
    pub d1_f_osc: f64,
    /// Excited-state electronic angular momentum (1/2 for D1).
    pub j_excited: HalfInt,
}

impl SpeciesSpec {
    pub fn from_constants(name: &str, table: &ConstantsTable) -> Result<Self, SpeciesError> {
        let prefix = name.to_ascii_lowercase();
        if table.get(&format!("{prefix}.nuclear_spin_2")).is_err() {
            return Err(SpeciesError::UnknownSpecies(name.to_string()));
        }
        Ok(SpeciesSpec {
            name: prefix.clone(),
            nuclear_spin: HalfInt::from_twice(
                table.get(&format!("{prefix}.nuclear_spin_2"))? as i32
            ),
            hyperfine_splitting_hz: table.get(&format!("{prefix}.hyperfine_splitting_hz"))?,
            d1_frequency_hz: table.get(&format!("{prefix}.d1.frequency_hz"))?,
            d1_f_osc: table.get(&format!("{prefix}.d1.f_osc"))?,
            j_excited: HalfInt::from_twice(table.get(&format!("{prefix}.d1.j_excited_2"))? as i32),
        })
    }

    /// Atomic gyromagnetic ratio `gamma_F = gamma_e / (2I + 1)`, rad/s/T.
    pub fn gamma_f(&self) -> f64 {
        gamma_e() / self.nuclear_spin.multiplicity() as f64
    }

    /// Ground-state hyperfine constant `A_hfs / hbar` in rad/s, from the
    /// splitting `nu_hf = A (I + 1/2) / h`.
    pub fn a_hfs_rad(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.hyperfine_splitting_hz
            / (self.nuclear_spin.to_f64() + 0.5)
    }

    /// Optical line associated with ground manifold `a = I + 1/2`, on the
    /// detuning axis used throughout: `nu_a - nu_b` equals the hyperfine
    /// splitting and the degeneracy-weighted mean of the two lines sits at
    /// the reference frequency.
    pub fn nu_a(&self) -> f64 {
        let i = self.nuclear_spin.to_f64();
        self.d1_frequency_hz + self.hyperfine_splitting_hz * i / (2.0 * i + 1.0)
    }

    /// Optical line associated with ground manifold `b = I - 1/2`.
    pub fn nu_b(&self) -> f64 {
        let i = self.nuclear_spin.to_f64();
        self.d1_frequency_hz - self.hyperfine_splitting_hz * (i + 1.0) / (2.0 * i + 1.0)
    }
}
