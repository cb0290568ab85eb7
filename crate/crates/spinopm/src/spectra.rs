//! Power spectral densities from the quantum regression theorem: the
//! spherical-block resolvent spectrum, its Cartesian projection onto the
//! transverse manifold spins, and the measured polarimeter PSD with the
//! photon shot-noise floor.

use ndarray::Array2;
use ndarray_linalg::Inverse;
use num_complex::Complex64;

use crate::drift::DriftSystem;
use crate::equilibrium::CovarianceBlock;
use crate::optics::{ProbeCouplings, ProbeSpec};

type C64 = Complex64;

#[derive(Debug, thiserror::Error)]
pub enum SpectraError {
    #[error("drift system is unstable; spectrum undefined")]
    UnstableSystem,
    #[error("atom number must be positive, got {0}")]
    BadAtomNumber(f64),
}

/// Two-sided single-atom Cartesian spin PSDs (spin^2/Hz) on a frequency
/// grid; `ab`/`ba` are the cross spectra between the `F_x` components of
/// the two manifolds.
#[derive(Clone, Debug)]
pub struct CartesianSpectra {
    pub freqs: Vec<f64>,
    pub s_aa: Vec<f64>,
    pub s_bb: Vec<f64>,
    pub s_ab: Vec<f64>,
    pub s_ba: Vec<f64>,
}

/// Source term `Q = A R(0) + R(0) A^T` of the regression-theorem spectrum.
fn source_term(system: &DriftSystem, cov: &CovarianceBlock) -> Array2<C64> {
    let r0 = cov.r0.mapv(|x| C64::new(x, 0.0));
    let a = &system.a_combined;
    a.dot(&r0) + r0.dot(&a.t())
}

/// Evaluates the four Cartesian `F_x` spectrum entries at one frequency:
/// `S = M [-( -A + i w )^{-1} Q ( -A^T - i w )^{-1}] M^T` with `w = 2 pi nu`.
fn cartesian_point(
    system: &DriftSystem,
    q: &Array2<C64>,
    m_cart: &Array2<C64>,
    nu: f64,
) -> [[C64; 2]; 2] {
    let n = system.a_combined.nrows();
    let w = 2.0 * std::f64::consts::PI * nu;
    let mut m1 = system.a_combined.mapv(|x| -x);
    let mut m2 = system.a_combined.t().mapv(|x| -x);
    for k in 0..n {
        m1[(k, k)] += C64::new(0.0, w);
        m2[(k, k)] -= C64::new(0.0, w);
    }
    let s_tilde = m1
        .inv()
        .expect("resolvent inversion")
        .dot(q)
        .dot(&m2.inv().expect("resolvent inversion"))
        .mapv(|x| -x);
    let cart = m_cart.dot(&s_tilde).dot(&m_cart.t());
    [[cart[(0, 0)], cart[(0, 1)]], [cart[(1, 0)], cart[(1, 1)]]]
}

/// Quantum-regression-theorem spectrum of the transverse manifold spins.
/// Returns two-sided single-atom PSDs; the symmetrized auto-spectra are
/// real to rounding and the reported values are the real parts.
pub fn qrt_spectrum(
    system: &DriftSystem,
    cov: &CovarianceBlock,
    freqs: &[f64],
) -> Result<CartesianSpectra, SpectraError> {
    if !system.stable {
        return Err(SpectraError::UnstableSystem);
    }
    let q = source_term(system, cov);
    let m_cart = system.layout.m_cart();
    let mut out = CartesianSpectra {
        freqs: freqs.to_vec(),
        s_aa: Vec::with_capacity(freqs.len()),
        s_bb: Vec::with_capacity(freqs.len()),
        s_ab: Vec::with_capacity(freqs.len()),
        s_ba: Vec::with_capacity(freqs.len()),
    };
    for &nu in freqs {
        let s = cartesian_point(system, &q, &m_cart, nu);
        out.s_aa.push(s[0][0].re);
        out.s_bb.push(s[1][1].re);
        out.s_ab.push(s[0][1].re);
        out.s_ba.push(s[1][0].re);
    }
    Ok(out)
}

/// Maximum relative imaginary residue of the auto-spectra over `freqs`;
/// a hermiticity diagnostic for the Cartesian projection.
pub fn realness_residue(system: &DriftSystem, cov: &CovarianceBlock, freqs: &[f64]) -> f64 {
    let q = source_term(system, cov);
    let m_cart = system.layout.m_cart();
    let mut worst = 0.0_f64;
    for &nu in freqs {
        let s = cartesian_point(system, &q, &m_cart, nu);
        for k in 0..2 {
            let v = s[k][k];
            if v.norm() > 0.0 {
                worst = worst.max(v.im.abs() / v.norm());
            }
        }
    }
    worst
}

/// Integrates the two-sided auto-spectra over the whole real line with the
/// substitution `nu = s tan(theta)`, exact for the rational tails of the
/// resolvent. Returns `(int S_aa, int S_bb)`.
pub fn integrated_variances(system: &DriftSystem, cov: &CovarianceBlock) -> (f64, f64) {
    let q = source_term(system, cov);
    let m_cart = system.layout.m_cart();
    // frequency scale of the dynamics, Hz
    let scale = system
        .eigenvalues
        .iter()
        .map(|l| l.norm())
        .fold(0.0_f64, f64::max)
        / (2.0 * std::f64::consts::PI);
    let s = scale.max(1.0);
    let n = 20_001; // composite Simpson panels over theta
    let h = std::f64::consts::PI / (n - 1) as f64;
    let mut acc = [0.0_f64; 2];
    for k in 0..n {
        let theta = -0.5 * std::f64::consts::PI + k as f64 * h;
        let c = theta.cos();
        if c.abs() < 1e-9 {
            continue; // integrand decays as 1/nu^2, endpoint contributes 0
        }
        let nu = s * theta.tan();
        let jac = s / (c * c);
        let weight = if k == 0 || k == n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let sp = cartesian_point(system, &q, &m_cart, nu);
        acc[0] += weight * sp[0][0].re * jac;
        acc[1] += weight * sp[1][1].re * jac;
    }
    (acc[0] * h / 3.0, acc[1] * h / 3.0)
}

/// Frequency grid clustered around each oscillatory eigenmode of the drift
/// matrix: a linear backbone over `[0, nu_max]` plus log-spaced satellites
/// within each resonance's linewidth decades.
pub fn auto_grid(system: &DriftSystem, n_points: usize) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let modes: Vec<(f64, f64)> = system
        .eigenvalues
        .iter()
        .filter(|l| l.im > 1e-9)
        .map(|l| (l.im / two_pi, (l.re.abs() / two_pi).max(1e-3)))
        .collect();
    let nu_max = modes
        .iter()
        .map(|&(c, w)| c + 10.0 * w)
        .fold(0.0_f64, f64::max)
        .max(
            system
                .eigenvalues
                .iter()
                .map(|l| l.re.abs() / two_pi)
                .fold(1.0, f64::max)
                * 3.0,
        );
    let n_base = (n_points / 2).max(16);
    let mut grid: Vec<f64> = (0..n_base)
        .map(|k| nu_max * k as f64 / (n_base - 1) as f64)
        .collect();
    if !modes.is_empty() {
        let per_mode = (n_points - n_base).max(16) / modes.len() / 2;
        for &(center, width) in &modes {
            for k in 0..per_mode {
                // offsets from width/100 out to 100 widths, log-spaced
                let t = width * 10f64.powf(-2.0 + 4.0 * k as f64 / (per_mode - 1) as f64);
                for sign in [-1.0, 1.0] {
                    let nu = center + sign * t;
                    if nu > 0.0 && nu < nu_max {
                        grid.push(nu);
                    }
                }
            }
            grid.push(center);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * nu_max.max(1.0));
    grid
}

/// Polarimeter output spectrum on a grid. All arrays use the one-sided
/// convention `S' = 2 S`; `s_spin_effective` is the probed effective-spin
/// PSD (the braced combination of manifold spectra) and `psn_floor` the
/// photon shot-noise level `Phi`.
#[derive(Clone, Debug)]
pub struct SpectrumTrace {
    pub freqs: Vec<f64>,
    pub s_spin_aa: Vec<f64>,
    pub s_spin_bb: Vec<f64>,
    pub s_cross: Vec<f64>,
    pub s_spin_effective: Vec<f64>,
    pub s_measured: Vec<f64>,
    pub psn_floor: f64,
}

/// Folds the spin spectra into the measured polarimeter PSD:
/// `S_meas = Phi/2 + (Phi^2/4) N_at G^2 [D_a^2 S_aa + D_b^2 S_bb
/// - D_a D_b (S_ab + S_ba)]`, then converts to the one-sided convention.
pub fn measured_psd(
    cart: &CartesianSpectra,
    probe: &ProbeSpec,
    couplings: &ProbeCouplings,
    n_at: f64,
) -> Result<SpectrumTrace, SpectraError> {
    if n_at <= 0.0 {
        return Err(SpectraError::BadAtomNumber(n_at));
    }
    let phi = probe.phi;
    let g2 = couplings.g_strength * couplings.g_strength;
    let (da, db) = (couplings.d_a, couplings.d_b);
    let n = cart.freqs.len();
    let mut trace = SpectrumTrace {
        freqs: cart.freqs.clone(),
        s_spin_aa: Vec::with_capacity(n),
        s_spin_bb: Vec::with_capacity(n),
        s_cross: Vec::with_capacity(n),
        s_spin_effective: Vec::with_capacity(n),
        s_measured: Vec::with_capacity(n),
        psn_floor: phi,
    };
    for k in 0..n {
        let cross_sum = cart.s_ab[k] + cart.s_ba[k];
        let eff = da * da * cart.s_aa[k] + db * db * cart.s_bb[k] - da * db * cross_sum;
        let meas = phi / 2.0 + phi * phi / 4.0 * n_at * g2 * eff;
        trace.s_spin_aa.push(2.0 * cart.s_aa[k]);
        trace.s_spin_bb.push(2.0 * cart.s_bb[k]);
        trace.s_cross.push(cross_sum);
        trace.s_spin_effective.push(2.0 * eff);
        trace.s_measured.push(2.0 * meas);
    }
    Ok(trace)
}
