//! Linearized drift matrices for the transverse multipole vector: spin
//! exchange, spin destruction, optical pumping and the longitudinal magnetic
//! field, assembled elementwise from the linearized equations of motion,
//! plus the transverse-drive coupling vector.

use ndarray::{Array1, Array2};
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::angular::{cg, ht_coefficients, wigner_9j, CouplingCoeffs, HalfInt};
use crate::equilibrium::SpinTempState;
use crate::operators::{LayoutConvention, MultipoleLayout};

type C64 = Complex64;

/// Relaxation and pumping rates (angular, 1/s) plus the longitudinal mean
/// photon spin of the pump light.
#[derive(Clone, Copy, Debug)]
pub struct RateSet {
    pub r_se: f64,
    pub r_sd: f64,
    pub r_op: f64,
    pub s0: f64,
}

fn h_int(l: i32) -> HalfInt {
    HalfInt::from_int(l)
}

/// `9j{I S F; I S F'; l1 l2 l3}` with S = 1/2.
fn conv_9j(i: HalfInt, f: HalfInt, fp: HalfInt, l1: i32, l2: i32, l3: i32) -> f64 {
    let s = HalfInt::HALF;
    wigner_9j(
        i,
        s,
        f,
        i,
        s,
        fp,
        h_int(l1),
        h_int(l2),
        h_int(l3),
    )
}

fn manifolds(layout: &MultipoleLayout) -> Vec<HalfInt> {
    let a = layout.nuclear_spin + HalfInt::HALF;
    let b = layout.nuclear_spin - HalfInt::HALF;
    if b.twice() >= 0 {
        vec![a, b]
    } else {
        vec![a]
    }
}

/// Spin-exchange drift `A_SE / R_se` from the linearized equation of motion,
/// assembled element by element. The matrix is real and independent of the
/// sign of `M`.
pub fn drift_spin_exchange(
    layout: &MultipoleLayout,
    coeffs: &CouplingCoeffs,
    state: &SpinTempState,
) -> Array2<f64> {
    let i = layout.nuclear_spin;
    let fs = manifolds(layout);
    let d = layout.dim();
    let m = h_int(layout.m);
    let bracket_i = i.multiplicity() as f64; // [I] = 2I + 1
    let mut a = Array2::<f64>::zeros((d, d));

    for (r, &(l, ft)) in layout.slots.iter().enumerate() {
        a[(r, r)] -= 1.0;
        // rank-preserving exchange within rank L
        for &f in &fs {
            if let Some(c) = layout.slot(l, f) {
                a[(r, c)] += coeffs.x(l, ft, ft) * coeffs.x(l, f, f);
            }
        }
        if l == 1 {
            for &f in &fs {
                if let Some(c) = layout.slot(1, f) {
                    a[(r, c)] += coeffs.y(1, ft, ft) * coeffs.y(1, f, f);
                }
            }
        }
        // rank-mixing terms fed by the longitudinal spin-temperature moments
        let base = ft.multiplicity() as f64 * (6.0 * bracket_i).sqrt();
        for lam in [l - 1, l + 1] {
            if lam < 1 {
                continue;
            }
            let w9 = conv_9j(i, ft, ft, lam, 1, l);
            if w9 == 0.0 {
                continue;
            }
            let pref = base * ((2 * lam + 1) as f64).sqrt() * w9;

            // <T_{Lambda 0}(FF)>_ST feeding the rank-1 columns
            let cg_a = cg(h_int(lam), HalfInt::ZERO, h_int(1), m, h_int(l), m);
            let st_x: f64 = fs
                .iter()
                .map(|&f| coeffs.x(lam, f, f) * state.st_multipole(lam, f))
                .sum();
            if cg_a != 0.0 && st_x != 0.0 {
                for &f in &fs {
                    if let Some(c) = layout.slot(1, f) {
                        a[(r, c)] += pref * cg_a * st_x * coeffs.y(1, f, f);
                    }
                }
            }

            // <T_{10}(ff)>_ST feeding the rank-Lambda columns
            let cg_b = cg(h_int(lam), m, h_int(1), HalfInt::ZERO, h_int(l), m);
            let st_y: f64 = fs
                .iter()
                .map(|&f| coeffs.y(1, f, f) * state.st_multipole(1, f))
                .sum();
            if cg_b != 0.0 && st_y != 0.0 {
                for &f in &fs {
                    if let Some(c) = layout.slot(lam, f) {
                        a[(r, c)] += pref * cg_b * st_y * coeffs.x(lam, f, f);
                    }
                }
            }
        }
    }
    a
}

/// Spin-destruction drift `A_SD / R_sd`: uniform decay plus restoration of
/// the purely nuclear part of each multipole.
pub fn drift_spin_destruction(layout: &MultipoleLayout, coeffs: &CouplingCoeffs) -> Array2<f64> {
    let fs = manifolds(layout);
    let d = layout.dim();
    let mut a = Array2::<f64>::zeros((d, d));
    for (r, &(l, ft)) in layout.slots.iter().enumerate() {
        a[(r, r)] -= 1.0;
        for &f in &fs {
            if let Some(c) = layout.slot(l, f) {
                a[(r, c)] += coeffs.x(l, f, f) * coeffs.x(l, ft, ft);
            }
        }
    }
    a
}

/// Optical-pumping drift `A_OP / R_op` for pump light along z with mean
/// photon spin `s0`: the spin-destruction form plus the rank-coupling light
/// shift of the photon spin.
pub fn drift_optical_pumping(
    layout: &MultipoleLayout,
    coeffs: &CouplingCoeffs,
    s0: f64,
) -> Array2<f64> {
    let i = layout.nuclear_spin;
    let fs = manifolds(layout);
    let m = h_int(layout.m);
    let mut a = drift_spin_destruction(layout, coeffs);
    for (r, &(l, ft)) in layout.slots.iter().enumerate() {
        for lam in (l - 1)..=(l + 1) {
            if lam < 0 {
                continue;
            }
            let w9 = conv_9j(i, ft, ft, lam, 1, l);
            if w9 == 0.0 {
                continue;
            }
            let cg_b = cg(h_int(lam), m, h_int(1), HalfInt::ZERO, h_int(l), m);
            if cg_b == 0.0 {
                continue;
            }
            let pref = s0
                * (3.0 * (2 * lam + 1) as f64).sqrt()
                * ft.multiplicity() as f64
                * cg_b
                * w9;
            for &f in &fs {
                if let Some(c) = layout.slot(lam, f) {
                    a[(r, c)] += pref * coeffs.x(lam, f, f);
                }
            }
        }
    }
    a
}

/// Magnetic drift for azimuthal index `M`: `i M omega0 diag(+1 aa, -1 bb)`.
pub fn drift_magnetic(layout: &MultipoleLayout, omega0: f64) -> Array2<C64> {
    let a_manifold = layout.nuclear_spin + HalfInt::HALF;
    let d = layout.dim();
    let mut a = Array2::<C64>::zeros((d, d));
    for (r, &(_, f)) in layout.slots.iter().enumerate() {
        let sign = if f == a_manifold { 1.0 } else { -1.0 };
        a[(r, r)] = C64::new(0.0, layout.m as f64 * omega0 * sign);
    }
    a
}

/// Transverse-drive coupling vector: slot `(L, F)` carries
/// `+-sqrt(L(L+1))/2 <T_L0(FF)>_ST` with `+` for manifold `a`, so that the
/// `M = +1` drive term is `i OmegaR cos(wt) B`. The coefficient follows
/// from the commutator `[F_mu(F), T_LM] = sqrt(L(L+1)) C^{L(M+mu)}_{LM;1mu}
/// T_{L(M+mu)}` with `C^{L0}_{L1;1-1} = 1/sqrt(2)` and the `1/(sqrt(2)[I])`
/// weight of the electron spin decomposition; the full nonlinear
/// master-equation integration confirms this normalization.
pub fn drive_vector(layout: &MultipoleLayout, state: &SpinTempState) -> Array1<f64> {
    let a_manifold = layout.nuclear_spin + HalfInt::HALF;
    let mut b = Array1::<f64>::zeros(layout.dim());
    for (r, &(l, f)) in layout.slots.iter().enumerate() {
        let sign = if f == a_manifold { 1.0 } else { -1.0 };
        let lf = l as f64;
        b[r] = sign * (lf * (lf + 1.0)).sqrt() / 2.0 * state.st_multipole(l, f);
    }
    b
}

/// Complete drift description for the `|M| = 1` sector.
#[derive(Clone, Debug)]
pub struct DriftSystem {
    pub layout: MultipoleLayout,
    /// `A_{M=+1}`
    pub a_plus: Array2<C64>,
    /// `A_{M=-1} = conj(A_{M=+1})`
    pub a_minus: Array2<C64>,
    /// `diag(A_{+1}, A_{-1})`, 2d x 2d
    pub a_combined: Array2<C64>,
    pub b_drive: Array1<f64>,
    pub omega0: f64,
    pub eigenvalues: Vec<C64>,
    pub stable: bool,
}

impl DriftSystem {
    /// Precession frequency (Hz) of the slowest decaying oscillatory mode.
    pub fn slow_mode_frequency_hz(&self) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|l| l.im.abs() > 1e-9)
            .max_by(|x, y| x.re.partial_cmp(&y.re).unwrap())
            .map(|l| l.im.abs() / (2.0 * std::f64::consts::PI))
            .unwrap_or(0.0)
    }
}

/// Builds the full drift matrix `A_1 = A_MG + R_se A_SE + R_sd A_SD +
/// R_op A_OP` and its `M = -1` partner, checks stability through the
/// eigenvalues, and attaches the drive vector.
pub fn assemble_system(
    state: &SpinTempState,
    rates: &RateSet,
    omega0: f64,
    convention: LayoutConvention,
) -> DriftSystem {
    let layout = MultipoleLayout::new(state.nuclear_spin, 1, convention);
    let coeffs = ht_coefficients(state.nuclear_spin);
    let d = layout.dim();

    let real = {
        let se = drift_spin_exchange(&layout, &coeffs, state);
        let sd = drift_spin_destruction(&layout, &coeffs);
        let op = drift_optical_pumping(&layout, &coeffs, rates.s0);
        se.mapv(|x| rates.r_se * x) + sd.mapv(|x| rates.r_sd * x) + op.mapv(|x| rates.r_op * x)
    };
    let a_plus = real.mapv(|x| C64::new(x, 0.0)) + drift_magnetic(&layout, omega0);
    let a_minus = a_plus.mapv(|x| x.conj());

    let mut a_combined = Array2::<C64>::zeros((2 * d, 2 * d));
    for r in 0..d {
        for c in 0..d {
            a_combined[(r, c)] = a_plus[(r, c)];
            a_combined[(d + r, d + c)] = a_minus[(r, c)];
        }
    }

    let (vals, _) = a_plus.eig().expect("drift matrix eigendecomposition");
    let eigenvalues: Vec<C64> = vals.to_vec();
    let scale = eigenvalues
        .iter()
        .map(|l| l.norm())
        .fold(1.0_f64, f64::max);
    let stable = eigenvalues.iter().all(|l| l.re <= 1e-9 * scale);

    let b_drive = drive_vector(&layout, state);

    DriftSystem {
        layout,
        a_plus,
        a_minus,
        a_combined,
        b_drive,
        omega0,
        eigenvalues,
        stable,
    }
}
