//! Spin-temperature equilibrium: the beta parameter, the equilibrium
//! density matrix and its multipole moments, closed-form transverse
//! variances, and the equal-time covariance blocks feeding the spectrum.

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;

use crate::angular::{cg, HalfInt};
use crate::operators::{HilbertBasis, MultipoleLayout};

type C64 = Complex64;

#[derive(Debug, thiserror::Error)]
pub enum EquilibriumError {
    #[error("polarization {0} out of range: need 0 <= p < 1")]
    BadPolarization(f64),
}

/// Spin-temperature steady state `rho_ST = e^{beta S_z} e^{beta I_z} / Z`.
#[derive(Clone, Debug)]
pub struct SpinTempState {
    pub beta: f64,
    pub p: f64,
    pub nuclear_spin: HalfInt,
    /// Density matrix in the coupled basis (diagonal, real).
    pub rho0: Array2<f64>,
    /// `(L, 2F) -> <T_L0(FF)>_ST`
    st_multipoles: HashMap<(i32, i32), f64>,
}

/// Partition function `Z(K, beta) = sinh(beta(K+1/2)) / sinh(beta/2)`.
pub fn partition_z(k: f64, beta: f64) -> f64 {
    if beta.abs() < 1e-8 {
        // sinh ratio -> multiplicity, with a quadratic correction that keeps
        // the crossover smooth
        let m = 2.0 * k + 1.0;
        m * (1.0 + beta * beta * (m * m - 1.0) / 24.0)
    } else {
        ((k + 0.5) * beta).sinh() / (0.5 * beta).sinh()
    }
}

/// `<K_z>(beta)` for a spin-K system in the spin-temperature state.
pub fn mean_kz(k: f64, beta: f64) -> f64 {
    if beta.abs() < 1e-8 {
        // leading order of the closed form
        return beta * k * (k + 1.0) / 3.0;
    }
    let ch = (0.5 * beta).tanh().recip();
    let c2 = (beta * (k + 0.5)).tanh().recip();
    0.5 * ((2.0 * k + 1.0) * ch * c2 - ch * ch) * (0.5 * beta).tanh()
}

/// Solves for beta with `p = 2 <S_z>` (K = 1/2), builds the equilibrium
/// density matrix and its longitudinal multipoles.
pub fn solve_beta(p: f64, nuclear_spin: HalfInt) -> Result<SpinTempState, EquilibriumError> {
    if !(0.0..1.0).contains(&p) {
        return Err(EquilibriumError::BadPolarization(p));
    }
    let beta = if p == 0.0 {
        0.0
    } else {
        // <S_z>(beta) is monotone; bracket then bisect, then one Newton polish.
        let target = 0.5 * p;
        let mut hi = 1.0;
        while mean_kz(0.5, hi) < target {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_kz(0.5, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi.max(1.0) {
                break;
            }
        }
        let mut b = 0.5 * (lo + hi);
        let h = 1e-7 * b.max(1.0);
        let deriv = (mean_kz(0.5, b + h) - mean_kz(0.5, b - h)) / (2.0 * h);
        if deriv > 0.0 {
            b -= (mean_kz(0.5, b) - target) / deriv;
        }
        b
    };

    let basis = HilbertBasis::new(nuclear_spin);
    let i = nuclear_spin.to_f64();
    let z = partition_z(i, beta) * partition_z(0.5, beta);

    // Diagonal in the uncoupled basis; rotate to coupled.
    let mut rho_unc = Array2::<f64>::zeros((basis.dim, basis.dim));
    for (k, &(mi, ms)) in basis.uncoupled.iter().enumerate() {
        rho_unc[(k, k)] = (beta * (mi.to_f64() + ms.to_f64())).exp() / z;
    }
    let rho_unc_c = rho_unc.mapv(|x| C64::new(x, 0.0));
    let rho0 = basis.to_coupled(&rho_unc_c).mapv(|x| x.re);

    let mut st_multipoles = HashMap::new();
    for &f in &[basis.manifold_a(), basis.manifold_b()] {
        if f.twice() < 0 {
            continue;
        }
        for l in 0..=f.twice() {
            st_multipoles.insert((l, f.twice()), st_multipole(nuclear_spin, beta, z, l, f));
        }
    }

    Ok(SpinTempState {
        beta,
        p,
        nuclear_spin,
        rho0,
        st_multipoles,
    })
}

/// `<T_L0(FF)>_ST` by the explicit trace sum over uncoupled projections.
fn st_multipole(nuclear_spin: HalfInt, beta: f64, z: f64, l: i32, f: HalfInt) -> f64 {
    let i = nuclear_spin;
    let s = HalfInt::HALF;
    let l_h = HalfInt::from_int(l);
    let mut acc = 0.0;
    let mut tmi = -i.twice();
    while tmi <= i.twice() {
        for tms in [-1, 1] {
            let mi = HalfInt::from_twice(tmi);
            let ms = HalfInt::from_twice(tms);
            let m = mi + ms;
            let c1 = cg(i, mi, s, ms, f, m);
            if c1 == 0.0 {
                continue;
            }
            let c2 = cg(f, m, f, -m, l_h, HalfInt::ZERO);
            // (-1)^{m - F} (integer exponent)
            let expo = (m.twice() - f.twice()) / 2;
            let sign = if expo.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            acc += (beta * m.to_f64()).exp() / z * c1 * c1 * c2 * sign;
        }
        tmi += 2;
    }
    acc
}

impl SpinTempState {
    pub fn st_multipole(&self, l: i32, f: HalfInt) -> f64 {
        *self.st_multipoles.get(&(l, f.twice())).unwrap_or(&0.0)
    }
}

/// Integer-coefficient polynomial helpers for the exact variance evaluation.
fn poly_mul(a: &[i128], b: &[i128]) -> Vec<i128> {
    let mut out = vec![0i128; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[i128], b: &[i128]) -> Vec<i128> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| a.get(k).copied().unwrap_or(0) + b.get(k).copied().unwrap_or(0))
        .collect()
}

/// Coefficients of `(p + s)^n`, `s = +-1`.
fn binomial_shift(n: i32, s: i128) -> Vec<i128> {
    let n = n as usize;
    let mut c = vec![0i128; n + 1];
    c[0] = 1;
    for row in 1..=n {
        for k in (1..=row).rev() {
            c[k] += c[k - 1];
        }
    }
    // c[k] = binom(n, k); multiply by s^{n-k}
    for (k, v) in c.iter_mut().enumerate() {
        let pow = (n - k) as u32;
        if s < 0 && pow % 2 == 1 {
            *v = -*v;
        }
    }
    c
}

fn horner(coeffs: &[i128], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
}

/// Strips the common `p^3` factor of numerator and denominator and evaluates
/// the reduced rational function. Exact integer expansion removes the
/// catastrophic cancellation of the printed closed forms near `p = 0`.
fn eval_reduced_ratio(num: &[i128], den: &[i128], p: f64) -> f64 {
    debug_assert!(num[..3].iter().all(|&c| c == 0));
    debug_assert!(den[..3].iter().all(|&c| c == 0));
    horner(&num[3..], p) / horner(&den[3..], p)
}

/// Closed-form transverse variances `(Var[F_ax], Var[F_bx])` of the
/// spin-temperature state, valid on the whole range `0 <= p < 1` including
/// the removable singularity at `p = 0`.
pub fn transverse_variances(p: f64, nuclear_spin: HalfInt) -> (f64, f64) {
    let ti = nuclear_spin.twice(); // 2I as an integer
    let n = ti + 2; // 2I + 2
    let m = ti + 1; // 2I + 1

    // denominator: 8 p^2 [(p-1)^{2I+1} - (p+1)^{2I+1}]
    let mut den = poly_mul(
        &[0, 0, 8],
        &poly_add(
            &binomial_shift(m, -1),
            &binomial_shift(m, 1).iter().map(|&c| -c).collect::<Vec<_>>(),
        ),
    );

    // numerator a: [2(I+1)p + 1](p-1)^{2I+2} + [1 - 2(I+1)p](p+1)^{2I+2}
    let num_a = poly_add(
        &poly_mul(&[1, n as i128], &binomial_shift(n, -1)),
        &poly_mul(&[1, -(n as i128)], &binomial_shift(n, 1)),
    );

    // numerator b: (p^2 - 1) [ (p+1)^{2I}(2Ip - 1) - (p-1)^{2I}(2Ip + 1) ]
    let bracket = poly_add(
        &poly_mul(&[-1, ti as i128], &binomial_shift(ti, 1)),
        &poly_mul(&[1, ti as i128], &binomial_shift(ti, -1))
            .iter()
            .map(|&c| -c)
            .collect::<Vec<_>>(),
    );
    let num_b = poly_mul(&[-1, 0, 1], &bracket);

    // pad to common length for the shared-denominator evaluation
    let len = num_a.len().max(num_b.len()).max(den.len());
    den.resize(len, 0);

    (
        eval_reduced_ratio(&num_a, &den, p),
        eval_reduced_ratio(&num_b, &den, p),
    )
}

/// Equal-time spherical covariance for the `|M| = 1` block.
#[derive(Clone, Debug)]
pub struct CovarianceBlock {
    /// `<T_{L,+1} T_{L',-1}>` block (symmetrized), dim x dim, real.
    pub sigma: Array2<f64>,
    /// Block anti-diagonal `[[0, Sigma], [Sigma, 0]]`, 2dim x 2dim.
    pub r0: Array2<f64>,
}

/// Computes the covariance entries from the explicit Clebsch-Gordan sums
/// and assembles the block anti-diagonal equal-time matrix.
pub fn equal_time_covariance(state: &SpinTempState, layout: &MultipoleLayout) -> CovarianceBlock {
    assert_eq!(layout.m.abs(), 1, "covariance is built for the |M| = 1 block");
    let i = state.nuclear_spin;
    let beta = state.beta;
    let z = partition_z(i.to_f64(), beta) * partition_z(0.5, beta);
    let d = layout.dim();

    // population weight of |F m>: sum_{m_i + m_s = m} [C]^2 e^{beta m}
    let weight = |f: HalfInt, m: HalfInt| -> f64 {
        let mut acc = 0.0;
        let mut tmi = -i.twice();
        while tmi <= i.twice() {
            for tms in [-1, 1] {
                let mi = HalfInt::from_twice(tmi);
                let ms = HalfInt::from_twice(tms);
                if mi + ms == m {
                    let c = cg(i, mi, HalfInt::HALF, ms, f, m);
                    acc += c * c;
                }
            }
            tmi += 2;
        }
        acc * (beta * m.to_f64()).exp()
    };

    let one = HalfInt::from_int(1);
    let mut s_pm = Array2::<f64>::zeros((d, d)); // <T_{L,+1} T_{L',-1}>
    let mut s_mp = Array2::<f64>::zeros((d, d)); // <T_{L,-1} T_{L',+1}>
    for (r, &(l, f)) in layout.slots.iter().enumerate() {
        for (c, &(lp, fp)) in layout.slots.iter().enumerate() {
            if f != fp {
                continue;
            }
            let (l_h, lp_h) = (HalfInt::from_int(l), HalfInt::from_int(lp));
            let mut acc_pm = 0.0;
            let mut acc_mp = 0.0;
            let mut tm = -f.twice();
            while tm <= f.twice() {
                let m = HalfInt::from_twice(tm);
                let w = weight(f, m) / z;
                acc_pm +=
                    cg(f, m, f, one - m, l_h, one) * cg(f, m - one, f, -m, lp_h, -one) * w;
                acc_mp +=
                    cg(f, m, f, -one - m, l_h, -one) * cg(f, m + one, f, -m, lp_h, one) * w;
                tm += 2;
            }
            s_pm[(r, c)] = -acc_pm;
            s_mp[(r, c)] = -acc_mp;
        }
    }

    // Symmetrized covariance between x_r = T_{L,+1} and x_c = T_{L',-1}:
    // (<x_r x_c> + <x_c x_r>)/2; the two CG sums are each other's transpose
    // up to rounding, so this is a consistency average.
    let sigma = (&s_pm + &s_mp.t()).mapv(|x| 0.5 * x);

    let mut r0 = Array2::<f64>::zeros((2 * d, 2 * d));
    for r in 0..d {
        for c in 0..d {
            r0[(r, d + c)] = sigma[(r, c)];
            r0[(d + r, c)] = sigma[(c, r)];
        }
    }
    CovarianceBlock { sigma, r0 }
}
