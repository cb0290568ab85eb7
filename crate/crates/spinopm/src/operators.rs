//! Matrix representations on the ground-state hyperfine Hilbert space:
//! coupled/uncoupled bases, spherical tensor operators, collective spin
//! matrices, the multipole state-vector layout and the spherical-to-Cartesian
//! projection matrices.

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;

use crate::angular::{cg, HalfInt};

type C64 = Complex64;

#[derive(Debug, thiserror::Error)]
pub enum OperatorError {
    #[error("tensor rank {l} violates the triangle rule for ({f}, {fp})")]
    BadTriangle { l: i32, f: HalfInt, fp: HalfInt },
    #[error("|M| = {m} exceeds rank {l}")]
    BadComponent { l: i32, m: i32 },
}

/// Ground-state Hilbert space for one alkali atom: nuclear spin `I` coupled
/// to the electron spin 1/2.
///
/// Coupled basis states are ordered manifold `a = I + 1/2` first, then
/// `b = I - 1/2`, with `m` ascending inside each manifold. Uncoupled product
/// states `|m_I> ⊗ |m_S>` are ordered `m_I` ascending (outer) and `m_S`
/// ascending (inner), matching a nuclear ⊗ electron Kronecker product.
#[derive(Clone, Debug)]
pub struct HilbertBasis {
    pub nuclear_spin: HalfInt,
    pub dim: usize,
    pub coupled: Vec<(HalfInt, HalfInt)>,
    pub uncoupled: Vec<(HalfInt, HalfInt)>,
    /// Real orthogonal change of basis; `u[(c, u)] = <m_I m_S | F m>`.
    u: Array2<f64>,
}

impl HilbertBasis {
    pub fn new(nuclear_spin: HalfInt) -> Self {
        let i = nuclear_spin;
        let s = HalfInt::HALF;
        let a = i + s;
        let b = i - s;
        let dim = 2 * i.multiplicity() as usize;

        let mut coupled = Vec::with_capacity(dim);
        for &f in &[a, b] {
            if f.twice() < 0 {
                continue;
            }
            let mut tm = -f.twice();
            while tm <= f.twice() {
                coupled.push((f, HalfInt::from_twice(tm)));
                tm += 2;
            }
        }
        let mut uncoupled = Vec::with_capacity(dim);
        let mut tmi = -i.twice();
        while tmi <= i.twice() {
            for tms in [-1, 1] {
                uncoupled.push((HalfInt::from_twice(tmi), HalfInt::from_twice(tms)));
            }
            tmi += 2;
        }

        let mut u = Array2::<f64>::zeros((dim, dim));
        for (ci, &(f, m)) in coupled.iter().enumerate() {
            for (ui, &(mi, ms)) in uncoupled.iter().enumerate() {
                u[(ci, ui)] = cg(i, mi, s, ms, f, m);
            }
        }

        HilbertBasis {
            nuclear_spin,
            dim,
            coupled,
            uncoupled,
            u,
        }
    }

    pub fn manifold_a(&self) -> HalfInt {
        self.nuclear_spin + HalfInt::HALF
    }

    pub fn manifold_b(&self) -> HalfInt {
        self.nuclear_spin - HalfInt::HALF
    }

    /// Transforms an operator given in the uncoupled product basis into the
    /// coupled |F m> basis.
    pub fn to_coupled(&self, op: &Array2<C64>) -> Array2<C64> {
        let u = self.u_complex();
        u.dot(op).dot(&u.t())
    }

    /// Inverse of [`Self::to_coupled`].
    pub fn to_uncoupled(&self, op: &Array2<C64>) -> Array2<C64> {
        let u = self.u_complex();
        u.t().dot(op).dot(&u)
    }

    fn u_complex(&self) -> Array2<C64> {
        self.u.mapv(|x| C64::new(x, 0.0))
    }
}

/// Spherical tensor `T_LM(FF')` represented in the coupled basis.
#[derive(Clone, Debug)]
pub struct TensorOp {
    pub l: i32,
    pub m: i32,
    pub f: HalfInt,
    pub fp: HalfInt,
    pub matrix: Array2<C64>,
}

/// Builds `T_LM(FF')` elementwise:
/// `T = sum_m |F m><F' m-M| (-1)^{m-M-F'} C^{LM}_{Fm; F'(M-m)}`.
pub fn tensor_matrix(
    basis: &HilbertBasis,
    l: i32,
    m: i32,
    f: HalfInt,
    fp: HalfInt,
) -> Result<TensorOp, OperatorError> {
    let l_h = HalfInt::from_int(l);
    if !HalfInt::triangle(f, fp, l_h) {
        return Err(OperatorError::BadTriangle { l, f, fp });
    }
    if m.abs() > l {
        return Err(OperatorError::BadComponent { l, m });
    }
    let m_h = HalfInt::from_int(m);
    let mut mat = Array2::<C64>::zeros((basis.dim, basis.dim));
    for (ri, &(fr, mr)) in basis.coupled.iter().enumerate() {
        if fr != f {
            continue;
        }
        let mc = mr - m_h;
        for (ci, &(fc, mcol)) in basis.coupled.iter().enumerate() {
            if fc != fp || mcol != mc {
                continue;
            }
            // (-1)^{m - M - F'} with an integer exponent
            let expo = (mr.twice() - m_h.twice() - fp.twice()) / 2;
            let sign = if expo.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let coef = cg(f, mr, fp, m_h - mr, l_h, m_h);
            mat[(ri, ci)] = C64::new(sign * coef, 0.0);
        }
    }
    Ok(TensorOp {
        l,
        m,
        f,
        fp,
        matrix: mat,
    })
}

/// Angular momentum matrices (x, y, z) for a single spin `j`, basis states
/// `|m>` ordered by ascending `m`.
pub fn spin_matrices(j: HalfInt) -> (Array2<C64>, Array2<C64>, Array2<C64>) {
    let dim = j.multiplicity() as usize;
    let jf = j.to_f64();
    let mut jp = Array2::<C64>::zeros((dim, dim));
    let mut jz = Array2::<C64>::zeros((dim, dim));
    for k in 0..dim {
        let m = -jf + k as f64;
        jz[(k, k)] = C64::new(m, 0.0);
        if k + 1 < dim {
            // J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>
            jp[(k + 1, k)] = C64::new((jf * (jf + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let jm = jp.t().mapv(|x| x.conj());
    let jx = (&jp + &jm).mapv(|x| 0.5 * x);
    let jy = (&jp - &jm).mapv(|x| C64::new(0.0, -0.5) * x);
    (jx, jy, jz)
}

/// Collective spin component (x, y or z) restricted to one hyperfine
/// manifold, in the coupled basis: `P_F J_axis P_F`.
pub fn collective_f(basis: &HilbertBasis, axis: usize, f: HalfInt) -> Array2<C64> {
    let (fx, fy, fz) = spin_matrices(f);
    let sub = match axis {
        0 => fx,
        1 => fy,
        _ => fz,
    };
    let mut mat = Array2::<C64>::zeros((basis.dim, basis.dim));
    let offset = basis
        .coupled
        .iter()
        .position(|&(ff, _)| ff == f)
        .expect("manifold not present in basis");
    let n = f.multiplicity() as usize;
    for r in 0..n {
        for c in 0..n {
            mat[(offset + r, offset + c)] = sub[(r, c)];
        }
    }
    mat
}

/// Choice of multipole slot enumeration for the `|M| = 1` state vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutConvention {
    /// All physically allowed multipoles: `aa` up to `L = 2I+1`, `bb` up to
    /// `L = 2I-1`.
    Physical,
    /// Literal reading of the interleaved list with `L = 1..2I` for both
    /// manifolds; includes a phantom `(2I, bb)` slot and omits `(2I+1, aa)`.
    PaperTruncated,
}

/// Ordered slot list for the multipole vector at azimuthal index `M`.
#[derive(Clone, Debug)]
pub struct MultipoleLayout {
    pub nuclear_spin: HalfInt,
    pub m: i32,
    pub convention: LayoutConvention,
    pub slots: Vec<(i32, HalfInt)>,
    index: HashMap<(i32, i32), usize>,
}

impl MultipoleLayout {
    pub fn new(nuclear_spin: HalfInt, m: i32, convention: LayoutConvention) -> Self {
        let a = nuclear_spin + HalfInt::HALF;
        let b = nuclear_spin - HalfInt::HALF;
        let l_min = 1.max(m.abs());
        let mut slots = Vec::new();
        match convention {
            LayoutConvention::Physical => {
                for l in l_min..=a.twice() {
                    for &f in &[a, b] {
                        if f.twice() >= 0 && l <= f.twice() {
                            slots.push((l, f));
                        }
                    }
                }
            }
            LayoutConvention::PaperTruncated => {
                for l in l_min..=(a.twice() - 1) {
                    slots.push((l, a));
                    slots.push((l, b));
                }
            }
        }
        let index = slots
            .iter()
            .enumerate()
            .map(|(i, &(l, f))| ((l, f.twice()), i))
            .collect();
        MultipoleLayout {
            nuclear_spin,
            m,
            convention,
            slots,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, l: i32, f: HalfInt) -> Option<usize> {
        self.index.get(&(l, f.twice())).copied()
    }

    /// The 2x2 diagonal weight matrix carrying the rank-1 spherical to
    /// Cartesian conversion factors `sqrt(F(F+1)(2F+1))/(2 sqrt(3))` for the
    /// two manifolds.
    pub fn m_frak(&self) -> Array2<f64> {
        let i = self.nuclear_spin.to_f64();
        let wa = ((i + 1.0) * (2.0 * i + 1.0) * (2.0 * i + 3.0)).sqrt() / (2.0 * 3.0_f64.sqrt());
        let wb = (i * (2.0 * i - 1.0) * (2.0 * i + 1.0)).sqrt() / (2.0 * 3.0_f64.sqrt());
        let mut m = Array2::<f64>::zeros((2, 2));
        m[(0, 0)] = wa;
        m[(1, 1)] = wb;
        m
    }

    /// `[ m_frak | 0 ]`, 2 x dim, selecting the rank-1 slots.
    pub fn m_tilde(&self) -> Array2<C64> {
        let mf = self.m_frak();
        let mut m = Array2::<C64>::zeros((2, self.dim()));
        m[(0, 0)] = C64::new(mf[(0, 0)], 0.0);
        m[(1, 1)] = C64::new(mf[(1, 1)], 0.0);
        m
    }

    /// Change of basis from `[T_{+1}; T_{-1}]` to
    /// `[F_x(aa), F_x(bb), F_y(aa), F_y(bb)]`.
    pub fn m_cart(&self) -> Array2<C64> {
        let d = self.dim();
        let mf = self.m_frak();
        let mut m = Array2::<C64>::zeros((4, 2 * d));
        for k in 0..2 {
            let w = mf[(k, k)];
            // F_x rows: -m_frak on the +1 block, +m_frak on the -1 block
            m[(k, k)] = C64::new(-w, 0.0);
            m[(k, d + k)] = C64::new(w, 0.0);
            // F_y rows: i m_frak on both blocks
            m[(2 + k, k)] = C64::new(0.0, w);
            m[(2 + k, d + k)] = C64::new(0.0, w);
        }
        m
    }
}

fn hs_overlap(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    // Tr[a^dag b]
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc
}

/// `X_Lambda(FF')` from the explicit Hilbert-Schmidt overlap of `T(FF')`
/// with the nuclear-tensor product operator; independent route to the 9j
/// closed form in `angular`.
pub fn ht_overlap_x(basis: &HilbertBasis, lambda: i32, f: HalfInt, fp: HalfInt) -> f64 {
    let i = basis.nuclear_spin;
    let nb = single_spin_basis(i);
    let sb = single_spin_basis(HalfInt::HALF);
    let mu = 0;
    let tn = tensor_matrix(&nb, lambda, mu, i, i).expect("nuclear tensor");
    let ts = tensor_matrix(&sb, 0, 0, HalfInt::HALF, HalfInt::HALF).expect("electron identity");
    let unc = ndarray::linalg::kron(&tn.matrix, &ts.matrix);
    let product = basis.to_coupled(&unc);
    match tensor_matrix(basis, lambda, mu, f, fp) {
        Ok(t) => hs_overlap(&t.matrix, &product).re,
        Err(_) => 0.0,
    }
}

/// `Y_L(FF')` from the overlap with the electron-tensor product operator.
pub fn ht_overlap_y(basis: &HilbertBasis, l: i32, f: HalfInt, fp: HalfInt) -> f64 {
    let i = basis.nuclear_spin;
    let nb = single_spin_basis(i);
    let sb = single_spin_basis(HalfInt::HALF);
    let m = 0;
    let tn = tensor_matrix(&nb, 0, 0, i, i).expect("nuclear identity");
    let ts = tensor_matrix(&sb, l, m, HalfInt::HALF, HalfInt::HALF).expect("electron tensor");
    let unc = ndarray::linalg::kron(&tn.matrix, &ts.matrix);
    let product = basis.to_coupled(&unc);
    match tensor_matrix(basis, l, m, f, fp) {
        Ok(t) => hs_overlap(&t.matrix, &product).re,
        Err(_) => 0.0,
    }
}

/// Degenerate "basis" for a single spin: the coupled machinery reused with
/// F = j only, so `tensor_matrix` can build single-spin tensors.
fn single_spin_basis(j: HalfInt) -> HilbertBasis {
    let dim = j.multiplicity() as usize;
    let mut coupled = Vec::with_capacity(dim);
    let mut tm = -j.twice();
    while tm <= j.twice() {
        coupled.push((j, HalfInt::from_twice(tm)));
        tm += 2;
    }
    HilbertBasis {
        nuclear_spin: j, // not meaningful here; carried for dim bookkeeping
        dim,
        coupled: coupled.clone(),
        uncoupled: coupled,
        u: Array2::eye(dim),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::ht_coefficients;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    fn all_zeeman_tensors(basis: &HilbertBasis) -> Vec<TensorOp> {
        let mut out = Vec::new();
        for &(f, _) in &[(basis.manifold_a(), 0), (basis.manifold_b(), 0)] {
            for l in 0..=f.twice() {
                for m in -l..=l {
                    out.push(tensor_matrix(basis, l, m, f, f).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn coupled_uncoupled_map_is_orthogonal() {
        for ti in [1, 3, 5, 7] {
            let basis = HilbertBasis::new(h(ti));
            let eye = basis.u.dot(&basis.u.t());
            for r in 0..basis.dim {
                for c in 0..basis.dim {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(eye[(r, c)], want, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn tensor_orthonormality() {
        for ti in [3, 5, 7] {
            let basis = HilbertBasis::new(h(ti));
            let ops = all_zeeman_tensors(&basis);
            for (i1, t1) in ops.iter().enumerate() {
                for (i2, t2) in ops.iter().enumerate() {
                    let ov = hs_overlap(&t1.matrix, &t2.matrix);
                    let want = if i1 == i2 { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(ov.re, want, epsilon = 1e-12);
                    assert_abs_diff_eq!(ov.im, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn hermitian_conjugate_rule() {
        let basis = HilbertBasis::new(h(3));
        let a = basis.manifold_a();
        for l in 0..=4 {
            for m in -l..=l {
                let t = tensor_matrix(&basis, l, m, a, a).unwrap();
                let tm = tensor_matrix(&basis, l, -m, a, a).unwrap();
                let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let lhs = t.matrix.t().mapv(|x| x.conj());
                for (x, y) in lhs.iter().zip(tm.matrix.iter()) {
                    assert_abs_diff_eq!(x.re, sign * y.re, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn rank1_proportional_to_fm() {
        // T_{10}(FF) = sqrt(3/(F(F+1)(2F+1))) F_z
        let basis = HilbertBasis::new(h(3));
        for f in [basis.manifold_a(), basis.manifold_b()] {
            let t = tensor_matrix(&basis, 1, 0, f, f).unwrap();
            let fz = collective_f(&basis, 2, f);
            let ff = f.to_f64();
            let scale = (3.0 / (ff * (ff + 1.0) * (2.0 * ff + 1.0))).sqrt();
            for (x, y) in t.matrix.iter().zip(fz.iter()) {
                assert_abs_diff_eq!(x.re, scale * y.re, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn identity_tensor_normalization() {
        // T_00(jj) = 1/sqrt(2j+1) * identity, exercised on the electron spin
        let sb = single_spin_basis(HalfInt::HALF);
        let t = tensor_matrix(&sb, 0, 0, HalfInt::HALF, HalfInt::HALF).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { 1.0 / 2.0_f64.sqrt() } else { 0.0 };
                assert_abs_diff_eq!(t.matrix[(r, c)].re, want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn manifold_commutators() {
        let basis = HilbertBasis::new(h(3));
        for f in [basis.manifold_a(), basis.manifold_b()] {
            let fx = collective_f(&basis, 0, f);
            let fy = collective_f(&basis, 1, f);
            let fz = collective_f(&basis, 2, f);
            let comm = fx.dot(&fy) - fy.dot(&fx);
            for (x, y) in comm.iter().zip(fz.iter()) {
                assert_abs_diff_eq!(x.re, -y.im, epsilon = 1e-13);
                assert_abs_diff_eq!(x.im, y.re, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn layout_slots_i32() {
        let layout = MultipoleLayout::new(h(3), 1, LayoutConvention::Physical);
        let a = h(4);
        let b = h(2);
        assert_eq!(
            layout.slots,
            vec![(1, a), (1, b), (2, a), (2, b), (3, a), (4, a)]
        );
        assert_eq!(layout.dim(), 6);
        let trunc = MultipoleLayout::new(h(3), 1, LayoutConvention::PaperTruncated);
        assert_eq!(trunc.dim(), 6);
        assert!(trunc.slot(3, b).is_some());
        assert!(trunc.slot(4, a).is_none());
    }

    #[test]
    fn layout_matches_triangle_rules() {
        for ti in [3, 5, 7] {
            let basis = HilbertBasis::new(h(ti));
            let layout = MultipoleLayout::new(h(ti), 1, LayoutConvention::Physical);
            for &(l, f) in &layout.slots {
                let t = tensor_matrix(&basis, l, 1, f, f).unwrap();
                let norm: f64 = t.matrix.iter().map(|x| x.norm_sqr()).sum();
                assert!(norm > 0.5);
            }
            // the excluded (L, bb) slots really are triangle-forbidden
            let b = basis.manifold_b();
            for l in (b.twice() + 1)..=(basis.manifold_a().twice()) {
                assert!(tensor_matrix(&basis, l, 1, b, b).is_err());
            }
        }
    }

    #[test]
    fn cart_projection_is_consistent() {
        let layout = MultipoleLayout::new(h(3), 1, LayoutConvention::Physical);
        let mc = layout.m_cart();
        // M M^dag diagonal with entries 2 w_k^2
        let prod = mc.dot(&mc.t().mapv(|x| x.conj()));
        let mf = layout.m_frak();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c {
                    2.0 * mf[(r % 2, r % 2)].powi(2)
                } else {
                    0.0
                };
                assert_abs_diff_eq!(prod[(r, c)].re, want, epsilon = 1e-13);
                assert_abs_diff_eq!(prod[(r, c)].im, 0.0, epsilon = 1e-13);
            }
        }
        // single-slot propagation: T_{+1}(aa) = 1 maps to F_x = -w, F_y = i...
        let mut v = Array1::<C64>::zeros(2 * layout.dim());
        v[0] = C64::new(1.0, 0.0);
        let f = mc.dot(&v);
        assert_abs_diff_eq!(f[0].re, -mf[(0, 0)], epsilon = 1e-14);
        assert_abs_diff_eq!(f[2].im, mf[(0, 0)], epsilon = 1e-14);
    }

    #[test]
    fn ht_dual_path_agreement() {
        for ti in [3, 5, 7] {
            let i = h(ti);
            let basis = HilbertBasis::new(i);
            let coeffs = ht_coefficients(i);
            let a = basis.manifold_a();
            let b = basis.manifold_b();
            for &f in &[a, b] {
                for &fp in &[a, b] {
                    for lam in 0..=ti {
                        let closed = coeffs.x(lam, f, fp);
                        let overlap = ht_overlap_x(&basis, lam, f, fp);
                        assert_abs_diff_eq!(closed, overlap, epsilon = 1e-12);
                    }
                    for l in 0..=1 {
                        let closed = coeffs.y(l, f, fp);
                        let overlap = ht_overlap_y(&basis, l, f, fp);
                        assert_abs_diff_eq!(closed, overlap, epsilon = 1e-12);
                    }
                }
            }
        }
    }
}
