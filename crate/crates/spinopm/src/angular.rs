//! Angular-momentum algebra: Clebsch-Gordan coefficients, Wigner 6j/9j
//! symbols, Racah W, and the coupled/uncoupled overlap coefficients used in
//! the drift-matrix assembly.
//!
//! Symbols are evaluated with exact rational arithmetic (Racah sums over
//! `BigRational`) and converted to `f64` only at the boundary, so signs and
//! cancellations are exact. Results are memoized; the caches are guarded by
//! `RwLock` and safe to share across workers.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Angular-momentum quantum number stored as `2j`, so half-integers are exact.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    /// Builds from twice the value: `from_twice(3)` is 3/2.
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// `2j + 1`, the multiplicity `[j]`.
    pub const fn multiplicity(self) -> i32 {
        self.0 + 1
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Integer value, if this is an integer angular momentum.
    pub const fn as_int(self) -> Option<i32> {
        if self.0 % 2 == 0 {
            Some(self.0 / 2)
        } else {
            None
        }
    }

    pub const fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// True when `m` is a valid projection of this magnitude: `|m| <= j`
    /// and `j - m` integer.
    pub fn is_projection(self, m: HalfInt) -> bool {
        m.0.abs() <= self.0 && (self.0 - m.0) % 2 == 0
    }

    /// Triangle condition |a-b| <= c <= a+b with integer perimeter.
    pub fn triangle(a: HalfInt, b: HalfInt, c: HalfInt) -> bool {
        (a.0 + b.0 + c.0) % 2 == 0 && c.0 >= (a.0 - b.0).abs() && c.0 <= a.0 + b.0
    }
}

impl fmt::Debug for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AngularError {
    #[error("projection {m} is not valid for magnitude {j}")]
    BadProjection { j: HalfInt, m: HalfInt },
    #[error("negative magnitude {0}")]
    NegativeMagnitude(HalfInt),
}

fn factorial(n: i32) -> BigInt {
    debug_assert!(n >= 0);
    let mut acc = BigInt::one();
    for k in 2..=n as u64 {
        acc *= k;
    }
    acc
}

/// `(-1)^k` for integer `k` given as twice-value (must be even).
fn phase_twice(twice_k: i32) -> i32 {
    debug_assert!(twice_k % 2 == 0);
    if (twice_k / 2) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Squared triangle coefficient Delta^2(abc) as an exact rational.
fn tri_coef_sq(a: HalfInt, b: HalfInt, c: HalfInt) -> Option<BigRational> {
    if !HalfInt::triangle(a, b, c) {
        return None;
    }
    let t1 = (a.0 + b.0 - c.0) / 2;
    let t2 = (a.0 - b.0 + c.0) / 2;
    let t3 = (-a.0 + b.0 + c.0) / 2;
    let t4 = (a.0 + b.0 + c.0) / 2 + 1;
    Some(BigRational::new(
        factorial(t1) * factorial(t2) * factorial(t3),
        factorial(t4),
    ))
}

/// Value of the form `s * sqrt(r)` with `s`, `r` exact rationals, `r >= 0`.
#[derive(Clone, Debug)]
struct SqrtRational {
    coef: BigRational,
    radicand: BigRational,
}

impl SqrtRational {
    fn zero() -> Self {
        SqrtRational {
            coef: BigRational::zero(),
            radicand: BigRational::zero(),
        }
    }

    fn to_f64(&self) -> f64 {
        let c = self.coef.to_f64().unwrap_or(0.0);
        let r = self.radicand.to_f64().unwrap_or(0.0);
        c * r.sqrt()
    }
}

type SymbolCache = RwLock<HashMap<[i32; 6], f64>>;

fn cache_3j() -> &'static SymbolCache {
    static C: OnceLock<SymbolCache> = OnceLock::new();
    C.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cache_6j() -> &'static SymbolCache {
    static C: OnceLock<SymbolCache> = OnceLock::new();
    C.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cache_lookup(cache: &SymbolCache, key: &[i32; 6]) -> Option<f64> {
    cache.read().expect("symbol cache poisoned").get(key).copied()
}

fn cache_store(cache: &SymbolCache, key: [i32; 6], value: f64) {
    cache.write().expect("symbol cache poisoned").insert(key, value);
}

fn wigner_3j_exact(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> SqrtRational {
    if m1.0 + m2.0 + m3.0 != 0 {
        return SqrtRational::zero();
    }
    if !j1.is_projection(m1) || !j2.is_projection(m2) || !j3.is_projection(m3) {
        return SqrtRational::zero();
    }
    let tri = match tri_coef_sq(j1, j2, j3) {
        Some(t) => t,
        None => return SqrtRational::zero(),
    };

    // Racah sum limits in integer units.
    let jpm = |j: HalfInt, m: HalfInt| (j.0 + m.0) / 2;
    let jmm = |j: HalfInt, m: HalfInt| (j.0 - m.0) / 2;

    let t_min = 0
        .max((j2.0 - j3.0 - m1.0) / 2)
        .max((j1.0 - j3.0 + m2.0) / 2);
    let t_max = ((j1.0 + j2.0 - j3.0) / 2)
        .min(jmm(j1, m1))
        .min(jpm(j2, m2));
    if t_min > t_max {
        return SqrtRational::zero();
    }

    let mut sum = BigRational::zero();
    for t in t_min..=t_max {
        let d = factorial(t)
            * factorial((j3.0 - j2.0 + m1.0) / 2 + t)
            * factorial((j3.0 - j1.0 - m2.0) / 2 + t)
            * factorial((j1.0 + j2.0 - j3.0) / 2 - t)
            * factorial(jmm(j1, m1) - t)
            * factorial(jpm(j2, m2) - t);
        let term = BigRational::new(BigInt::one(), d);
        if t % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }

    let prod = factorial(jmm(j1, m1))
        * factorial(jpm(j1, m1))
        * factorial(jmm(j2, m2))
        * factorial(jpm(j2, m2))
        * factorial(jmm(j3, m3))
        * factorial(jpm(j3, m3));
    let radicand = tri * BigRational::from(prod);

    // overall phase (-1)^{j1 - j2 - m3}
    let sign = phase_twice(j1.0 - j2.0 - m3.0);
    SqrtRational {
        coef: sum * BigRational::from(BigInt::from(sign)),
        radicand,
    }
}

/// Wigner 3j symbol. Selection-rule violations give 0.
pub fn wigner_3j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> f64 {
    let key = [j1.0, j2.0, j3.0, m1.0, m2.0, m3.0];
    if let Some(v) = cache_lookup(cache_3j(), &key) {
        return v;
    }
    let v = wigner_3j_exact(j1, j2, j3, m1, m2, m3).to_f64();
    cache_store(cache_3j(), key, v);
    v
}

/// Clebsch-Gordan coefficient `C^{JM}_{j1 m1; j2 m2}` in the
/// Condon-Shortley convention. Selection-rule violations give 0; malformed
/// arguments (negative magnitude, `j - m` non-integer) are an error.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64, AngularError> {
    for &jj in &[j1, j2, j] {
        if jj.0 < 0 {
            return Err(AngularError::NegativeMagnitude(jj));
        }
    }
    for &(jj, mm) in &[(j1, m1), (j2, m2), (j, m)] {
        if mm.0.abs() > jj.0 || (jj.0 - mm.0) % 2 != 0 {
            return Err(AngularError::BadProjection { j: jj, m: mm });
        }
    }
    Ok(cg(j1, m1, j2, m2, j, m))
}

/// Clebsch-Gordan coefficient without argument validation; invalid
/// projections simply give 0.
pub fn cg(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    if m1.0 + m2.0 != m.0 {
        return 0.0;
    }
    // C = (-1)^{j1-j2+M} sqrt(2J+1) * 3j(j1 j2 J; m1 m2 -M)
    let s = phase_twice(j1.0 - j2.0 + m.0) as f64;
    s * ((j.0 + 1) as f64).sqrt() * wigner_3j(j1, j2, j, m1, m2, -m)
}

fn wigner_6j_exact(
    a: HalfInt,
    b: HalfInt,
    c: HalfInt,
    d: HalfInt,
    e: HalfInt,
    f: HalfInt,
) -> SqrtRational {
    let triads = [
        tri_coef_sq(a, b, c),
        tri_coef_sq(a, e, f),
        tri_coef_sq(d, b, f),
        tri_coef_sq(d, e, c),
    ];
    let mut radicand = BigRational::one();
    for t in triads {
        match t {
            Some(t) => radicand *= t,
            None => return SqrtRational::zero(),
        }
    }

    let abc = (a.0 + b.0 + c.0) / 2;
    let aef = (a.0 + e.0 + f.0) / 2;
    let dbf = (d.0 + b.0 + f.0) / 2;
    let dec = (d.0 + e.0 + c.0) / 2;
    let abde = (a.0 + b.0 + d.0 + e.0) / 2;
    let bcef = (b.0 + c.0 + e.0 + f.0) / 2;
    let acdf = (a.0 + c.0 + d.0 + f.0) / 2;

    let k_min = abc.max(aef).max(dbf).max(dec);
    let k_max = abde.min(bcef).min(acdf);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let num = factorial(k + 1);
        let den = factorial(k - abc)
            * factorial(k - aef)
            * factorial(k - dbf)
            * factorial(k - dec)
            * factorial(abde - k)
            * factorial(bcef - k)
            * factorial(acdf - k);
        let term = BigRational::new(num, den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    SqrtRational {
        coef: sum,
        radicand,
    }
}

/// Wigner 6j symbol `{a b c; d e f}`. Triangle violations give 0.
pub fn wigner_6j(a: HalfInt, b: HalfInt, c: HalfInt, d: HalfInt, e: HalfInt, f: HalfInt) -> f64 {
    let key = [a.0, b.0, c.0, d.0, e.0, f.0];
    if let Some(v) = cache_lookup(cache_6j(), &key) {
        return v;
    }
    let v = wigner_6j_exact(a, b, c, d, e, f).to_f64();
    cache_store(cache_6j(), key, v);
    v
}

/// Racah W coefficient, `W(abcd; ef) = (-1)^{a+b+c+d} {a b e; d c f}`.
pub fn racah_w(a: HalfInt, b: HalfInt, c: HalfInt, d: HalfInt, e: HalfInt, f: HalfInt) -> f64 {
    phase_twice(a.0 + b.0 + c.0 + d.0) as f64 * wigner_6j(a, b, e, d, c, f)
}

/// Wigner 9j symbol via the standard single sum over 6j products.
#[allow(clippy::too_many_arguments)]
pub fn wigner_9j(
    a: HalfInt,
    b: HalfInt,
    c: HalfInt,
    d: HalfInt,
    e: HalfInt,
    f: HalfInt,
    g: HalfInt,
    h: HalfInt,
    i: HalfInt,
) -> f64 {
    let x_min = (a.0 - i.0).abs().max((b.0 - f.0).abs()).max((d.0 - h.0).abs());
    let x_max = (a.0 + i.0).min(b.0 + f.0).min(d.0 + h.0);
    let mut sum = 0.0;
    let mut tx = x_min;
    while tx <= x_max {
        let x = HalfInt(tx);
        let term = (tx + 1) as f64
            * wigner_6j(a, b, c, f, i, x)
            * wigner_6j(d, e, f, b, x, h)
            * wigner_6j(g, h, i, x, a, d);
        // (-1)^{2x}
        let sign = if tx % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * term;
        tx += 2;
    }
    sum
}

/// 9j symbol with the row structure `{I S F; I S F'; L1 L2 L3}` that appears
/// in every coupled/uncoupled conversion here.
fn conversion_9j(
    i: HalfInt,
    f: HalfInt,
    fp: HalfInt,
    l1: HalfInt,
    l2: HalfInt,
    l3: HalfInt,
) -> f64 {
    wigner_9j(i, HalfInt::HALF, f, i, HalfInt::HALF, fp, l1, l2, l3)
}

/// Overlap coefficients between the coupled spherical tensors
/// `T_{LM}(FF')` and the uncoupled (nuclear x electron) tensor products.
///
/// * `X_L(FF')` — overlap of `T_LM(FF')` with the purely nuclear rank-`L`
///   tensor.
/// * `Y_L(FF')` — overlap with the purely electronic rank-`L` tensor
///   (`L <= 1` for S = 1/2).
/// * `Z_L(lambda, F)`, `Z'_L(lambda, F)` — the drift-assembly combinations
///   of a Clebsch-Gordan factor with the conversion 9j symbol; nonzero only
///   for `lambda = L +- 1`.
#[derive(Clone, Debug)]
pub struct CouplingCoeffs {
    pub nuclear_spin: HalfInt,
    /// key: (2*lambda, 2F, 2F')
    x: HashMap<(i32, i32, i32), f64>,
    /// key: (2L, 2F, 2F')
    y: HashMap<(i32, i32, i32), f64>,
    /// key: (2*lambda, 2L, 2F)
    z: HashMap<(i32, i32, i32), f64>,
    zp: HashMap<(i32, i32, i32), f64>,
}

impl CouplingCoeffs {
    pub fn x(&self, lambda: i32, f: HalfInt, fp: HalfInt) -> f64 {
        *self.x.get(&(2 * lambda, f.0, fp.0)).unwrap_or(&0.0)
    }

    pub fn y(&self, l: i32, f: HalfInt, fp: HalfInt) -> f64 {
        *self.y.get(&(2 * l, f.0, fp.0)).unwrap_or(&0.0)
    }

    pub fn z(&self, lambda: i32, l: i32, f: HalfInt) -> f64 {
        *self.z.get(&(2 * lambda, 2 * l, f.0)).unwrap_or(&0.0)
    }

    pub fn zp(&self, lambda: i32, l: i32, f: HalfInt) -> f64 {
        *self.zp.get(&(2 * lambda, 2 * l, f.0)).unwrap_or(&0.0)
    }
}

/// Computes all overlap coefficients for nuclear spin `I` from the 9j
/// closed forms. The equivalent Hilbert-Schmidt matrix-overlap route lives
/// in `operators::ht_overlap_*` and must agree with this one.
pub fn ht_coefficients(nuclear_spin: HalfInt) -> CouplingCoeffs {
    let i = nuclear_spin;
    let a = i + HalfInt::HALF;
    let b = i - HalfInt::HALF;
    let manifolds = if b.0 >= 0 { vec![a, b] } else { vec![a] };
    let mult_i = i.multiplicity() as f64;

    let mut x = HashMap::new();
    let mut y = HashMap::new();
    let mut z = HashMap::new();
    let mut zp = HashMap::new();

    for &f in &manifolds {
        for &fp in &manifolds {
            // X_lambda(FF'): nuclear tensor overlap, 0 <= lambda <= 2I.
            for lam in 0..=i.0 {
                let lam_h = HalfInt::from_int(lam);
                if !HalfInt::triangle(f, fp, lam_h) {
                    continue;
                }
                let mult = ((2 * lam + 1) * f.multiplicity() * fp.multiplicity()) as f64;
                let val = mult.sqrt() * conversion_9j(i, f, fp, lam_h, HalfInt::ZERO, lam_h);
                x.insert((2 * lam, f.0, fp.0), val);
            }
            // Y_L(FF'): electronic tensor overlap, L in {0, 1}.
            for l in 0..=1 {
                let l_h = HalfInt::from_int(l);
                if l > 0 && !HalfInt::triangle(f, fp, l_h) {
                    continue;
                }
                let mult = ((2 * l + 1) * f.multiplicity() * fp.multiplicity()) as f64;
                let val = mult.sqrt() * conversion_9j(i, f, fp, HalfInt::ZERO, l_h, l_h);
                y.insert((2 * l, f.0, fp.0), val);
            }
        }
    }

    // Z and Z' for every rank L a multipole can take and lambda = L +- 1.
    let l_max = a.0; // 2a/2 * 2 = 2F_max as integer rank
    for &f in &manifolds {
        for l in 1..=l_max {
            let l_h = HalfInt::from_int(l);
            for lam in [l - 1, l + 1] {
                if lam < 0 {
                    continue;
                }
                let lam_h = HalfInt::from_int(lam);
                let nine = conversion_9j(i, f, f, lam_h, HalfInt::ONE, l_h);
                let pref = f.multiplicity() as f64
                    * (6.0 * mult_i).sqrt()
                    * ((2 * lam + 1) as f64).sqrt();
                // M = +1 used here; the lambda = L +- 1 selection rule makes
                // both combinations M-independent.
                let m1 = HalfInt::from_int(1);
                let c_z = cg(lam_h, HalfInt::ZERO, HalfInt::ONE, m1, l_h, m1);
                let c_zp = cg(lam_h, m1, HalfInt::ONE, HalfInt::ZERO, l_h, m1);
                z.insert((2 * lam, 2 * l, f.0), pref * c_z * nine);
                zp.insert((2 * lam, 2 * l, f.0), pref * c_zp * nine);
            }
        }
    }

    CouplingCoeffs {
        nuclear_spin,
        x,
        y,
        z,
        zp,
    }
}
