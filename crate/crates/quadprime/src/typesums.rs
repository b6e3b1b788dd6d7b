//! Product-form weights `f ⊠_ℓ f′`, the headline prime sums (Prop 4.1 /
//! Prop 8.2), Type I/II sum evaluators (Def 3.1), and the local density
//! σ(S₁,S₂) of §8.4–8.5 with brute-force verification.

use crate::arith::{is_prime_64, kronecker, lambda_prime, von_mangoldt};
use crate::cramer::{lambda_cramer_int, lambda_sharp_flat, CramerParams};
use crate::gowers::ArithFunction;
use crate::idealmach::{FormalIdeal, IdealFactory, PrincipalIndex};
use crate::quadfield::FieldInvariants;
use crate::{Error, Kahan, KahanC, Result};
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use rayon::prelude::*;

/// χ_∞^{(ℓ)}(x + y√−n) = (z/|z|)^ℓ (Eq. chi-infinity-def), with the
/// embedding √−n ↦ i√n. Negative ℓ via conjugation, so that
/// χ^{(−ℓ)} = conj(χ^{(ℓ)}) holds exactly in floating point.
pub fn chi_infinity(x: i64, y: i64, inv: &FieldInvariants, ell: i64) -> Result<Complex64> {
    if x == 0 && y == 0 {
        return Err(Error::Domain("χ_∞ undefined at the origin".into()));
    }
    if ell.unsigned_abs() > 1024 {
        return Err(Error::Capacity(format!("frequency |ℓ| = {} too large", ell)));
    }
    let z = Complex64::new(x as f64, y as f64 * (inv.n as f64).sqrt());
    let mut u = z / z.norm();
    if ell < 0 {
        u = u.conj();
    }
    Ok(u.powu(ell.unsigned_abs() as u32))
}

/// Weight choices for the headline sums: Λ′, Λ (symmetrized like Λ′),
/// Λ_Cramér, Λ^♯, or an explicit table.
#[derive(Debug, Clone)]
pub enum WeightChoice {
    LambdaPrime,
    VonMangoldt,
    Cramer(CramerParams),
    Sharp(CramerParams),
    Table(ArithFunction),
}

impl WeightChoice {
    pub fn eval(&self, x: i64) -> Complex64 {
        let r = match self {
            WeightChoice::LambdaPrime => lambda_prime(x),
            WeightChoice::VonMangoldt => von_mangoldt(x.unsigned_abs()),
            WeightChoice::Cramer(p) => lambda_cramer_int(x, p),
            WeightChoice::Sharp(p) => lambda_sharp_flat(x, p).0,
            WeightChoice::Table(f) => return f.eval(x),
        };
        Complex64::new(r, 0.0)
    }
}

const HEADLINE_X_MAX: u64 = 10_000_000_000;

/// Σ_{0 < x² + ny² ≤ X} χ_∞^{(ℓ)}(x + y√−n) f(x) f′(y) 1_{x² + ny² prime}
/// (the LHS of Prop 4.1 with pluggable weights). Exact enumeration; the
/// pair (x, y) and its negation are combined so that odd ℓ with symmetric
/// weights cancels exactly.
pub fn headline_sum(
    inv: &FieldInvariants,
    x_limit: u64,
    ell: i64,
    fx: &WeightChoice,
    fy: &WeightChoice,
) -> Result<Complex64> {
    if x_limit > HEADLINE_X_MAX {
        return Err(Error::Capacity(format!(
            "headline X = {x_limit} exceeds guard {HEADLINE_X_MAX}"
        )));
    }
    let n = inv.n;
    let x_hi = crate::arith::integer_kth_root(x_limit, 2) as i64;
    let y_hi = crate::arith::integer_kth_root(x_limit / n, 2) as i64;
    let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
    // Nonzero-weight abscissae for the half-plane reduction: for x ≥ 0 we
    // pair (x, y) with (−x, −y).
    let xs: Vec<(i64, Complex64, Complex64)> = (0..=x_hi)
        .filter_map(|x| {
            let (a, b) = (fx.eval(x), fx.eval(-x));
            (a.norm() != 0.0 || b.norm() != 0.0).then_some((x, a, b))
        })
        .collect();
    let ys: Vec<(i64, Complex64, Complex64)> = (-y_hi..=y_hi)
        .filter_map(|y| {
            let (a, b) = (fy.eval(y), fy.eval(-y));
            (a.norm() != 0.0 || b.norm() != 0.0).then_some((y, a, b))
        })
        .collect();
    let stripes: Vec<Result<Complex64>> = xs
        .par_chunks(8)
        .map(|chunk| {
            let mut acc = KahanC::new();
            for &(x, fx_pos, fx_neg) in chunk {
                for &(y, fy_pos, fy_neg) in &ys {
                    // Half-plane: x > 0 arbitrary y; x = 0 requires y > 0.
                    if x == 0 && y <= 0 {
                        continue;
                    }
                    let t = (x as u64) * (x as u64) + n * (y.unsigned_abs() * y.unsigned_abs());
                    if t == 0 || t > x_limit || !is_prime_64(t) {
                        continue;
                    }
                    let bracket = fx_pos * fy_pos + sign * fx_neg * fy_neg;
                    if bracket.norm() == 0.0 {
                        continue;
                    }
                    acc.add(chi_infinity(x, y, inv, ell)? * bracket);
                }
            }
            Ok(acc.value())
        })
        .collect();
    let mut total = KahanC::new();
    for s in stripes {
        total.add(s?);
    }
    Ok(total.value())
}

/// (log X) · Σ χ_∞^{(ℓ)} Λ^♯(x) Λ^♯(y) 1_{x²+ny² prime} (Prop 8.2 LHS),
/// with the Cramér parameters derived from X. Real by the y ↔ −y symmetry
/// of Λ^♯; a non-negligible imaginary part is an identity failure.
pub fn main_term_sum(inv: &FieldInvariants, x_limit: u64, ell: i64) -> Result<f64> {
    let params = CramerParams::from_x(x_limit as f64)?;
    let w = WeightChoice::Sharp(params);
    let s = headline_sum(inv, x_limit, ell, &w, &w)?;
    if s.im.abs() > 1e-9 * (1.0 + s.re.abs()) {
        return Err(Error::Identity(format!(
            "main term has imaginary part {} at X = {x_limit}, ℓ = {ell}",
            s.im
        )));
    }
    Ok((x_limit as f64).ln() * s.re)
}

/// A product-form weight w = f ⊠_ℓ f′ (Def 2.2): supported on principal
/// ideals, with w(𝔞) = Σ_{(x+y√−n)=𝔞} χ_∞^{(ℓ)}(x+y√−n) f(x) f′(y).
pub struct ProductWeight {
    pub f: ArithFunction,
    pub f_prime: ArithFunction,
    pub ell: i64,
}

impl ProductWeight {
    pub fn is_one_bounded(&self) -> bool {
        self.f.is_one_bounded(1e-12) && self.f_prime.is_one_bounded(1e-12)
    }

    /// Evaluate on an ideal via the generator index (0 off the principal
    /// ideals).
    pub fn eval(
        &self,
        ideal: &FormalIdeal,
        inv: &FieldInvariants,
        index: &PrincipalIndex,
    ) -> Result<Complex64> {
        let Some(pairs) = index.map.get(ideal) else {
            return Ok(Complex64::new(0.0, 0.0));
        };
        let mut acc = KahanC::new();
        for &(x, y) in pairs {
            let v = self.f.eval(x) * self.f_prime.eval(y);
            if v.norm() != 0.0 {
                acc.add(chi_infinity(x, y, inv, self.ell)? * v);
            }
        }
        Ok(acc.value())
    }

    /// sup over indexed ideals of |w(𝔞)|.
    pub fn norm_inf(&self, inv: &FieldInvariants, index: &PrincipalIndex) -> Result<f64> {
        let mut best = 0.0f64;
        let mut keys: Vec<&FormalIdeal> = index.map.keys().collect();
        keys.sort();
        for ideal in keys {
            best = best.max(self.eval(ideal, inv, index)?.norm());
        }
        Ok(best)
    }
}

/// Type I sum of Def 3.1 / Eq. typeI-def at a single dyadic scale:
/// Σ_{𝔡 : N𝔡 ∈ [L, 2L)} |Σ_{𝔡 | 𝔞, N𝔞 ≤ X} w(𝔞)|, returned with the
/// trivial bound X·‖w‖_∞ for savings measurement.
pub fn type_i_sum(
    w: &ProductWeight,
    inv: &FieldInvariants,
    factory: &IdealFactory,
    index: &PrincipalIndex,
    l: u64,
    x: u64,
) -> Result<(f64, f64)> {
    if x > index.x_max {
        return Err(Error::State(format!(
            "index built to {} but X = {x} requested",
            index.x_max
        )));
    }
    let trivial = x as f64 * w.norm_inf(inv, index)?;
    if l > x {
        return Ok((0.0, trivial));
    }
    let divisors: Vec<FormalIdeal> = factory
        .enumerate_ideals((2 * l - 1).min(x))?
        .into_iter()
        .filter(|d| {
            let nd = d.norm();
            nd >= l as u128 && nd < 2 * l as u128
        })
        .collect();
    let mut acc = Kahan::new();
    for d in &divisors {
        let cofactor_limit = (x as u128 / d.norm()) as u64;
        let mut inner = KahanC::new();
        for b in factory.enumerate_ideals(cofactor_limit)? {
            inner.add(w.eval(&d.mul(&b), inv, index)?);
        }
        acc.add(inner.value().norm());
    }
    Ok((acc.value(), trivial))
}

/// Pluggable 1-bounded coefficient sequences for Type II sums.
#[derive(Debug, Clone)]
pub enum CoeffSource {
    Constant(Complex64),
    /// μ(N𝔞) (0 when the norm exceeds 64 bits).
    MoebiusNorm,
    /// Deterministic seeded unimodular phases keyed on the ideal's prime
    /// tags (FNV-1a); the same seed always reproduces the same sequence.
    SeededUnimodular(u64),
}

impl CoeffSource {
    pub fn value(&self, ideal: &FormalIdeal) -> Complex64 {
        match self {
            CoeffSource::Constant(c) => *c,
            CoeffSource::MoebiusNorm => {
                let n = ideal.norm();
                if n > u64::MAX as u128 {
                    return Complex64::new(0.0, 0.0);
                }
                match crate::arith::mu(n as u64) {
                    Ok(m) => Complex64::new(m as f64, 0.0),
                    Err(_) => Complex64::new(0.0, 0.0),
                }
            }
            CoeffSource::SeededUnimodular(seed) => {
                let mut h: u64 = 0xcbf29ce484222325 ^ seed;
                let mut mix = |v: u64| {
                    for byte in v.to_le_bytes() {
                        h ^= byte as u64;
                        h = h.wrapping_mul(0x100000001b3);
                    }
                };
                for f in &ideal.factors {
                    mix(f.0.p);
                    mix(match f.0.kind {
                        crate::idealmach::TagKind::Ramified => 0,
                        crate::idealmach::TagKind::Inert => 1,
                        crate::idealmach::TagKind::Split { conjugate, root } => {
                            2 + 2 * root + conjugate as u64
                        }
                    });
                    mix(f.1 as u64);
                }
                let theta = 2.0 * std::f64::consts::PI * (h as f64 / u64::MAX as f64);
                Complex64::from_polar(1.0, theta)
            }
        }
    }
}

/// Type II sum of Def 3.1 / Eq. typeII-def:
/// Σ_{N𝔞 ∈ [L,2L), N𝔞𝔟 ≤ X} α_𝔞 β_𝔟 w(𝔞𝔟).
pub fn type_ii_sum(
    w: &ProductWeight,
    inv: &FieldInvariants,
    factory: &IdealFactory,
    index: &PrincipalIndex,
    l: u64,
    x: u64,
    alpha: &CoeffSource,
    beta: &CoeffSource,
) -> Result<Complex64> {
    if x > index.x_max {
        return Err(Error::State(format!(
            "index built to {} but X = {x} requested",
            index.x_max
        )));
    }
    if l > x {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let outer: Vec<FormalIdeal> = factory
        .enumerate_ideals((2 * l - 1).min(x))?
        .into_iter()
        .filter(|a| {
            let na = a.norm();
            na >= l as u128 && na < 2 * l as u128
        })
        .collect();
    let mut acc = KahanC::new();
    for a in &outer {
        let av = alpha.value(a);
        if av.norm() == 0.0 {
            continue;
        }
        let mut inner = KahanC::new();
        for b in factory.enumerate_ideals((x as u128 / a.norm()) as u64)? {
            let bv = beta.value(&b);
            if bv.norm() == 0.0 {
                continue;
            }
            inner.add(bv * w.eval(&a.mul(&b), inv, index)?);
        }
        acc.add(av * inner.value());
    }
    Ok(acc.value())
}

// ---------------------------------------------------------------------------
// The local density σ(S₁, S₂) (§8.4–8.5)
// ---------------------------------------------------------------------------

const SIGMA_D_MAX: u64 = 1_000_000;
const UNIT_BRUTE_D_MAX: u64 = 4_096;

/// One σ(S₁, S₂) instance: the prime sets, T = {p : p | n}, the
/// squarefree products P₁, P₂, and D = 2n P₁ P₂ with 𝔪 = (D).
#[derive(Debug, Clone)]
pub struct SigmaInstance {
    pub s1: Vec<u64>,
    pub s2: Vec<u64>,
    pub t: Vec<u64>,
    pub p1: u64,
    pub p2: u64,
    pub d: u64,
}

/// Build an instance; primes are deduplicated and sorted, and D is
/// guarded at 10⁶ so the residue-box brute force stays feasible.
pub fn sigma_instance(inv: &FieldInvariants, s1: &[u64], s2: &[u64]) -> Result<SigmaInstance> {
    let canon = |s: &[u64]| -> Result<Vec<u64>> {
        let mut v: Vec<u64> = s.to_vec();
        v.sort_unstable();
        v.dedup();
        for &p in &v {
            if !is_prime_64(p) {
                return Err(Error::Domain(format!("{p} is not prime")));
            }
        }
        Ok(v)
    };
    let s1 = canon(s1)?;
    let s2 = canon(s2)?;
    let p1: u64 = s1.iter().product();
    let p2: u64 = s2.iter().product();
    let d = 2u64
        .checked_mul(inv.n)
        .and_then(|v| v.checked_mul(p1))
        .and_then(|v| v.checked_mul(p2))
        .ok_or_else(|| Error::Capacity("D overflows".into()))?;
    if d > SIGMA_D_MAX {
        return Err(Error::Capacity(format!("D = {d} exceeds guard {SIGMA_D_MAX}")));
    }
    let t: Vec<u64> = crate::arith::factorize(inv.n)?
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    Ok(SigmaInstance { s1, s2, t, p1, p2, d })
}

/// σ(S₁, S₂) by the closed form Eq. sig-first:
/// (ω |O*_K| / (r h_K P₁ P₂)) ∏_{p | 𝔪} (1 − (Δ|p)/p)^{−1}, and 0 when
/// S₁ ∩ S₂ ≠ ∅ or S₁ ∩ T ≠ ∅ (Lemma es1s2-small). For even n the prime
/// divisors of 𝔪 = (2nP₁P₂) are exactly T ∪ S₁ ∪ S₂ and this equals the
/// Eq. sigma-s1-s2 shape ω|O*_K|P_{T∖S₂}/(rh_K) · ∏_{p∈T∪S₁∪S₂} ν(p);
/// for odd n the prime 2 divides 𝔪 without lying in that union, and
/// sig-first remains the correct expression (asserted against brute
/// force in tests).
pub fn sigma_formula(inv: &FieldInvariants, inst: &SigmaInstance) -> Ratio<i128> {
    let meets = |a: &[u64], b: &[u64]| a.iter().any(|x| b.contains(x));
    if meets(&inst.s1, &inst.s2) || meets(&inst.s1, &inst.t) {
        return Ratio::from_integer(0);
    }
    let omega = if inv.omega_half {
        Ratio::new(1i128, 2)
    } else {
        Ratio::from_integer(1i128)
    };
    let mut sigma = omega
        * Ratio::new(
            inv.unit_count as i128,
            inv.r as i128 * inv.class_number as i128 * inst.p1 as i128 * inst.p2 as i128,
        );
    for (p, _) in crate::arith::factorize(inst.d).expect("D fits the factoring guard") {
        let p = p as i128;
        let chi = kronecker(inv.delta, p as i64) as i128;
        // (1 − (Δ|p)/p)^{−1} = p · ν(p) with ν(p) = (p − (Δ|p))^{−1}.
        sigma *= Ratio::new(p, p - chi);
    }
    sigma
}

/// The Eq. sigma-s1-s2 shape (valid for even n, where 2 ∈ T):
/// ω|O*_K|P_{T∖S₂}/(rh_K) · ∏_{p∈T∪S₁∪S₂} ν(p).
pub fn sigma_formula_s1s2_shape(inv: &FieldInvariants, inst: &SigmaInstance) -> Ratio<i128> {
    let meets = |a: &[u64], b: &[u64]| a.iter().any(|x| b.contains(x));
    if meets(&inst.s1, &inst.s2) || meets(&inst.s1, &inst.t) {
        return Ratio::from_integer(0);
    }
    let p_t_minus_s2: i128 = inst
        .t
        .iter()
        .filter(|p| !inst.s2.contains(p))
        .map(|&p| p as i128)
        .product();
    let omega = if inv.omega_half {
        Ratio::new(1i128, 2)
    } else {
        Ratio::from_integer(1i128)
    };
    let mut ps: Vec<u64> = inst
        .t
        .iter()
        .chain(&inst.s1)
        .chain(&inst.s2)
        .copied()
        .collect();
    ps.sort_unstable();
    ps.dedup();
    let mut prod = Ratio::from_integer(1i128);
    for p in ps {
        let chi = kronecker(inv.delta, p as i64) as i128;
        prod *= Ratio::new(1, p as i128 - chi);
    }
    omega
        * Ratio::new(
            inv.unit_count as i128 * p_t_minus_s2,
            inv.r as i128 * inv.class_number as i128,
        )
        * prod
}

/// |(O_K/𝔪)^*| via the Eq. chinese-rem closed form
/// N𝔪 ∏_{p|D}(1 − 1/p)(1 − (Δ|p)/p); exact integer.
pub fn unit_group_order(inv: &FieldInvariants, inst: &SigmaInstance) -> Result<i128> {
    let d = inst.d as i128;
    let mut val = Ratio::from_integer(d * d); // N𝔪 = D²
    for (p, _) in crate::arith::factorize(inst.d)? {
        let p = p as i128;
        let chi = kronecker(inv.delta, p as i64) as i128;
        val *= Ratio::new(p - 1, p) * Ratio::new(p - chi, p);
    }
    if !val.is_integer() {
        return Err(Error::Identity(format!(
            "|(O_K/({}))^*| = {val} is not an integer",
            inst.d
        )));
    }
    Ok(val.to_integer())
}

/// |(O_K/𝔪)^*| by direct residue enumeration of {a + bτ : 0 ≤ a, b < D}
/// with the coprimality test gcd(N(γ), D) = 1 (every prime of O_K above
/// a divisor of D divides (D), so γ shares a factor with 𝔪 exactly when
/// its norm shares one with D).
pub fn unit_group_order_bruteforce(inv: &FieldInvariants, inst: &SigmaInstance) -> Result<u64> {
    if inst.d > UNIT_BRUTE_D_MAX {
        return Err(Error::Capacity(format!(
            "brute |(O_K/𝔪)^*| infeasible at D = {}",
            inst.d
        )));
    }
    let d = inst.d as i128;
    let mut count = 0u64;
    for a in 0..d {
        for b in 0..d {
            let norm = inv.elem_norm(a, b).rem_euclid(d);
            if norm.gcd(&d) == 1 {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// σ(S₁, S₂) by brute force: count the Eq. gs1s2-explicit residue box
/// {aP₁ + brP₂√−n* : 0 ≤ a < 2nP₂, 0 ≤ b < 2ωnP₁/r} coprime to 𝔪, then
/// reconstruct σ = |O*_K| · count / (h_K |(O_K/𝔪)^*|) via Eq. chi0-first.
/// Returns (coprime count, |(O_K/𝔪)^*|, σ).
pub fn sigma_bruteforce(
    inv: &FieldInvariants,
    inst: &SigmaInstance,
) -> Result<(u64, i128, Ratio<i128>)> {
    let n = inv.n as i128;
    let r = inv.r as i128;
    let (p1, p2) = (inst.p1 as i128, inst.p2 as i128);
    let a_hi = 2 * n * p2;
    let b_hi = if inv.omega_half { n * p1 / r } else { 2 * n * p1 / r };
    if a_hi * b_hi > 100_000_000 {
        return Err(Error::Capacity(format!(
            "σ residue box {a_hi}×{b_hi} too large"
        )));
    }
    let d = inst.d as i128;
    let n_star = inv.n_star as i128;
    let rows: Vec<u64> = (0..a_hi)
        .into_par_iter()
        .map(|a| {
            let xa = a * p1; // real part x = aP₁
            let mut row = 0u64;
            for b in 0..b_hi {
                let yb = b * r * p2; // coefficient of √−n*
                let norm = (xa * xa + n_star * yb * yb).rem_euclid(d);
                if norm.gcd(&d) == 1 {
                    row += 1;
                }
            }
            row
        })
        .collect();
    let count: u64 = rows.iter().sum();
    let order = unit_group_order(inv, inst)?;
    let sigma = Ratio::new(inv.unit_count as i128 * count as i128, 1)
        / Ratio::from_integer(inv.class_number as i128 * order);
    Ok((count, order, sigma))
}

/// The Eq. lhs-local closed form for the coprime residue count:
/// ω N𝔪 / (r P₁ P₂) · ∏_{p | 𝔪}(1 − 1/p); exact integer.
pub fn coprime_count_closed_form(inv: &FieldInvariants, inst: &SigmaInstance) -> Result<i128> {
    let meets = |a: &[u64], b: &[u64]| a.iter().any(|x| b.contains(x));
    if meets(&inst.s1, &inst.s2) || meets(&inst.s1, &inst.t) {
        return Err(Error::Domain(
            "Eq. lhs-local requires S₁ ∩ S₂ = S₁ ∩ T = ∅".into(),
        ));
    }
    let d = inst.d as i128;
    let omega = if inv.omega_half {
        Ratio::new(1i128, 2)
    } else {
        Ratio::from_integer(1i128)
    };
    let mut val = omega * Ratio::new(d * d, inv.r as i128 * inst.p1 as i128 * inst.p2 as i128);
    for (p, _) in crate::arith::factorize(inst.d)? {
        val *= Ratio::new(p as i128 - 1, p as i128);
    }
    if !val.is_integer() {
        return Err(Error::Identity(format!("lhs-local value {val} not integral")));
    }
    Ok(val.to_integer())
}
