//! Invariants and class-group arithmetic of the imaginary quadratic field
//! `K = Q(sqrt(-n))`.
//!
//! Writing `n = n* r^2` with `n*` squarefree, the ring of integers is
//! `Z[sqrt(-n*)]` when `n* ≡ 1, 2 (mod 4)` (ω = 1) and
//! `Z[(1 + sqrt(-n*))/2]` when `n* ≡ 3 (mod 4)` (ω = 1/2); the discriminant
//! is `Δ = -4 ω² n*`. The class group `C(K)` is realized concretely as the
//! set of reduced primitive binary quadratic forms of discriminant Δ under
//! Gauss (Dirichlet) composition, which matches the ideal class group of
//! the maximal order.

use crate::arith::{factorize, integer_kth_root, kronecker, tau_sieve};
use crate::{Error, Result};
use num_complex::Complex64;

/// A binary quadratic form `a x² + b x y + c y²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuadForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl QuadForm {
    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    /// Reduced iff |b| ≤ a ≤ c and b ≥ 0 when |b| = a or a = c.
    pub fn is_reduced(&self) -> bool {
        self.b.abs() <= self.a
            && self.a <= self.c
            && !((self.b.abs() == self.a || self.a == self.c) && self.b < 0)
    }
}

/// Gauss reduction of a positive definite form (a > 0, Δ < 0).
pub fn reduce_form(mut f: QuadForm) -> QuadForm {
    let delta = f.discriminant();
    debug_assert!(delta < 0 && f.a > 0);
    loop {
        // Normalize b into (-a, a].
        if f.b > f.a || f.b <= -f.a {
            let two_a = 2 * f.a;
            let mut b = f.b.rem_euclid(two_a);
            if b > f.a {
                b -= two_a;
            }
            f.b = b;
            f.c = (f.b * f.b - delta) / (4 * f.a);
        }
        if f.a > f.c {
            f = QuadForm {
                a: f.c,
                b: -f.b,
                c: f.a,
            };
            continue;
        }
        break;
    }
    if (f.b.abs() == f.a || f.a == f.c) && f.b < 0 {
        f.b = -f.b;
    }
    debug_assert!(f.is_reduced());
    f
}

/// All reduced primitive forms of discriminant `delta` (< 0, ≡ 0 or 1 mod 4),
/// sorted. Their count is the class number h(Δ).
pub fn all_reduced_forms(delta: i64) -> Result<Vec<QuadForm>> {
    if delta >= 0 || !(delta.rem_euclid(4) == 0 || delta.rem_euclid(4) == 1) {
        return Err(Error::Domain(format!(
            "{delta} is not a negative discriminant"
        )));
    }
    let mut forms = Vec::new();
    // |b| ≤ a ≤ c forces 3 a² ≤ 4ac - b² + a² ... the standard bound a ≤ sqrt(|Δ|/3).
    let a_max = integer_kth_root((-delta) as u64 / 3, 2) as i64;
    for a in 1..=a_max.max(1) {
        for b in -a + 1..=a {
            if (b - delta).rem_euclid(2) != 0 {
                continue;
            }
            let num = b * b - delta;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a {
                continue;
            }
            let f = QuadForm { a, b, c };
            if !f.is_reduced() {
                continue;
            }
            // Primitive forms only: imprimitive forms belong to non-maximal orders.
            let g = gcd3(a, b, c);
            if g != 1 {
                continue;
            }
            forms.push(f);
        }
    }
    forms.sort();
    Ok(forms)
}

fn gcd3(a: i64, b: i64, c: i64) -> i64 {
    num_integer::gcd(num_integer::gcd(a.abs(), b.abs()), c.abs())
}

/// Dirichlet composition of two primitive forms of the same discriminant,
/// returned reduced.
///
/// With `s = (b1 + b2)/2` and `e = gcd(a1, a2, s)`, pick a Bezout solution
/// `u a1 + v a2 + w s = e`; then `A = a1 a2 / e²` and
/// `B = (u a1 b2 + v a2 b1 + w (b1 b2 + Δ)/2) / e (mod 2A)`. The explicit
/// Bezout formula is required: when e > 1 the congruence system
/// `B ≡ b_i (mod 2a_i/e)`, `B² ≡ Δ (mod 4A)` alone has spurious solutions
/// in the wrong class (e.g. Δ = −172).
pub fn compose_forms(f1: QuadForm, f2: QuadForm) -> Result<QuadForm> {
    let delta = f1.discriminant();
    if f2.discriminant() != delta {
        return Err(Error::Domain("composing forms of unequal discriminant".into()));
    }
    let (a1, b1) = (f1.a as i128, f1.b as i128);
    let (a2, b2) = (f2.a as i128, f2.b as i128);
    let s = (b1 + b2) / 2; // b1 ≡ b2 ≡ Δ (mod 2), so the sum is even
    let (g1, x, y) = crate::arith::extended_gcd(a1, a2);
    let (e, t, w) = crate::arith::extended_gcd(g1, s);
    let (u, v) = (t * x, t * y);
    debug_assert_eq!(u * a1 + v * a2 + w * s, e);
    let a = a1 * a2 / (e * e);
    let num = u * a1 * b2 + v * a2 * b1 + w * (b1 * b2 + delta as i128) / 2;
    if num % e != 0 {
        return Err(Error::Identity(format!(
            "Dirichlet composite B not integral for {f1:?} * {f2:?}"
        )));
    }
    let b = (num / e).rem_euclid(2 * a);
    if (b * b - delta as i128) % (4 * a) != 0 {
        return Err(Error::Identity(format!(
            "Dirichlet composite fails B² ≡ Δ for {f1:?} * {f2:?}"
        )));
    }
    let c = (b * b - delta as i128) / (4 * a);
    let to64 = |x: i128| i64::try_from(x).map_err(|_| Error::Capacity("form overflow".into()));
    Ok(reduce_form(QuadForm {
        a: to64(a)?,
        b: to64(b)?,
        c: to64(c)?,
    }))
}

/// The class group of discriminant Δ: reduced forms plus a composition
/// table and a character table.
#[derive(Debug, Clone)]
pub struct ClassGroup {
    pub delta: i64,
    pub forms: Vec<QuadForm>,
    /// mult[i][j] = index of forms[i] ∘ forms[j].
    pub mult: Vec<Vec<usize>>,
    pub identity: usize,
    pub inverse: Vec<usize>,
}

impl ClassGroup {
    pub fn new(delta: i64) -> Result<Self> {
        let forms = all_reduced_forms(delta)?;
        let h = forms.len();
        let idx = |f: QuadForm| -> Result<usize> {
            forms
                .binary_search(&f)
                .map_err(|_| Error::Identity(format!("composed form {f:?} not reduced-canonical")))
        };
        let mut mult = vec![vec![0usize; h]; h];
        for i in 0..h {
            for j in 0..h {
                mult[i][j] = idx(compose_forms(forms[i], forms[j])?)?;
            }
        }
        // The principal form is the unique one with a = 1.
        let identity = forms
            .iter()
            .position(|f| f.a == 1)
            .ok_or_else(|| Error::Identity("no principal form".into()))?;
        let mut inverse = vec![0usize; h];
        for i in 0..h {
            let inv = mult[i]
                .iter()
                .position(|&k| k == identity)
                .ok_or_else(|| Error::Identity("form without inverse".into()))?;
            inverse[i] = inv;
        }
        Ok(Self {
            delta,
            forms,
            mult,
            identity,
            inverse,
        })
    }

    pub fn order(&self) -> usize {
        self.forms.len()
    }

    pub fn compose(&self, i: usize, j: usize) -> usize {
        self.mult[i][j]
    }

    /// Index of the class containing the reduction of `f`.
    pub fn class_of(&self, f: QuadForm) -> Result<usize> {
        let r = reduce_form(f);
        self.forms
            .binary_search(&r)
            .map_err(|_| Error::Identity(format!("form {r:?} has wrong discriminant for group")))
    }

    /// Full character table: `h` characters, each a vector of values
    /// indexed by class. Built by the standard extension construction for
    /// finite abelian groups (adjoin generators one at a time, extending
    /// each existing character along every d-th root).
    pub fn characters(&self) -> Vec<Vec<Complex64>> {
        let h = self.order();
        // subgroup: element indices currently covered; chars: value per
        // covered element, indexed by position in `elems`.
        let mut elems: Vec<usize> = vec![self.identity];
        let mut chars: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0)]];
        while elems.len() < h {
            // Smallest class index not yet covered, for determinism.
            let g = (0..h).find(|i| !elems.contains(i)).unwrap();
            // d = order of g in G / <current subgroup>.
            let mut d = 1usize;
            let mut pw = g;
            while !elems.contains(&pw) {
                pw = self.compose(pw, g);
                d += 1;
            }
            let h0_pos = elems.iter().position(|&e| e == pw).unwrap();
            // New element list: old[e] * g^j for j = 0..d.
            let mut new_elems = Vec::with_capacity(elems.len() * d);
            for j in 0..d {
                for &e in &elems {
                    let mut v = e;
                    for _ in 0..j {
                        v = self.compose(v, g);
                    }
                    new_elems.push(v);
                }
            }
            let mut new_chars = Vec::with_capacity(chars.len() * d);
            for old in &chars {
                let base = old[h0_pos]; // χ(g^d); extend via its d-th roots
                let (r, th) = base.to_polar();
                for l in 0..d {
                    let zeta = Complex64::from_polar(
                        r.powf(1.0 / d as f64),
                        th / d as f64 + std::f64::consts::TAU * l as f64 / d as f64,
                    );
                    let mut vals = Vec::with_capacity(new_elems.len());
                    for j in 0..d {
                        for (pos, _) in elems.iter().enumerate() {
                            vals.push(old[pos] * zeta.powu(j as u32));
                        }
                    }
                    new_chars.push(vals);
                }
            }
            elems = new_elems;
            chars = new_chars;
        }
        // Re-index values by class index rather than enumeration order.
        let mut out = Vec::with_capacity(h);
        for ch in chars {
            let mut v = vec![Complex64::new(0.0, 0.0); h];
            for (pos, &e) in elems.iter().enumerate() {
                v[e] = ch[pos];
            }
            out.push(v);
        }
        // Deterministic ordering: principal character first, then lexicographic.
        out.sort_by(|x, y| {
            let key = |v: &Vec<Complex64>| {
                v.iter()
                    .flat_map(|z| [ordered(z.re), ordered(z.im)])
                    .collect::<Vec<_>>()
            };
            key(y).cmp(&key(x)) // principal (all 1s) sorts first under reverse
        });
        out
    }
}

fn ordered(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Splitting behaviour of a rational prime in `O_K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

/// Field invariants of `K = Q(sqrt(-n))`.
#[derive(Debug, Clone)]
pub struct FieldInvariants {
    pub n: u64,
    /// Squarefree part: n = n_star · r².
    pub n_star: u64,
    pub r: u64,
    /// ω = 1/2 iff n* ≡ 3 (mod 4), else ω = 1.
    pub omega_half: bool,
    /// Field discriminant Δ = −4 ω² n*.
    pub delta: i64,
    /// |O_K^*|: 4 for n* = 1, 6 for n* = 3, else 2.
    pub unit_count: u32,
    pub class_number: usize,
    pub class_group: ClassGroup,
}

impl FieldInvariants {
    /// ω as a rational (numerator, denominator).
    pub fn omega(&self) -> (u64, u64) {
        if self.omega_half {
            (1, 2)
        } else {
            (1, 1)
        }
    }

    /// Trace of the second basis element τ (= sqrt(-n*) or (1+sqrt(-n*))/2).
    pub fn tau_trace(&self) -> i64 {
        if self.omega_half {
            1
        } else {
            0
        }
    }

    /// Norm of τ.
    pub fn tau_norm(&self) -> i64 {
        if self.omega_half {
            (1 + self.n_star as i64) / 4
        } else {
            self.n_star as i64
        }
    }

    /// Norm of u + vτ (exact, i128).
    pub fn elem_norm(&self, u: i128, v: i128) -> i128 {
        u * u + self.tau_trace() as i128 * u * v + self.tau_norm() as i128 * v * v
    }
}

/// Compute all invariants of `Q(sqrt(-n))`.
pub fn field_invariants(n: u64) -> Result<FieldInvariants> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let mut n_star: u64 = 1;
    let mut r: u64 = 1;
    for (p, e) in factorize(n)? {
        if e % 2 == 1 {
            n_star *= p;
        }
        r *= p.pow(e / 2);
    }
    let omega_half = n_star % 4 == 3;
    let delta: i64 = if omega_half {
        -(n_star as i64)
    } else {
        -4 * n_star as i64
    };
    let unit_count = match n_star {
        1 => 4,
        3 => 6,
        _ => 2,
    };
    let class_group = ClassGroup::new(delta)?;
    let class_number = class_group.order();
    Ok(FieldInvariants {
        n,
        n_star,
        r,
        omega_half,
        delta,
        unit_count,
        class_number,
        class_group,
    })
}

/// Splitting type of a rational prime: Split iff (Δ|p) = 1, Inert iff −1,
/// Ramified iff 0.
pub fn splitting_type(inv: &FieldInvariants, p: u64) -> Result<Splitting> {
    if !crate::arith::is_prime_64(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    Ok(match kronecker(inv.delta, p as i64) {
        1 => Splitting::Split,
        -1 => Splitting::Inert,
        _ => Splitting::Ramified,
    })
}

/// `L(1, χ_Δ)` via the class number formula
/// `2π h_K / (|O_K^*| sqrt(|Δ|))`.
pub fn l_one_chi(inv: &FieldInvariants) -> f64 {
    2.0 * std::f64::consts::PI * inv.class_number as f64
        / (inv.unit_count as f64 * ((-inv.delta) as f64).sqrt())
}

/// Exact count of (x, y) ∈ Z² with x² + n y² = t.
pub fn rep_count(inv: &FieldInvariants, t: u64) -> Result<u64> {
    const REP_MAX: u64 = 1_000_000_000_000;
    if t > REP_MAX {
        return Err(Error::Capacity(format!("rep_count t = {t} exceeds guard")));
    }
    if t == 0 {
        return Ok(1); // only (0,0)
    }
    let mut count = 0u64;
    let mut y = 0u64;
    while inv.n * y * y <= t {
        let rem = t - inv.n * y * y;
        let x = integer_kth_root(rem, 2);
        if x * x == rem {
            let signs = match (x == 0, y == 0) {
                (true, true) => 1,
                (true, false) | (false, true) => 2,
                (false, false) => 4,
            };
            count += signs;
        }
        y += 1;
    }
    Ok(count)
}

/// Batch representation counts r(t) for all 0 ≤ t ≤ limit (index t).
pub fn rep_counts_up_to(inv: &FieldInvariants, limit: u64) -> Result<Vec<u32>> {
    const BATCH_MAX: u64 = 100_000_000;
    if limit > BATCH_MAX {
        return Err(Error::Capacity(format!(
            "rep_counts_up_to limit {limit} exceeds guard"
        )));
    }
    let mut counts = vec![0u32; limit as usize + 1];
    let mut y = 0u64;
    while inv.n * y * y <= limit {
        let base = inv.n * y * y;
        let mut x = 0u64;
        while base + x * x <= limit {
            let t = (base + x * x) as usize;
            let signs = match (x == 0, y == 0) {
                (true, true) => 1,
                (true, false) | (false, true) => 2,
                (false, false) => 4,
            };
            counts[t] += signs;
            x += 1;
        }
        y += 1;
    }
    Ok(counts)
}

/// `r(t) ≤ 6 τ(t)` check for all 1 ≤ t ≤ limit; returns the worst ratio.
pub fn rep_tau_bound_check(inv: &FieldInvariants, limit: u64) -> Result<f64> {
    let reps = rep_counts_up_to(inv, limit)?;
    let taus = tau_sieve(limit as usize);
    let mut worst: f64 = 0.0;
    for t in 1..=limit as usize {
        let ratio = reps[t] as f64 / (6.0 * taus[t] as f64);
        if ratio > 1.0 {
            return Err(Error::Identity(format!(
                "r({t}) = {} > 6 τ({t}) = {}",
                reps[t],
                6 * taus[t]
            )));
        }
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Exact count of ideals of `O_K` with norm ≤ X, by the multiplicative
/// divisor-sum formula `#{norm = m} = Σ_{d|m} (Δ|d)` (valid for the maximal
/// order; cross-validated against direct enumeration in the test suite).
/// Returns `(count, count / X)`.
pub fn ideal_count(inv: &FieldInvariants, x: u64) -> Result<(u64, f64)> {
    const COUNT_MAX: u64 = 1_000_000_000;
    if x < 1 {
        return Err(Error::Domain("ideal_count requires X >= 1".into()));
    }
    if x > COUNT_MAX {
        return Err(Error::Capacity(format!("ideal_count X = {x} exceeds guard")));
    }
    // Σ_{m≤X} Σ_{d|m} (Δ|d) = Σ_{d≤X} (Δ|d) ⌊X/d⌋.
    let mut count: i64 = 0;
    for d in 1..=x {
        let k = kronecker(inv.delta, d as i64) as i64;
        if k != 0 {
            count += k * (x / d) as i64;
        }
    }
    if count < 0 {
        return Err(Error::Identity("negative ideal count".into()));
    }
    Ok((count as u64, count as f64 / x as f64))
}

/// Σ_{Nπ ≤ X} 1/Nπ over prime ideals (Mertens-type sum); returned together
/// with log log X for the report.
pub fn prime_ideal_reciprocal_sum(inv: &FieldInvariants, x: u64) -> Result<(f64, f64)> {
    if x < 2 {
        return Err(Error::Domain("prime_ideal_reciprocal_sum requires X >= 2".into()));
    }
    let primes = crate::arith::sieve_primes(x)?;
    let mut sum = crate::Kahan::new();
    for &p in &primes {
        match splitting_type(inv, p)? {
            Splitting::Split => sum.add(2.0 / p as f64),
            Splitting::Ramified => sum.add(1.0 / p as f64),
            Splitting::Inert => {
                if p * p <= x {
                    sum.add(1.0 / (p * p) as f64);
                }
            }
        }
    }
    Ok((sum.value(), (x as f64).ln().ln()))
}

/// Class of the O_K-module generated (as an O_K-ideal) by the elements
/// `u + v τ` in `gens`, returned as an index into `inv.class_group`.
///
/// The module is expanded to a Z-lattice by adjoining τ·g for every
/// generator g, put in 2×2 Hermite normal form {a, b + gτ}, and mapped to
/// the binary quadratic form `N(x·a + y·(b + gτ)) / N(I)`, whose reduction
/// identifies the class.
pub fn ideal_class_from_gens(inv: &FieldInvariants, gens: &[(i128, i128)]) -> Result<usize> {
    let (a, b, g) = hnf_of_ideal(inv, gens)?;
    let t = inv.tau_trace() as i128;
    let nt = inv.tau_norm() as i128;
    let norm = a * g;
    // Form coefficients (all divisions exact; see module docs).
    let fa = a / g;
    let fb = 2 * b / g + t;
    let fc = (b * b + t * b * g + nt * g * g) / (a * g);
    if fa * g != a || (b * b + t * b * g + nt * g * g) % (a * g) != 0 {
        return Err(Error::Identity("HNF of non-ideal module".into()));
    }
    let form = QuadForm {
        a: i64::try_from(fa).map_err(|_| Error::Capacity("form coeff overflow".into()))?,
        b: i64::try_from(fb).map_err(|_| Error::Capacity("form coeff overflow".into()))?,
        c: i64::try_from(fc).map_err(|_| Error::Capacity("form coeff overflow".into()))?,
    };
    if form.discriminant() != inv.delta {
        return Err(Error::Identity(format!(
            "ideal form {form:?} has discriminant {} != {} (norm {norm})",
            form.discriminant(),
            inv.delta
        )));
    }
    inv.class_group.class_of(form)
}

/// Norm of the ideal generated by `gens` (elements u + vτ).
pub fn ideal_norm_from_gens(inv: &FieldInvariants, gens: &[(i128, i128)]) -> Result<u128> {
    let (a, _, g) = hnf_of_ideal(inv, gens)?;
    Ok((a * g) as u128)
}

/// HNF basis {a·1, b + g·τ} (a, g > 0, 0 ≤ b < a) of the ideal generated
/// by `gens`.
fn hnf_of_ideal(inv: &FieldInvariants, gens: &[(i128, i128)]) -> Result<(i128, i128, i128)> {
    let t = inv.tau_trace() as i128;
    let nt = inv.tau_norm() as i128;
    // Z-spanning vectors: every generator and its τ-multiple.
    let mut vecs: Vec<(i128, i128)> = Vec::with_capacity(2 * gens.len());
    for &(u, v) in gens {
        vecs.push((u, v));
        // (u + vτ)·τ = -v·Nτ + (u + v·T)·τ
        vecs.push((-v * nt, u + v * t));
    }
    // Combine to a single vector (b, g) with minimal positive g via gcd steps.
    let (mut b, mut g) = (0i128, 0i128);
    let mut residual: Vec<i128> = Vec::new();
    for &(u, v) in &vecs {
        let (mut u1, mut v1) = (u, v);
        // Euclid on the τ-coordinates, carrying the 1-coordinates along.
        while v1 != 0 {
            if g == 0 {
                std::mem::swap(&mut b, &mut u1);
                std::mem::swap(&mut g, &mut v1);
                continue;
            }
            let q = v1.div_euclid(g);
            u1 -= q * b;
            v1 -= q * g;
            if v1 != 0 {
                std::mem::swap(&mut b, &mut u1);
                std::mem::swap(&mut g, &mut v1);
            }
        }
        residual.push(u1);
    }
    if g == 0 {
        return Err(Error::Domain("zero module has no HNF".into()));
    }
    if g < 0 {
        g = -g;
        b = -b;
    }
    let mut a: i128 = 0;
    for &u in &residual {
        a = num_integer::gcd(a, u.abs());
    }
    if a == 0 {
        return Err(Error::Domain("module of rank < 2 has no ideal HNF".into()));
    }
    b = b.rem_euclid(a);
    Ok((a, b, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn invariants_examples() {
        let i4 = field_invariants(4).unwrap();
        assert_eq!((i4.n_star, i4.r, i4.omega_half, i4.delta), (1, 2, false, -4));
        assert_eq!((i4.unit_count, i4.class_number), (4, 1));

        let i12 = field_invariants(12).unwrap();
        assert_eq!((i12.n_star, i12.r, i12.omega_half, i12.delta), (3, 2, true, -3));
        assert_eq!(i12.unit_count, 6);
        assert_eq!(i12.class_number, 1);

        let i5 = field_invariants(5).unwrap();
        assert_eq!(i5.delta, -20);
        assert_eq!(i5.class_number, 2);
        assert_eq!(
            i5.class_group.forms,
            vec![QuadForm { a: 1, b: 0, c: 5 }, QuadForm { a: 2, b: 2, c: 3 }]
        );

        // Remaining acceptance fields.
        assert_eq!(field_invariants(6).unwrap().delta, -24);
        assert_eq!(field_invariants(6).unwrap().class_number, 2);
        assert_eq!(field_invariants(10).unwrap().delta, -40);
        assert_eq!(field_invariants(10).unwrap().class_number, 2);
        assert_eq!(field_invariants(16).unwrap().delta, -4);
        assert_eq!(field_invariants(22).unwrap().delta, -88);
        assert_eq!(field_invariants(22).unwrap().class_number, 2);
    }

    #[test]
    fn splitting_examples() {
        let inv = field_invariants(4).unwrap();
        assert_eq!(splitting_type(&inv, 5).unwrap(), Splitting::Split);
        assert_eq!(splitting_type(&inv, 3).unwrap(), Splitting::Inert);
        assert_eq!(splitting_type(&inv, 2).unwrap(), Splitting::Ramified);
        assert!(splitting_type(&inv, 6).is_err());
        // For p ∤ 2n, split iff x² ≡ −n (mod p) solvable.
        for &p in &[7u64, 11, 13, 17, 19, 23, 101, 997] {
            let solvable = (0..p).any(|x| (x * x + inv.n) % p == 0);
            assert_eq!(
                splitting_type(&inv, p).unwrap() == Splitting::Split,
                solvable,
                "p = {p}"
            );
        }
    }

    #[test]
    fn l_one_values() {
        let i4 = field_invariants(4).unwrap();
        assert!((l_one_chi(&i4) - PI / 4.0).abs() < 1e-15);
        let i5 = field_invariants(5).unwrap();
        assert!((l_one_chi(&i5) - PI / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rep_count_examples() {
        let inv = field_invariants(4).unwrap();
        assert_eq!(rep_count(&inv, 5).unwrap(), 4);
        assert_eq!(rep_count(&inv, 3).unwrap(), 0);
        assert_eq!(rep_count(&inv, 4).unwrap(), 4); // (±2,0),(0,±1)
        let batch = rep_counts_up_to(&inv, 1000).unwrap();
        for t in 1..=1000u64 {
            assert_eq!(batch[t as usize] as u64, rep_count(&inv, t).unwrap());
        }
        assert!(rep_tau_bound_check(&inv, 10_000).unwrap() <= 1.0);
    }

    #[test]
    fn ideal_count_examples() {
        let inv = field_invariants(4).unwrap();
        assert_eq!(ideal_count(&inv, 5).unwrap().0, 5);
        assert_eq!(ideal_count(&inv, 1).unwrap().0, 1);
        // In Z[i] the count of ideals of norm ≤ X is Σ r(m)/4 over m ≤ X
        // with r the Gaussian rep count: cross-check at X = 200.
        let reps = rep_counts_up_to(&field_invariants(1).unwrap(), 200).unwrap();
        let brute: u64 = (1..=200usize).map(|m| reps[m] as u64 / 4).sum();
        assert_eq!(ideal_count(&inv, 200).unwrap().0, brute);
    }

    #[test]
    fn reciprocal_sum_examples() {
        let inv = field_invariants(4).unwrap();
        let (s, _) = prime_ideal_reciprocal_sum(&inv, 5).unwrap();
        assert!((s - 0.9).abs() < 1e-12);
        let (s2, _) = prime_ideal_reciprocal_sum(&inv, 2).unwrap();
        assert!((s2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn composition_group_laws() {
        // Exhaustive group check for every discriminant with |Δ| ≤ 200.
        for delta in (-200i64..0).filter(|d| d.rem_euclid(4) == 0 || d.rem_euclid(4) == 1) {
            let g = match ClassGroup::new(delta) {
                Ok(g) => g,
                Err(_) => continue,
            };
            let h = g.order();
            assert!(h >= 1, "Δ = {delta}");
            for i in 0..h {
                assert_eq!(g.compose(i, g.identity), i);
                assert_eq!(g.compose(g.inverse[i], i), g.identity);
                for j in 0..h {
                    assert_eq!(g.compose(i, j), g.compose(j, i));
                    for k in 0..h {
                        assert_eq!(
                            g.compose(g.compose(i, j), k),
                            g.compose(i, g.compose(j, k)),
                            "associativity Δ = {delta}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dirichlet_example() {
        // (2,2,3)² = principal in Δ = −20.
        let f = QuadForm { a: 2, b: 2, c: 3 };
        assert_eq!(compose_forms(f, f).unwrap(), QuadForm { a: 1, b: 0, c: 5 });
    }

    #[test]
    fn character_orthogonality() {
        for n in [5u64, 6, 10, 22, 14, 21] {
            let inv = field_invariants(n).unwrap();
            let g = &inv.class_group;
            let h = g.order() as f64;
            let chars = g.characters();
            assert_eq!(chars.len(), g.order());
            // Row orthogonality and homomorphism property.
            for (ci, chi) in chars.iter().enumerate() {
                for i in 0..g.order() {
                    for j in 0..g.order() {
                        let lhs = chi[g.compose(i, j)];
                        let rhs = chi[i] * chi[j];
                        assert!((lhs - rhs).norm() < 1e-9, "hom n={n} χ{ci}");
                    }
                }
                for (cj, chj) in chars.iter().enumerate() {
                    let dot: Complex64 = (0..g.order())
                        .map(|e| chi[e] * chj[e].conj())
                        .sum();
                    let expect = if ci == cj { h } else { 0.0 };
                    assert!((dot - expect).norm() < 1e-9, "orth n={n} {ci},{cj}");
                }
            }
            // First character is principal.
            assert!(chars[0].iter().all(|z| (z - 1.0).norm() < 1e-12));
        }
    }

    #[test]
    fn ideal_class_worked_examples() {
        // n = 4, prime above 5: gens {5, τ − 2} (τ = i, −1 ≡ 2² mod 5).
        let i4 = field_invariants(4).unwrap();
        let c = ideal_class_from_gens(&i4, &[(5, 0), (-2, 1)]).unwrap();
        assert_eq!(c, i4.class_group.identity);
        assert_eq!(ideal_norm_from_gens(&i4, &[(5, 0), (-2, 1)]).unwrap(), 5);

        // n = 5: the ramified prime above 2, (2, 1 + τ), is non-principal
        // with class (2,2,3).
        let i5 = field_invariants(5).unwrap();
        let c2 = ideal_class_from_gens(&i5, &[(2, 0), (1, 1)]).unwrap();
        assert_eq!(i5.class_group.forms[c2], QuadForm { a: 2, b: 2, c: 3 });
        assert_eq!(ideal_norm_from_gens(&i5, &[(2, 0), (1, 1)]).unwrap(), 2);

        // Split prime above 3 in n = 5 (−5 ≡ 1 mod 3): gens {3, τ − 1},
        // also non-principal (3 is represented by 2x²+2xy+3y², not x²+5y²).
        let c3 = ideal_class_from_gens(&i5, &[(3, 0), (-1, 1)]).unwrap();
        assert_eq!(i5.class_group.forms[c3], QuadForm { a: 2, b: 2, c: 3 });

        // A principal ideal: (1 + τ) in n = 5 has norm 6 and trivial class.
        let c4 = ideal_class_from_gens(&i5, &[(1, 1)]).unwrap();
        assert_eq!(c4, i5.class_group.identity);
        assert_eq!(ideal_norm_from_gens(&i5, &[(1, 1)]).unwrap(), 6);
    }

    #[test]
    fn prime_ideals_per_norm_bounded() {
        // At most [K:Q] = 2 prime ideals share a norm: equivalent to the
        // splitting trichotomy; spot-check the count of ideals of prime
        // norm p equals 2, 1, 0 for split/ramified/inert.
        let inv = field_invariants(4).unwrap();
        for &p in &[2u64, 3, 5, 7, 11, 13] {
            let (c_p, _) = ideal_count(&inv, p).unwrap();
            let (c_pm1, _) = ideal_count(&inv, p - 1).unwrap();
            let at_norm = c_p - c_pm1;
            let expect = match splitting_type(&inv, p).unwrap() {
                Splitting::Split => 2,
                Splitting::Ramified => 1,
                Splitting::Inert => 0,
            };
            assert_eq!(at_norm, expect, "p = {p}");
        }
    }
}
