//! Appendix C: the multi-dimensional trigonometric large sieve (Prop C.1,
//! Cor C.2), the arithmetic sieve bound (Lemma C.3), and the Rankin-style
//! lower bound Eq. sumhq from §3.2.

use crate::arith::is_prime_64;
use crate::{Error, Kahan, KahanC, Result};
use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Coefficients a_n over the box [N]^k = {1..N}^k, k ∈ {1, 2};
/// row-major for k = 2.
#[derive(Debug, Clone)]
pub struct TrigCoeffs {
    pub k: u32,
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl TrigCoeffs {
    pub fn new(k: u32, n: usize, values: Vec<Complex64>) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(Error::Domain(format!("dimension k = {k} must be 1 or 2")));
        }
        if values.len() != n.pow(k) {
            return Err(Error::Domain(format!(
                "expected {} coefficients, got {}",
                n.pow(k),
                values.len()
            )));
        }
        Ok(Self { k, n, values })
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let mut acc = Kahan::new();
        for v in &self.values {
            acc.add(v.norm_sqr());
        }
        acc.value()
    }
}

/// S(θ) = Σ_{n ∈ [N]^k} a_n e(θ·n) (Eq. s-theta-def).
pub fn trig_poly(a: &TrigCoeffs, theta: &[f64]) -> Result<Complex64> {
    if theta.len() != a.k as usize {
        return Err(Error::Domain(format!(
            "θ has {} coordinates for dimension {}",
            theta.len(),
            a.k
        )));
    }
    let mut acc = KahanC::new();
    if a.k == 1 {
        for (i, &c) in a.values.iter().enumerate() {
            let phase = 2.0 * PI * theta[0] * (i + 1) as f64;
            acc.add(c * Complex64::from_polar(1.0, phase));
        }
    } else {
        for (idx, &c) in a.values.iter().enumerate() {
            let (i, j) = (idx / a.n + 1, idx % a.n + 1);
            let phase = 2.0 * PI * (theta[0] * i as f64 + theta[1] * j as f64);
            acc.add(c * Complex64::from_polar(1.0, phase));
        }
    }
    Ok(acc.value())
}

fn torus_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

fn linf_torus_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| torus_dist(a, b))
        .fold(0.0, f64::max)
}

/// Prop C.1: for δ-well-spaced points (validated, tolerance 1e−12),
/// asserts Σ_j |S(θ_j)|² ≤ (N^{1/2} + δ^{−1/2})^{2k} ‖a‖². Returns
/// (lhs, rhs, pass).
pub fn prop_c1_check(
    a: &TrigCoeffs,
    points: &[Vec<f64>],
    delta: f64,
) -> Result<(f64, f64, bool)> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Domain(format!("spacing δ = {delta} out of range")));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != a.k as usize {
            return Err(Error::Domain("point dimension mismatch".into()));
        }
        for q in &points[..i] {
            if linf_torus_dist(p, q) < delta - 1e-12 {
                return Err(Error::Domain(format!(
                    "points {q:?} and {p:?} closer than δ = {delta}"
                )));
            }
        }
    }
    let mut lhs = Kahan::new();
    for p in points {
        lhs.add(trig_poly(a, p)?.norm_sqr());
    }
    let rhs = ((a.n as f64).sqrt() + delta.powf(-0.5)).powi(2 * a.k as i32) * a.l2_norm_sq();
    let lhs = lhs.value();
    Ok((lhs, rhs, lhs <= rhs * (1.0 + 1e-12)))
}

/// The k-fold Farey grid of Cor C.2: per coordinate, all a/q with q ≤ Q
/// and gcd(a, q) = 1, 1 ≤ a ≤ q.
pub fn farey_points(k: u32, q_max: u64) -> Vec<Vec<f64>> {
    let mut one_dim = Vec::new();
    for q in 1..=q_max {
        for a in 1..=q {
            if a.gcd(&q) == 1 {
                one_dim.push(a as f64 / q as f64);
            }
        }
    }
    if k == 1 {
        one_dim.into_iter().map(|t| vec![t]).collect()
    } else {
        let mut out = Vec::with_capacity(one_dim.len() * one_dim.len());
        for &t1 in &one_dim {
            for &t2 in &one_dim {
                out.push(vec![t1, t2]);
            }
        }
        out
    }
}

/// Cor C.2: asserts Σ_{q_i ≤ Q} Σ′_{a_i mod q_i} |S((a_i/q_i)_i)|² ≤
/// (2N)^k ‖a‖², requiring Q ≤ N^{1/2}. Returns (lhs, rhs, pass).
pub fn farey_check(a: &TrigCoeffs, q_max: u64) -> Result<(f64, f64, bool)> {
    if (q_max as f64) > (a.n as f64).sqrt() + 1e-12 {
        return Err(Error::Domain(format!(
            "Q = {q_max} exceeds N^(1/2) = {}",
            (a.n as f64).sqrt()
        )));
    }
    let pts = farey_points(a.k, q_max);
    let terms: Vec<Result<f64>> = pts
        .par_chunks(64)
        .map(|chunk| {
            let mut acc = Kahan::new();
            for p in chunk {
                acc.add(trig_poly(a, p)?.norm_sqr());
            }
            Ok(acc.value())
        })
        .collect();
    let mut lhs = Kahan::new();
    for t in terms {
        lhs.add(t?);
    }
    let rhs = (2.0 * a.n as f64).powi(a.k as i32) * a.l2_norm_sq();
    let lhs = lhs.value();
    Ok((lhs, rhs, lhs <= rhs * (1.0 + 1e-12)))
}

/// Forbidden residues at one prime: either an explicit list of k-tuples,
/// or the §3.3 polynomial zero-set
/// (u² + nv²)(a₁u + b₁v)(a₂u + b₂v) ≡ 0 (mod p) in dimension 2.
#[derive(Debug, Clone)]
pub enum OmegaSpec {
    Explicit(Vec<Vec<u64>>),
    Poly {
        n: u64,
        lines: [(i64, i64); 2],
    },
}

impl OmegaSpec {
    /// Materialize the residue set mod p.
    pub fn residues(&self, k: u32, p: u64) -> Result<Vec<Vec<u64>>> {
        match self {
            OmegaSpec::Explicit(rs) => {
                for r in rs {
                    if r.len() != k as usize || r.iter().any(|&x| x >= p) {
                        return Err(Error::Domain(format!("bad residue {r:?} mod {p}")));
                    }
                }
                let mut rs = rs.clone();
                rs.sort();
                rs.dedup();
                Ok(rs)
            }
            OmegaSpec::Poly { n, lines } => {
                if k != 2 {
                    return Err(Error::Domain("polynomial Ω_p requires k = 2".into()));
                }
                let mut out = Vec::new();
                for u in 0..p {
                    for v in 0..p {
                        let quad = (u * u + (n % p) * v % p * v) % p;
                        let l1 = (lines[0].0 * u as i64 + lines[0].1 * v as i64).rem_euclid(p as i64);
                        let l2 = (lines[1].0 * u as i64 + lines[1].1 * v as i64).rem_euclid(p as i64);
                        if quad % p == 0 || l1 == 0 || l2 == 0 {
                            out.push(vec![u, v]);
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// A sieve system: per-prime forbidden residue sets Ω_p ⊆ (Z/p)^k for
/// p ≤ W, with densities α_p = |Ω_p|/p^k < 1.
#[derive(Debug, Clone)]
pub struct SieveSystem {
    pub k: u32,
    pub n: u64,
    /// (p, residues, α_p), sorted by p.
    pub omega: Vec<(u64, Vec<Vec<u64>>, f64)>,
}

impl SieveSystem {
    pub fn new(k: u32, n: u64, specs: &[(u64, OmegaSpec)]) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(Error::Domain("k must be 1 or 2".into()));
        }
        let mut omega = Vec::new();
        for (p, spec) in specs {
            if !is_prime_64(*p) {
                return Err(Error::Domain(format!("{p} is not prime")));
            }
            let rs = spec.residues(k, *p)?;
            let alpha = rs.len() as f64 / (*p as f64).powi(k as i32);
            if alpha >= 1.0 {
                return Err(Error::Domain(format!("α_{p} = 1: all residues forbidden")));
            }
            omega.push((*p, rs, alpha));
        }
        omega.sort_by_key(|&(p, _, _)| p);
        for w in omega.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Domain("duplicate prime in sieve system".into()));
            }
        }
        Ok(Self { k, n, omega })
    }

    /// h(p) = α_p/(1 − α_p); h multiplicative and supported on squarefree
    /// numbers composed of the system's primes.
    pub fn h_at_prime(&self, p: u64) -> f64 {
        self.omega
            .iter()
            .find(|&&(q, _, _)| q == p)
            .map(|&(_, _, a)| a / (1.0 - a))
            .unwrap_or(0.0)
    }

    /// Σ_{q ≤ limit} μ²(q) h(q) by subset enumeration over the system's
    /// primes (h vanishes elsewhere; q = 1 contributes 1).
    pub fn h_sum(&self, limit: f64) -> f64 {
        let primes: Vec<(u64, f64)> = self
            .omega
            .iter()
            .filter(|&&(_, _, a)| a > 0.0)
            .map(|&(p, _, a)| (p, a / (1.0 - a)))
            .collect();
        fn rec(primes: &[(u64, f64)], i: usize, q: f64, hq: f64, limit: f64, acc: &mut Kahan) {
            if i == primes.len() {
                acc.add(hq);
                return;
            }
            rec(primes, i + 1, q, hq, limit, acc);
            let (p, hp) = primes[i];
            let nq = q * p as f64;
            if nq <= limit {
                rec(primes, i + 1, nq, hq * hp, limit, acc);
            }
        }
        let mut acc = Kahan::new();
        rec(&primes, 0, 1.0, 1.0, limit, &mut acc);
        acc.value()
    }
}

const SIFT_N_MAX: u64 = 1_000;

/// Lemma C.3 / Eq. large-sieve-est: the sifted-set bound
/// (2N)^k / Σ_{q ≤ N^{1/2}} μ²(q) h(q), together with the h table at the
/// system's primes.
pub fn sieve_bound(sys: &SieveSystem, n_box: u64) -> Result<(f64, Vec<(u64, f64)>)> {
    let denom = sys.h_sum((n_box as f64).sqrt());
    let bound = (2.0 * n_box as f64).powi(sys.k as i32) / denom;
    let table = sys
        .omega
        .iter()
        .map(|&(p, _, a)| (p, a / (1.0 - a)))
        .collect();
    Ok((bound, table))
}

/// Exact count of x ∈ [−N, N]^k avoiding every Ω_p (brute force,
/// N ≤ 10³).
pub fn sifted_count(sys: &SieveSystem, n_box: u64) -> Result<u64> {
    if n_box > SIFT_N_MAX {
        return Err(Error::Capacity(format!(
            "brute sifted count infeasible at N = {n_box}"
        )));
    }
    let n = n_box as i64;
    // Per-prime membership bitmaps keyed (p, residue tuple) for speed.
    let allow = |x: &[i64]| -> bool {
        sys.omega.iter().all(|(p, rs, _)| {
            let red: Vec<u64> = x.iter().map(|&v| v.rem_euclid(*p as i64) as u64).collect();
            !rs.iter().any(|r| r[..] == red[..])
        })
    };
    if sys.k == 1 {
        let mut count = 0u64;
        for x in -n..=n {
            if allow(&[x]) {
                count += 1;
            }
        }
        Ok(count)
    } else {
        let rows: Vec<u64> = (-n..=n)
            .collect::<Vec<i64>>()
            .par_iter()
            .map(|&x| {
                let mut row = 0u64;
                for y in -n..=n {
                    if allow(&[x, y]) {
                        row += 1;
                    }
                }
                row
            })
            .collect();
        Ok(rows.iter().sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankinStatus {
    Pass,
    Fail,
    /// The Markov condition Σ α_p log p < (log N)/4 does not hold; the
    /// bound is not asserted.
    Inconclusive,
}

/// Eq. sumhq (§3.2): under the Markov condition, asserts
/// Σ_{q ≤ N^{1/2}} μ²(q) h(q) ≥ ½ ∏_{p ≤ W} (1 − α_p)^{−1}.
/// Returns (lhs, rhs, markov holds, status).
pub fn rankin_lower_bound_check(
    sys: &SieveSystem,
    n_box: u64,
) -> Result<(f64, f64, bool, RankinStatus)> {
    if n_box < 2 {
        return Err(Error::Domain("rankin check requires N ≥ 2".into()));
    }
    let lhs = sys.h_sum((n_box as f64).sqrt());
    let rhs: f64 = 0.5
        * sys
            .omega
            .iter()
            .map(|&(_, _, a)| 1.0 / (1.0 - a))
            .product::<f64>();
    let markov: f64 = sys
        .omega
        .iter()
        .map(|&(p, _, a)| a * (p as f64).ln())
        .sum();
    let markov_ok = markov < (n_box as f64).ln() / 4.0;
    let status = if !markov_ok {
        RankinStatus::Inconclusive
    } else if lhs >= rhs * (1.0 - 1e-12) {
        RankinStatus::Pass
    } else {
        RankinStatus::Fail
    };
    Ok((lhs, rhs, markov_ok, status))
}
