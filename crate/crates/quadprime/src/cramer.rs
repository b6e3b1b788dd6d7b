//! The Cramér approximant `Λ_Cramér,Q` and its sharp/flat truncation
//! (§8.2 machinery).
//!
//! `Λ_Cramér,Q(x) = ∏_{p ≤ Q}(1 − 1/p)^{-1} · 1_{gcd(x, p) = 1 ∀ p ≤ Q}`,
//! with the convention that it vanishes off `Z`. By inclusion–exclusion it
//! equals the signed sum over subsets `S` of the primes `≤ Q` of
//! `(−1)^{|S|} 1_{P_S | x}`; the sharp part keeps `|S| ≤ t` and the flat
//! part is the remainder.
//!
//! The sharp part is never evaluated by subset enumeration: only subsets of
//! primes dividing `x` contribute, so with `d` distinct prime divisors of
//! `x` below `Q`,
//!
//! `Λ^♯(x) = normalizer · Σ_{j ≤ min(d, ⌊t⌋)} (−1)^j C(d, j)`,
//!
//! a short alternating binomial sum.

use crate::arith::sieve_primes;
use crate::{Error, Result};
use num_rational::Ratio;

/// Parameters of the Cramér model at scale X.
#[derive(Debug, Clone)]
pub struct CramerParams {
    /// Scale X the parameters were derived from (0 when constructed
    /// directly from Q and t).
    pub x: f64,
    /// Real prime threshold Q (primes p ≤ Q participate).
    pub q: f64,
    /// Real subset-size threshold t.
    pub t: f64,
    /// ∏_{p ≤ Q} (1 − 1/p)^{-1}.
    pub normalizer: f64,
    /// The primes ≤ Q.
    pub primes: Vec<u64>,
}

const Q_MAX: f64 = 1e8;

fn build(x: f64, q: f64, t: f64) -> Result<CramerParams> {
    if !(q >= 2.0) {
        return Err(Error::Domain(format!(
            "Cramér threshold Q = {q} admits no primes"
        )));
    }
    if q > Q_MAX {
        return Err(Error::Capacity(format!("Q = {q} exceeds guard {Q_MAX}")));
    }
    let primes = sieve_primes(q.floor() as u64)?;
    let normalizer: f64 = primes
        .iter()
        .map(|&p| 1.0 / (1.0 - 1.0 / p as f64))
        .product();
    Ok(CramerParams {
        x,
        q,
        t,
        normalizer,
        primes,
    })
}

impl CramerParams {
    /// Paper parameters at scale X: Q = exp((log X^{1/2})^{1/10}) (Eq.
    /// q-choice) and t = 20 log log X (Eq. t-choice).
    pub fn from_x(x: f64) -> Result<Self> {
        if !(x > std::f64::consts::E) {
            return Err(Error::Domain(format!(
                "Cramér scale X = {x} must exceed e for t = 20 log log X"
            )));
        }
        let q = ((x.sqrt()).ln().powf(0.1)).exp();
        let t = 20.0 * x.ln().ln();
        build(x, q.max(2.0), t)
    }

    /// Explicit (Q, t), for desk-scale work and tests.
    pub fn explicit(q: f64, t: f64) -> Result<Self> {
        build(0.0, q, t)
    }

    /// Distinct primes ≤ Q dividing |x| (all of them when x = 0).
    fn prime_divisors(&self, x: i64) -> usize {
        let a = x.unsigned_abs();
        if a == 0 {
            return self.primes.len();
        }
        self.primes.iter().filter(|&&p| a % p == 0).count()
    }
}

/// Λ_Cramér,Q on Q (zero off Z, per the §1.4 support convention).
pub fn lambda_cramer(x: Ratio<i64>, params: &CramerParams) -> f64 {
    if !x.is_integer() {
        return 0.0;
    }
    lambda_cramer_int(x.to_integer(), params)
}

/// Λ_Cramér,Q on Z.
pub fn lambda_cramer_int(x: i64, params: &CramerParams) -> f64 {
    let a = x.unsigned_abs();
    if a == 0 {
        return 0.0;
    }
    if params.primes.iter().any(|&p| a % p == 0) {
        0.0
    } else {
        params.normalizer
    }
}

/// (Λ^♯(x), Λ^♭(x)) per Eqs. lam-sharp-def / lam-flat-def /
/// cramer-split, evaluated subset-free via the alternating binomial sum
/// over the primes ≤ Q dividing x.
pub fn lambda_sharp_flat(x: i64, params: &CramerParams) -> (f64, f64) {
    let d = params.prime_divisors(x);
    let cap = if params.t < 0.0 {
        // No subsets allowed at all (not even S = ∅).
        return (0.0, lambda_cramer_int(x, params));
    } else {
        (params.t.floor() as usize).min(d)
    };
    // Σ_{j=0}^{cap} (−1)^j C(d, j), exactly. d is bounded by the number of
    // distinct primes ≤ Q dividing x, which is tiny at any feasible scale.
    let mut sum: f64 = 0.0;
    let mut binom: f64 = 1.0; // C(d, j)
    for j in 0..=cap {
        if j > 0 {
            binom = binom * (d - j + 1) as f64 / j as f64;
        }
        sum += if j % 2 == 0 { binom } else { -binom };
    }
    let sharp = params.normalizer * sum;
    let flat = lambda_cramer_int(x, params) - sharp;
    (sharp, flat)
}

/// Literal subset-sum evaluation of Λ^♯ (test oracle; exponential in
/// π(Q), so only for tiny Q).
pub fn lambda_sharp_bruteforce(x: i64, params: &CramerParams) -> Result<f64> {
    let np = params.primes.len();
    if np > 20 {
        return Err(Error::Capacity(format!(
            "brute-force subset sum over {np} primes is infeasible"
        )));
    }
    let a = x.unsigned_abs();
    let mut sum = 0.0f64;
    for mask in 0u32..1 << np {
        let k = mask.count_ones() as f64;
        if k > params.t {
            continue;
        }
        // P_S | x iff every chosen prime divides x (every prime divides 0).
        let divides = (0..np).all(|i| mask >> i & 1 == 0 || a == 0 || a % params.primes[i] == 0);
        if divides {
            sum += if k as u64 % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    Ok(params.normalizer * sum)
}

/// Σ_{0 < x ≤ X^{1/2}} |Λ^♭(x)| against the Lemma 8.1 bound shape
/// X^{1/2}(log X)^{-8}: returns (sum, shape, sum/shape). Report-only —
/// the paper's implied constant is unspecified.
pub fn flat_l1_report(x: f64) -> Result<(f64, f64, f64)> {
    if !(x >= 16.0) {
        return Err(Error::Domain("flat_l1_report requires X >= 16".into()));
    }
    let params = CramerParams::from_x(x)?;
    let hi = x.sqrt() as i64;
    let mut acc = crate::Kahan::new();
    for v in 1..=hi {
        let (_, flat) = lambda_sharp_flat(v, &params);
        acc.add(flat.abs());
    }
    let shape = x.sqrt() * x.ln().powi(-8);
    let sum = acc.value();
    Ok((sum, shape, sum / shape))
}
