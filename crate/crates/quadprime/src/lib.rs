//! A computational number theory workbench for studying primes of the form
//! `x^2 + n*y^2` with `x`, `y` prime, over the imaginary quadratic field
//! `K = Q(sqrt(-n))`.
//!
//! The crate implements, at desk scale, the explicit objects that appear in
//! the analytic study of such primes:
//!
//! * [`arith`] — prime sieves, deterministic 64-bit primality, and the
//!   classical arithmetic functions Λ, Λ′, τ, μ.
//! * [`quadfield`] — field invariants of `Q(sqrt(-n))`: discriminant,
//!   splitting types, the class group realized as reduced binary quadratic
//!   forms under Gauss composition, `L(1, χ_Δ)` via the class number formula,
//!   representation and ideal counts.
//! * [`idealmach`] — the formal ideal semigroup of `O_K`, principal-ideal
//!   indexing by lattice generators, and the Buchstab / DFI sieve
//!   decomposition with its exact combinatorial identities.
//! * [`cramer`] — the Cramér approximant `Λ_Cramér,Q` and its sharp/flat
//!   truncation.
//! * [`gowers`] — Gowers `U^k` norms, symmetric probability measures,
//!   Gowers–Peluse norms, graph systems, and the explicit-constant
//!   inequality suite.
//! * [`typesums`] — product-form weights `f ⊠_ℓ f′`, the headline prime
//!   sums, Type I/II evaluators, and the local density `σ(S₁,S₂)` with
//!   brute-force verification.
//! * [`constants`] — the singular constant `κ_n` by two independent routes.
//! * [`largesieve`] — the multi-dimensional large sieve and the arithmetic
//!   sieve bound with the Rankin-style lower bound.
//! * [`report`] — structured, machine-readable JSON reports and the
//!   deterministic report builders used by the CLI.

pub mod arith;
pub mod constants;
pub mod cramer;
pub mod gowers;
pub mod idealmach;
pub mod largesieve;
pub mod quadfield;
pub mod report;
pub mod typesums;

/// Crate-wide error type.
///
/// The variants map onto the process exit codes used by the CLI:
/// validation/domain errors exit 2, capacity errors exit 3, and failed
/// paper-identity assertions exit 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),
    /// The request exceeds a configured memory/time guard.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// An operation was invoked before required state was built.
    #[error("state error: {0}")]
    State(String),
    /// An exact identity asserted by the underlying mathematics failed to
    /// hold numerically. This always signals a bug, never an expected
    /// runtime condition.
    #[error("identity assertion failed: {0}")]
    Identity(String),
    /// Wrapper for I/O errors (caches, CSV inputs).
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::State(_) | Error::Io(_) => 2,
            Error::Capacity(_) => 3,
            Error::Identity(_) => 4,
        }
    }
}

/// Compensated (Kahan–Babuška) accumulator for deterministic summation.
///
/// Stripe-parallel sums across the crate accumulate per-stripe with this
/// type and then combine the stripes in fixed index order, so results are
/// bit-identical regardless of thread count.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Complex compensated accumulator (componentwise [`Kahan`]).
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanC {
    re: Kahan,
    im: Kahan,
}

impl KahanC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: num_complex::Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.value(), self.im.value())
    }
}

/// Relative closeness used by the exact-identity checks: `|a-b| <= tol * max(1, |a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1f64).max(a.abs()).max(b.abs())
}

/// Complex version of [`rel_close`].
pub fn rel_close_c(a: num_complex::Complex64, b: num_complex::Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1f64).max(a.norm()).max(b.norm())
}
