//! Canonical state-space realizations over left-infinite inputs.
//!
//! The crate models causal, time-invariant filters through state-space
//! systems driven from the infinite past. It decides the echo state
//! property from the spectral radius, extracts impulse responses with
//! certified l1 tail bounds, and reduces a system to canonical form
//! (strongly reachable and observable) by quotienting the reachable
//! subspace by the indistinguishable directions inside it. A finite-state
//! counterpart of the same constructions serves as a brute-force oracle
//! at desk scale: there the echo state property, reachability, and the
//! behavioural partition are all decided exactly by enumeration.
//!
//! Modules:
//! - [`signal`]: finite windows of left-infinite sequences, zero tail.
//! - [`linear`]: systems `x_t = A x_{t-1} + C z_t`, `y_t = W x_t`.
//! - [`subspace`]: reachable spans, observability kernels, intersections.
//! - [`reduction`]: the quotient that produces a canonical system.
//! - [`realization`]: shift realizations of finite-memory kernels.
//! - [`morphism`]: system maps, the change-of-basis action, isomorphism
//!   recovery from controllability data.
//! - [`finite`]: exhaustive finite-state analogues of all of the above.
//! - [`sampling`]: seeded generators for randomized verification sweeps.
//! - [`batch`]: data-parallel map over independent verification items.

pub mod batch;
pub mod finite;
pub mod linear;
pub mod morphism;
pub mod realization;
pub mod reduction;
pub mod sampling;
pub mod signal;
pub mod subspace;

pub use linear::{EspReport, EspStatus, Evaluation, ImpulseResponse, LinearSystem};
pub use realization::FiniteMemoryFilter;
pub use reduction::ReducedRealization;
pub use signal::{Signal, WeightingSequence};
pub use subspace::Subspace;

/// Relative singular-value cutoff used by rank decisions when the caller
/// does not supply one.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Width of the indeterminate band under the spectral-radius boundary.
pub const DEFAULT_MARGIN: f64 = 1e-8;

/// Absolute floor under the relative rank cutoff.
pub const RANK_FLOOR: f64 = 1e-12;

/// Condition estimate beyond which a rank decision is flagged unreliable.
pub const RANK_COND_LIMIT: f64 = 1e8;

/// Condition estimate beyond which a change of basis triggers a warning.
pub const BASIS_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite entry at position {index}: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("echo state property fails: {0}")]
    EspFails(String),
    #[error("echo state property indeterminate: spectral radius {rho} within {margin} of 1")]
    EspIndeterminate { rho: f64, margin: f64 },
    #[error("eigenvalue computation did not converge")]
    EigenConvergence,
    #[error("no contracting power of the state matrix within {k_max} steps")]
    NoContractingPower { k_max: usize },
    #[error("singular change of basis")]
    SingularMap,
    #[error("system is not canonical: {0}")]
    NotCanonical(String),
    #[error("systems are not isomorphic: {0}")]
    NoIsomorphism(String),
    #[error("accuracy {eps:e} is below the certified tail floor {floor:e}")]
    EpsBelowFloor { eps: f64, floor: f64 },
    #[error("operation cancelled")]
    Cancelled,
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite_slice(entries: &[f64]) -> Result<()> {
    for (index, &value) in entries.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
    }
    Ok(())
}
