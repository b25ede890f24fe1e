//! State-space realizations of finite-memory kernels.
//!
//! A kernel that only ever sees the last `N` samples is realized by an
//! `N`-stage shift register: the state holds the retained window, the
//! transition shifts it one step into the past, and the readout takes
//! the inner product with the kernel coefficients. Reducing that
//! register yields the minimal realization; its dimension must agree
//! with the rank of the Hankel matrix built from the same coefficients,
//! which is computed here independently of the reduction path and serves
//! as the minimality oracle.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::linear::{ImpulseResponse, LinearSystem};
use crate::reduction::{reduce, ReducedRealization};
use crate::subspace::rank_threshold;
use crate::{ensure_finite_slice, Error, Result};

/// A kernel supported on the last `N` samples, stored past-to-present:
/// `psi[0] = psi_{-N+1}, ..., psi[N-1] = psi_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterRepr", into = "FilterRepr")]
pub struct FiniteMemoryFilter {
    psi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FilterRepr {
    psi: Vec<f64>,
}

impl FiniteMemoryFilter {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        ensure_finite_slice(&psi)?;
        Ok(Self { psi })
    }

    /// Coefficients past-to-present.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Memory length `N`.
    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Kernel coefficient `psi_{-j}`; zero beyond the memory.
    pub fn coefficient(&self, j: usize) -> f64 {
        if j < self.psi.len() {
            self.psi[self.psi.len() - 1 - j]
        } else {
            0.0
        }
    }
}

impl TryFrom<FilterRepr> for FiniteMemoryFilter {
    type Error = Error;

    fn try_from(repr: FilterRepr) -> Result<Self> {
        FiniteMemoryFilter::new(repr.psi)
    }
}

impl From<FiniteMemoryFilter> for FilterRepr {
    fn from(f: FiniteMemoryFilter) -> FilterRepr {
        FilterRepr { psi: f.psi }
    }
}

/// Result of fitting a state-space system to a measured kernel with a
/// permitted accuracy budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateRealization {
    pub realization: ReducedRealization,
    /// l1 mass of everything dropped: measured coefficients beyond the
    /// cut plus the certified tail of the measurement itself.
    pub truncation_error: f64,
    /// Number of leading coefficients kept.
    pub kept: usize,
}

/// The `N`-stage shift register realizing the kernel exactly: the state
/// carries the retained window `(z_{-N+1}, ..., z_0)`, `A` shifts it one
/// slot toward the past, `C` feeds the new sample into the last slot and
/// `W` holds the kernel coefficients.
pub fn shift_realization(filter: &FiniteMemoryFilter) -> LinearSystem {
    let n = filter.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    let mut c = DVector::zeros(n);
    if n > 0 {
        c[n - 1] = 1.0;
    }
    let w = RowDVector::from_row_slice(filter.psi());
    LinearSystem::new(a, c, w).expect("shift register shapes are consistent by construction")
}

/// Minimal state-space realization of the kernel: the reduced shift
/// register. Its dimension equals the Hankel rank of the coefficients.
pub fn minimal_realization(filter: &FiniteMemoryFilter, tol: f64) -> Result<ReducedRealization> {
    reduce(&shift_realization(filter), tol)
}

/// `N x N` Hankel matrix `H[i][j] = psi_{-(i+j)}` of the kernel.
pub fn hankel_matrix(filter: &FiniteMemoryFilter) -> DMatrix<f64> {
    let n = filter.len();
    DMatrix::from_fn(n, n, |i, j| filter.coefficient(i + j))
}

/// Numerical rank of the Hankel matrix under the global rank policy.
/// This is the independent minimality oracle: it never goes through the
/// reduction path.
pub fn hankel_rank(filter: &FiniteMemoryFilter, tol: f64) -> Result<usize> {
    numerical_rank(&hankel_matrix(filter), tol)
}

/// Numerical rank of an impulse-response Hankel factor; used to
/// cross-check reduced dimensions of general systems.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let svd = nalgebra::SVD::try_new(m.clone(), false, false, f64::EPSILON, 100_000)
        .ok_or(Error::EigenConvergence)?;
    let sigma = &svd.singular_values;
    if sigma[0] <= crate::RANK_FLOOR {
        return Ok(0);
    }
    let threshold = rank_threshold(sigma[0], tol);
    Ok(sigma.iter().take_while(|&&s| s > threshold).count())
}

/// Truncates a measured kernel to the shortest prefix whose dropped l1
/// mass fits within `eps`, then realizes the prefix minimally. The rank
/// decisions inside the realization also run at `eps`: directions
/// smaller than the requested accuracy are noise by assumption.
pub fn approximate_realization(
    psi: &ImpulseResponse,
    eps: f64,
) -> Result<ApproximateRealization> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "accuracy must be positive, got {eps}"
        )));
    }
    if psi.tail_bound >= eps {
        return Err(Error::EpsBelowFloor { eps, floor: psi.tail_bound });
    }
    ensure_finite_slice(&psi.coefficients)?;

    // dropping m..end costs |psi_m| + |psi_{m+1}| + ... + tail_bound;
    // walk the cut backwards while the budget allows
    let mut kept = psi.coefficients.len();
    let mut dropped = psi.tail_bound;
    while kept > 0 {
        let next = dropped + psi.coefficients[kept - 1].abs();
        if next > eps {
            break;
        }
        dropped = next;
        kept -= 1;
    }

    // reverse into past-to-present order for the register
    let prefix: Vec<f64> = psi.coefficients[..kept].iter().rev().copied().collect();
    let filter = FiniteMemoryFilter::new(prefix)?;
    let rank_tol = eps.min(0.5);
    let realization = minimal_realization(&filter, rank_tol)?;
    Ok(ApproximateRealization { realization, truncation_error: dropped, kept })
}
