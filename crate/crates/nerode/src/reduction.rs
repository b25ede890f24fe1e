//! Reduction of a state-space system to canonical form.
//!
//! The construction quotients the reachable subspace by the
//! indistinguishable directions inside it. Concretely, with `R` the
//! reachable span and `K` its intersection with the observability
//! kernel, the reduced state space is the orthogonal complement of `K`
//! inside `R`, carried by an orthonormal basis `Q`. The projection
//! `pi = Q^T` and section `sigma = Q` then transport the system:
//! `A_red = pi A sigma`, `C_red = pi C`, `W_red = W sigma`. On the
//! reachable span these satisfy the exact relations
//! `pi A v = A_red pi v` and `W v = W_red pi v`, because `A` maps both
//! `R` and `K` into themselves and `W` vanishes on `K`. The reduced
//! system realizes the same filter, is strongly reachable and
//! observable, and its spectrum sits inside the original one.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::linear::{complex_eigenvalues_of, matrix_rows, LinearSystem};
use crate::subspace::{
    fix_sign, intersect, is_canonical, observability_kernel, reachable_subspace,
    CanonicalReport, Subspace,
};
use crate::{Error, Result};

const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReducedRealizationRepr {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<f64>,
    projection: Vec<Vec<f64>>,
    section: Vec<Vec<f64>>,
}

/// A reduced system together with the maps that connect it to the
/// original state space: `projection` (rows of the reduced basis) sends
/// original states to reduced coordinates, `section` embeds them back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReducedRealizationRepr", into = "ReducedRealizationRepr")]
pub struct ReducedRealization {
    pub system: LinearSystem,
    /// `n x N` with orthonormal rows.
    pub projection: DMatrix<f64>,
    /// `N x n`, the transpose of `projection`.
    pub section: DMatrix<f64>,
    /// Carried over from the rank decisions that produced the basis.
    pub unreliable_rank: bool,
}

impl ReducedRealization {
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn original_dim(&self) -> usize {
        self.projection.ncols()
    }
}

/// Residuals checked by [`verify_reduction`]; all of them must stay
/// within tolerance for `passes` to hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// Max gap between original and reduced impulse coefficients.
    pub impulse_gap: f64,
    pub canonical: CanonicalReport,
    /// How far `projection * section` sits from the identity.
    pub pi_sigma_residual: f64,
    /// Max over reachable basis vectors `v` of `|pi A v - A_red pi v|`.
    pub equivariance_residual: f64,
    /// Max over reachable basis vectors `v` of `|W v - W_red pi v|`.
    pub readout_residual: f64,
    /// Norm of `projection` applied to the quotiented-out directions.
    pub annihilation_residual: f64,
    /// Max distance from a reduced eigenvalue to the original spectrum.
    pub spectrum_residual: f64,
    pub passes: bool,
}

/// Quotients the system to canonical form. Requires the echo state
/// property; the rank decisions use `tol` under the global policy.
pub fn reduce(sys: &LinearSystem, tol: f64) -> Result<ReducedRealization> {
    sys.require_esp()?;
    let reach = reachable_subspace(sys, tol)?;
    let kernel = observability_kernel(sys, tol)?;
    let meet = intersect(&reach, &kernel)?;
    let basis = complement_within(&reach, &meet)?;
    let unreliable_rank =
        reach.unreliable_rank() || kernel.unreliable_rank() || meet.unreliable_rank();

    let projection = basis.transpose();
    let section = basis;
    let a_red = &projection * sys.a() * &section;
    let c_red = &projection * sys.c();
    let w_red = sys.w() * &section;
    let system = LinearSystem::new(a_red, c_red, w_red)?;
    Ok(ReducedRealization { system, projection, section, unreliable_rank })
}

/// Orthonormal basis of the orthogonal complement of `inner` inside
/// `outer` (`inner` must be contained in `outer`). In the coordinates
/// of `outer` the map `coords = inner^T outer` has exactly orthonormal
/// rows, so `I - coords^T coords` projects onto the complement and its
/// singular values split cleanly at one and zero.
fn complement_within(outer: &Subspace, inner: &Subspace) -> Result<DMatrix<f64>> {
    let r = outer.dim();
    let p = inner.dim();
    if p == 0 {
        return Ok(outer.basis().clone());
    }
    if p == r {
        return Ok(DMatrix::zeros(outer.ambient_dim(), 0));
    }
    let coords = inner.basis().transpose() * outer.basis();
    let projector = DMatrix::identity(r, r) - coords.transpose() * &coords;
    let svd = SVD::try_new(projector, true, false, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenConvergence)?;
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Internal("SVD did not return left singular vectors".into()))?;
    if svd.singular_values[r - p - 1] < 0.5 {
        return Err(Error::Internal(
            "complement projector is rank deficient; inner space is not \
             contained in the outer space"
                .into(),
        ));
    }
    let mut basis = DMatrix::zeros(outer.ambient_dim(), r - p);
    for i in 0..(r - p) {
        let mut col = outer.basis() * u.column(i);
        fix_sign(&mut col);
        basis.set_column(i, &col);
    }
    Ok(basis)
}

/// Replays the reduction invariants against the original system.
pub fn verify_reduction(
    original: &LinearSystem,
    reduced: &ReducedRealization,
    horizon: usize,
    tol: f64,
) -> Result<ReductionReport> {
    if reduced.projection.ncols() != original.dim() {
        return Err(Error::DimensionMismatch(format!(
            "projection maps from R^{}, original lives in R^{}",
            reduced.projection.ncols(),
            original.dim()
        )));
    }
    let psi_original = original.impulse_response(horizon)?;
    let psi_reduced = reduced.system.impulse_response(horizon)?;
    let impulse_gap = psi_original
        .coefficients
        .iter()
        .zip(&psi_reduced.coefficients)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));

    let canonical = is_canonical(&reduced.system, tol)?;

    let n = reduced.dim();
    let pi_sigma_residual =
        (&reduced.projection * &reduced.section - DMatrix::<f64>::identity(n, n)).norm();

    let reach = reachable_subspace(original, tol)?;
    let kernel = observability_kernel(original, tol)?;
    let meet = intersect(&reach, &kernel)?;

    let mut equivariance_residual = 0.0_f64;
    let mut readout_residual = 0.0_f64;
    for j in 0..reach.dim() {
        let v: DVector<f64> = reach.basis().column(j).into();
        let lhs = &reduced.projection * (original.a() * &v);
        let rhs = reduced.system.a() * (&reduced.projection * &v);
        equivariance_residual = equivariance_residual.max((lhs - rhs).norm());
        let direct = (original.w() * &v)[(0, 0)];
        let through = (reduced.system.w() * (&reduced.projection * &v))[(0, 0)];
        readout_residual = readout_residual.max((direct - through).abs());
    }

    let annihilation_residual = if meet.dim() == 0 {
        0.0
    } else {
        (&reduced.projection * meet.basis()).norm()
    };

    let spectrum_residual = spectrum_distance(reduced.system.a(), original.a())?;

    let passes = impulse_gap <= tol
        && canonical.canonical
        && pi_sigma_residual <= tol
        && equivariance_residual <= tol
        && readout_residual <= tol
        && annihilation_residual <= tol
        && spectrum_residual <= tol;

    Ok(ReductionReport {
        impulse_gap,
        canonical,
        pi_sigma_residual,
        equivariance_residual,
        readout_residual,
        annihilation_residual,
        spectrum_residual,
        passes,
    })
}

/// Max over eigenvalues of `inner` of the distance to the spectrum of
/// `outer`; zero when `inner` is empty.
fn spectrum_distance(inner: &DMatrix<f64>, outer: &DMatrix<f64>) -> Result<f64> {
    if inner.nrows() == 0 {
        return Ok(0.0);
    }
    let inner_eigs = complex_eigenvalues_of(inner)?;
    let outer_eigs = complex_eigenvalues_of(outer)?;
    let mut worst = 0.0_f64;
    for mu in &inner_eigs {
        let nearest = outer_eigs
            .iter()
            .map(|lambda| (mu - lambda).norm())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(worst)
}

impl TryFrom<ReducedRealizationRepr> for ReducedRealization {
    type Error = Error;

    fn try_from(repr: ReducedRealizationRepr) -> Result<Self> {
        let system = LinearSystem::from_rows(&repr.a, &repr.c, &repr.w)?;
        let n = system.dim();
        let rows = repr.projection.len();
        if rows != n {
            return Err(Error::DimensionMismatch(format!(
                "projection has {rows} rows for a {n}-state reduced system"
            )));
        }
        let big = repr.projection.first().map_or(0, Vec::len);
        let mut projection = DMatrix::zeros(n, big);
        for (i, row) in repr.projection.iter().enumerate() {
            if row.len() != big {
                return Err(Error::DimensionMismatch(
                    "projection rows have inconsistent lengths".into(),
                ));
            }
            crate::ensure_finite_slice(row)?;
            for (j, &x) in row.iter().enumerate() {
                projection[(i, j)] = x;
            }
        }
        if repr.section.len() != big {
            return Err(Error::DimensionMismatch(format!(
                "section has {} rows, projection maps from R^{big}",
                repr.section.len()
            )));
        }
        let mut section = DMatrix::zeros(big, n);
        for (i, row) in repr.section.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(
                    "section rows have inconsistent lengths".into(),
                ));
            }
            crate::ensure_finite_slice(row)?;
            for (j, &x) in row.iter().enumerate() {
                section[(i, j)] = x;
            }
        }
        Ok(ReducedRealization { system, projection, section, unreliable_rank: false })
    }
}

impl From<ReducedRealization> for ReducedRealizationRepr {
    fn from(red: ReducedRealization) -> ReducedRealizationRepr {
        ReducedRealizationRepr {
            a: matrix_rows(red.system.a()),
            c: red.system.c().as_slice().to_vec(),
            w: red.system.w().iter().copied().collect(),
            projection: matrix_rows(&red.projection),
            section: matrix_rows(&red.section),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_TOL;

    fn diag_system() -> LinearSystem {
        LinearSystem::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.3]], &[1.0, 0.0], &[1.0, 1.0])
            .unwrap()
    }

    #[test]
    fn diag_system_reduces_to_scalar() {
        let red = reduce(&diag_system(), DEFAULT_TOL).unwrap();
        assert_eq!(red.dim(), 1);
        assert!((red.system.a()[(0, 0)] - 0.5).abs() < 1e-10);
        assert!((red.system.c()[0] - 1.0).abs() < 1e-10);
        assert!((red.system.w()[0] - 1.0).abs() < 1e-10);
        let report = verify_reduction(&diag_system(), &red, 50, DEFAULT_TOL).unwrap();
        assert!(report.passes, "{report:?}");
    }

    #[test]
    fn two_state_shift_with_silent_oldest_slot() {
        // kernel (0, 1): the older register never reaches the readout
        let sys = LinearSystem::from_rows(
            &[vec![0.0, 1.0], vec![0.0, 0.0]],
            &[0.0, 1.0],
            &[0.0, 1.0],
        )
        .unwrap();
        let red = reduce(&sys, DEFAULT_TOL).unwrap();
        assert_eq!(red.dim(), 1);
        assert!(red.system.a()[(0, 0)].abs() < 1e-12);
        let cw = red.system.c()[0] * red.system.w()[0];
        assert!((cw - 1.0).abs() < 1e-12);
        let report = verify_reduction(&sys, &red, 20, DEFAULT_TOL).unwrap();
        assert!(report.passes, "{report:?}");
    }

    #[test]
    fn canonical_system_keeps_its_dimension() {
        let sys = LinearSystem::from_rows(
            &[
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0],
            ],
            &[0.0, 0.0, 1.0],
            &[2.0, -1.0, 3.0],
        )
        .unwrap();
        let red = reduce(&sys, DEFAULT_TOL).unwrap();
        assert_eq!(red.dim(), 3);
        // the reduced matrix is a full Jordan block, whose eigenvalues
        // no solver locates better than roughly eps^(1/3), so the
        // spectrum comparison gets a tolerance matching that limit
        let report = verify_reduction(&sys, &red, 20, 1e-5).unwrap();
        assert!(report.passes, "{report:?}");
        assert!(report.impulse_gap < 1e-12);
        assert!(report.equivariance_residual < 1e-12);
    }

    #[test]
    fn zero_readout_reduces_to_nothing() {
        let sys = LinearSystem::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.3]], &[1.0, 1.0], &[0.0, 0.0])
            .unwrap();
        let red = reduce(&sys, DEFAULT_TOL).unwrap();
        assert_eq!(red.dim(), 0);
        let report = verify_reduction(&sys, &red, 20, DEFAULT_TOL).unwrap();
        assert!(report.passes, "{report:?}");
    }

    #[test]
    fn reduce_requires_esp() {
        let sys = LinearSystem::from_rows(&[vec![1.5]], &[1.0], &[1.0]).unwrap();
        assert!(matches!(reduce(&sys, DEFAULT_TOL), Err(Error::EspFails(_))));
    }

    #[test]
    fn perturbed_reduction_fails_verification() {
        let sys = diag_system();
        let red = reduce(&sys, DEFAULT_TOL).unwrap();
        let mut bad_a = red.system.a().clone();
        bad_a[(0, 0)] += 1e-3;
        let tampered = ReducedRealization {
            system: LinearSystem::new(
                bad_a,
                red.system.c().clone(),
                red.system.w().clone(),
            )
            .unwrap(),
            projection: red.projection.clone(),
            section: red.section.clone(),
            unreliable_rank: false,
        };
        let report = verify_reduction(&sys, &tampered, 50, DEFAULT_TOL).unwrap();
        assert!(!report.passes);
        assert!(report.impulse_gap >= 1e-4);
    }

    #[test]
    fn serde_round_trip() {
        let red = reduce(&diag_system(), DEFAULT_TOL).unwrap();
        let text = serde_json::to_string(&red).unwrap();
        assert!(text.contains("\"projection\""));
        assert!(text.contains("\"section\""));
        let back: ReducedRealization = serde_json::from_str(&text).unwrap();
        assert_eq!(back.system, red.system);
        assert_eq!(back.projection, red.projection);
    }
}
