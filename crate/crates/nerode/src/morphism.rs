//! Maps between state-space systems.
//!
//! A linear map `f` is a morphism from `(A1, C1, W1)` to `(A2, C2, W2)`
//! when it intertwines the dynamics (`f A1 = A2 f`, `f C1 = C2`) and
//! preserves the readout (`W1 = W2 f`). Morphisms transport solutions to
//! solutions, so two systems connected by an invertible morphism realize
//! the same filter. Invertible changes of basis act on systems by
//! `B: (A, C, W) -> (B A B^{-1}, B C, W B^{-1})`; the orbits of that
//! action are exactly the isomorphism classes, and for canonical systems
//! the connecting map is unique and recoverable from controllability
//! data.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::linear::{matrix_rows, LinearSystem};
use crate::subspace::{controllability_matrix, is_canonical};
use crate::{Error, Result, BASIS_COND_LIMIT};

const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LinearMapRepr {
    matrix: Vec<Vec<f64>>,
}

/// A linear map between state spaces, stored as a `target x source`
/// matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearMapRepr", into = "LinearMapRepr")]
pub struct LinearMap {
    matrix: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        crate::ensure_finite_slice(matrix.as_slice())?;
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ratio of extreme singular values; infinite when singular.
    pub fn condition_estimate(&self) -> Result<f64> {
        let m = &self.matrix;
        if m.nrows() == 0 || m.ncols() == 0 {
            return Ok(1.0);
        }
        let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or(Error::EigenConvergence)?;
        let sigma = &svd.singular_values;
        let smallest = sigma[sigma.len() - 1];
        if smallest == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(sigma[0] / smallest)
    }
}

impl TryFrom<LinearMapRepr> for LinearMap {
    type Error = Error;

    fn try_from(repr: LinearMapRepr) -> Result<Self> {
        let rows = repr.matrix.len();
        let cols = repr.matrix.first().map_or(0, Vec::len);
        let mut matrix = DMatrix::zeros(rows, cols);
        for (i, row) in repr.matrix.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(
                    "matrix rows have inconsistent lengths".into(),
                ));
            }
            for (j, &x) in row.iter().enumerate() {
                matrix[(i, j)] = x;
            }
        }
        LinearMap::new(matrix)
    }
}

impl From<LinearMap> for LinearMapRepr {
    fn from(map: LinearMap) -> LinearMapRepr {
        LinearMapRepr { matrix: matrix_rows(&map.matrix) }
    }
}

/// Residuals of the three morphism equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphismReport {
    /// `|f A1 - A2 f|`
    pub equivariance_residual: f64,
    /// `|f C1 - C2|`
    pub input_residual: f64,
    /// `|W1 - W2 f|`
    pub readout_residual: f64,
    pub passes: bool,
}

/// Applies the change-of-basis action: `(B A B^{-1}, B C, W B^{-1})`.
/// `B` must be square and invertible; a condition estimate beyond
/// [`BASIS_COND_LIMIT`] is allowed but logged, since the conjugated
/// system then carries amplified rounding error.
pub fn gl_action(basis: &LinearMap, sys: &LinearSystem) -> Result<LinearSystem> {
    let b = &basis.matrix;
    if b.nrows() != b.ncols() || b.nrows() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "change of basis is {}x{} on a {}-state system",
            b.nrows(),
            b.ncols(),
            sys.dim()
        )));
    }
    if sys.dim() == 0 {
        return Ok(sys.clone());
    }
    let condition = basis.condition_estimate()?;
    if !condition.is_finite() {
        return Err(Error::SingularMap);
    }
    if condition > BASIS_COND_LIMIT {
        log::warn!(
            "change of basis has condition estimate {condition:.3e}; \
             conjugated system may be inaccurate"
        );
    }
    let inverse = b.clone().try_inverse().ok_or(Error::SingularMap)?;
    LinearSystem::new(b * sys.a() * &inverse, b * sys.c(), sys.w() * &inverse)
}

/// The same action, under the name used when the emphasis is on the two
/// systems being conjugate rather than on the group acting.
pub fn conjugate_system(basis: &LinearMap, sys: &LinearSystem) -> Result<LinearSystem> {
    gl_action(basis, sys)
}

/// Checks the three morphism equations to the given tolerance.
pub fn check_morphism(
    f: &LinearMap,
    source: &LinearSystem,
    target: &LinearSystem,
    tol: f64,
) -> Result<MorphismReport> {
    if f.source_dim() != source.dim() || f.target_dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "map is {}x{} between systems of dimension {} and {}",
            f.target_dim(),
            f.source_dim(),
            source.dim(),
            target.dim()
        )));
    }
    let m = &f.matrix;
    let equivariance_residual = (m * source.a() - target.a() * m).norm();
    let input_residual = (m * source.c() - target.c()).norm();
    let readout_residual = (source.w() - target.w() * m).norm();
    let passes = equivariance_residual <= tol
        && input_residual <= tol
        && readout_residual <= tol;
    Ok(MorphismReport {
        equivariance_residual,
        input_residual,
        readout_residual,
        passes,
    })
}

/// Recovers the unique isomorphism between two canonical systems that
/// realize the same filter, as the map matching their controllability
/// matrices (`B R1 = R2`). Refuses when either system is not canonical,
/// when the impulse responses visibly differ over a `2N` horizon, or
/// when the candidate map fails the morphism equations at `10 * tol`.
pub fn find_isomorphism(
    source: &LinearSystem,
    target: &LinearSystem,
    tol: f64,
) -> Result<LinearMap> {
    let n = source.dim();
    if target.dim() != n {
        return Err(Error::NoIsomorphism(format!(
            "dimensions differ: {} vs {}",
            n,
            target.dim()
        )));
    }
    let source_report = is_canonical(source, tol)?;
    if !source_report.canonical {
        return Err(Error::NotCanonical(format!(
            "source has reachable dimension {} and kernel dimension {} in R^{n}",
            source_report.reachable_dim, source_report.kernel_dim
        )));
    }
    let target_report = is_canonical(target, tol)?;
    if !target_report.canonical {
        return Err(Error::NotCanonical(format!(
            "target has reachable dimension {} and kernel dimension {} in R^{n}",
            target_report.reachable_dim, target_report.kernel_dim
        )));
    }

    let horizon = 2 * n;
    let psi_source = source.impulse_response(horizon)?;
    let psi_target = target.impulse_response(horizon)?;
    let gap = psi_source
        .coefficients
        .iter()
        .zip(&psi_target.coefficients)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    if gap > tol {
        return Err(Error::NoIsomorphism(format!(
            "impulse responses differ by {gap:.3e} within horizon {horizon}"
        )));
    }

    if n == 0 {
        return LinearMap::new(DMatrix::zeros(0, 0));
    }

    // B R1 = R2, i.e. R1^T B^T = R2^T
    let r1 = controllability_matrix(source);
    let r2 = controllability_matrix(target);
    let solved = r1
        .transpose()
        .lu()
        .solve(&r2.transpose())
        .ok_or(Error::SingularMap)?;
    let candidate = LinearMap::new(solved.transpose())?;

    let report = check_morphism(&candidate, source, target, 10.0 * tol)?;
    if !report.passes {
        return Err(Error::NoIsomorphism(format!(
            "controllability match violates the morphism equations \
             (residuals {:.3e}, {:.3e}, {:.3e})",
            report.equivariance_residual, report.input_residual, report.readout_residual
        )));
    }
    Ok(candidate)
}
