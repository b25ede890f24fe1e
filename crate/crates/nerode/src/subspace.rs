//! Subspaces of the state space and the two that drive reduction: the
//! span reachable from the infinite past and the kernel of the stacked
//! observation rows.
//!
//! Rank decisions follow one policy everywhere: singular values below
//! `tol * sigma_max`, with an absolute floor of [`crate::RANK_FLOOR`],
//! count as zero. Bases are orthonormal, kept in the order the spanning
//! vectors were supplied (Krylov order for reachable spans), and signed
//! so the first non-negligible coordinate of each basis vector is
//! positive. That makes every basis reproducible bit-for-bit across runs.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::linear::{operator_norm, LinearSystem};
use crate::{Error, Result, RANK_COND_LIMIT, RANK_FLOOR};

const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SubspaceRepr {
    ambient_dim: usize,
    basis: Vec<Vec<f64>>,
    tol: f64,
}

/// A linear subspace of `R^N` carried by an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceRepr", into = "SubspaceRepr")]
pub struct Subspace {
    ambient_dim: usize,
    /// `ambient_dim x dim`, orthonormal columns.
    basis: DMatrix<f64>,
    tol: f64,
    /// Set when the rank decision behind this basis sat close to the
    /// cutoff (condition estimate above [`RANK_COND_LIMIT`]).
    unreliable_rank: bool,
}

impl Subspace {
    /// Wraps an already-orthonormal basis. Columns are checked for
    /// orthonormality at a loose fixed tolerance.
    pub fn from_orthonormal_basis(
        ambient_dim: usize,
        basis: DMatrix<f64>,
        tol: f64,
    ) -> Result<Self> {
        if basis.nrows() != ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "basis vectors live in R^{}, ambient dimension says {}",
                basis.nrows(),
                ambient_dim
            )));
        }
        if basis.ncols() > ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "{} basis vectors cannot be independent in R^{}",
                basis.ncols(),
                ambient_dim
            )));
        }
        check_tol(tol)?;
        let gram = basis.transpose() * &basis;
        let eye = DMatrix::<f64>::identity(basis.ncols(), basis.ncols());
        if (gram - eye).norm() > 1e-8 {
            return Err(Error::InvalidParameter(
                "basis columns are not orthonormal".into(),
            ));
        }
        Ok(Self { ambient_dim, basis, tol, unreliable_rank: false })
    }

    /// The whole of `R^n`.
    pub fn full(ambient_dim: usize, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        Ok(Self {
            ambient_dim,
            basis: DMatrix::identity(ambient_dim, ambient_dim),
            tol,
            unreliable_rank: false,
        })
    }

    /// The zero subspace of `R^n`.
    pub fn trivial(ambient_dim: usize, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        Ok(Self {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
            tol,
            unreliable_rank: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn unreliable_rank(&self) -> bool {
        self.unreliable_rank
    }

    pub(crate) fn flag_unreliable(mut self, unreliable: bool) -> Self {
        self.unreliable_rank = self.unreliable_rank || unreliable;
        self
    }

    /// Distance from `v` to the subspace: norm of `v - B B^T v`.
    pub fn residual(&self, v: &DVector<f64>) -> Result<f64> {
        if v.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} in ambient dimension {}",
                v.len(),
                self.ambient_dim
            )));
        }
        let coords = self.basis.transpose() * v;
        Ok((v - &self.basis * coords).norm())
    }

    /// Whether `v` lies in the subspace up to `slack`, relative to the
    /// vector's own norm.
    pub fn contains(&self, v: &DVector<f64>, slack: f64) -> Result<bool> {
        Ok(self.residual(v)? <= slack * v.norm().max(1.0))
    }
}

impl TryFrom<SubspaceRepr> for Subspace {
    type Error = Error;

    fn try_from(repr: SubspaceRepr) -> Result<Self> {
        let k = repr.basis.len();
        for (i, col) in repr.basis.iter().enumerate() {
            if col.len() != repr.ambient_dim {
                return Err(Error::DimensionMismatch(format!(
                    "basis vector {i} has length {} in ambient dimension {}",
                    col.len(),
                    repr.ambient_dim
                )));
            }
            crate::ensure_finite_slice(col)?;
        }
        let mut basis = DMatrix::zeros(repr.ambient_dim, k);
        for (i, col) in repr.basis.iter().enumerate() {
            basis.set_column(i, &DVector::from_column_slice(col));
        }
        Subspace::from_orthonormal_basis(repr.ambient_dim, basis, repr.tol)
    }
}

impl From<Subspace> for SubspaceRepr {
    fn from(s: Subspace) -> SubspaceRepr {
        SubspaceRepr {
            ambient_dim: s.ambient_dim,
            basis: (0..s.basis.ncols())
                .map(|j| s.basis.column(j).iter().copied().collect())
                .collect(),
            tol: s.tol,
        }
    }
}

/// Reachability report produced by [`is_canonical`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalReport {
    pub canonical: bool,
    pub reachable_dim: usize,
    pub kernel_dim: usize,
}

/// `N x depth` matrix with columns `C, AC, ..., A^{depth-1} C`.
pub fn krylov_matrix(sys: &LinearSystem, depth: usize) -> DMatrix<f64> {
    let n = sys.dim();
    let mut m = DMatrix::zeros(n, depth);
    let mut v = sys.c().clone();
    for j in 0..depth {
        m.set_column(j, &v);
        if j + 1 < depth {
            v = sys.a() * v;
        }
    }
    m
}

/// `depth x N` matrix with rows `W, WA, ..., W A^{depth-1}`.
pub fn observation_matrix(sys: &LinearSystem, depth: usize) -> DMatrix<f64> {
    let n = sys.dim();
    let mut m = DMatrix::zeros(depth, n);
    let mut row = sys.w().clone();
    for i in 0..depth {
        m.set_row(i, &row);
        if i + 1 < depth {
            row = &row * sys.a();
        }
    }
    m
}

/// Square controllability matrix, the `depth = N` Krylov matrix.
pub fn controllability_matrix(sys: &LinearSystem) -> DMatrix<f64> {
    krylov_matrix(sys, sys.dim())
}

/// Square observability matrix, the `depth = N` observation matrix.
pub fn observability_matrix(sys: &LinearSystem) -> DMatrix<f64> {
    observation_matrix(sys, sys.dim())
}

/// Span of the first `depth` iterated input directions.
pub fn krylov_subspace(sys: &LinearSystem, depth: usize, tol: f64) -> Result<Subspace> {
    check_tol(tol)?;
    column_space(&krylov_matrix(sys, depth), sys.dim(), tol)
}

/// Span of the iterated input directions `C, AC, ..., A^{N-1} C`; by the
/// characteristic-polynomial recursion, higher powers add nothing.
pub fn reachable_subspace(sys: &LinearSystem, tol: f64) -> Result<Subspace> {
    krylov_subspace(sys, sys.dim(), tol)
}

/// Common kernel of the rows `W A^i`, `i < depth`. Computed through the
/// projector onto the row space, so the depth may be smaller or larger
/// than the state dimension.
pub fn observation_kernel(sys: &LinearSystem, depth: usize, tol: f64) -> Result<Subspace> {
    check_tol(tol)?;
    let n = sys.dim();
    if n == 0 {
        return Subspace::trivial(0, tol);
    }
    if depth == 0 {
        return Subspace::full(n, tol);
    }
    let obs = observation_matrix(sys, depth);
    let svd = SVD::try_new(obs, false, true, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenConvergence)?;
    let sigma = &svd.singular_values;
    let threshold = rank_threshold(sigma[0], tol);
    let rank = sigma.iter().take_while(|&&s| s > threshold).count();
    let unreliable = rank > 0 && sigma[0] / sigma[rank - 1] > RANK_COND_LIMIT;
    if rank == n {
        return Ok(Subspace::trivial(n, tol)?.flag_unreliable(unreliable));
    }
    let v_t = svd.v_t.as_ref().ok_or_else(|| {
        Error::Internal("SVD did not return right singular vectors".into())
    })?;
    let mut row_projector = DMatrix::<f64>::identity(n, n);
    for i in 0..rank {
        let v: DVector<f64> = v_t.row(i).transpose();
        row_projector -= &v * v.transpose();
    }
    let proj_svd = SVD::try_new(row_projector, true, false, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenConvergence)?;
    let u = proj_svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Internal("SVD did not return left singular vectors".into()))?;
    let mut basis = DMatrix::zeros(n, n - rank);
    for i in 0..(n - rank) {
        let mut col: DVector<f64> = u.column(i).into();
        fix_sign(&mut col);
        basis.set_column(i, &col);
    }
    Ok(Subspace {
        ambient_dim: n,
        basis,
        tol,
        unreliable_rank: unreliable,
    })
}

/// Kernel of the stacked rows `W A^i`, `i < N`: the directions that no
/// future readout can distinguish from zero.
pub fn observability_kernel(sys: &LinearSystem, tol: f64) -> Result<Subspace> {
    observation_kernel(sys, sys.dim(), tol)
}

/// Intersection via principal angles: directions of one subspace whose
/// projection onto the other has unit length, up to tolerance.
pub fn intersect(s1: &Subspace, s2: &Subspace) -> Result<Subspace> {
    if s1.ambient_dim != s2.ambient_dim {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions differ: {} vs {}",
            s1.ambient_dim, s2.ambient_dim
        )));
    }
    let tol = s1.tol.max(s2.tol);
    let unreliable = s1.unreliable_rank || s2.unreliable_rank;
    if s1.dim() == 0 || s2.dim() == 0 {
        return Ok(Subspace::trivial(s1.ambient_dim, tol)?.flag_unreliable(unreliable));
    }
    let cross = s1.basis.transpose() * &s2.basis;
    let svd = SVD::try_new(cross, true, false, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenConvergence)?;
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Internal("SVD did not return left singular vectors".into()))?;
    let count = svd
        .singular_values
        .iter()
        .take_while(|&&cosine| cosine >= 1.0 - tol)
        .count();
    let mut vectors = DMatrix::zeros(s1.ambient_dim, count);
    for i in 0..count {
        let col: DVector<f64> = &s1.basis * u.column(i);
        vectors.set_column(i, &col);
    }
    // The columns are orthonormal up to rounding; re-orthonormalize so
    // downstream projectors stay clean, then fix signs.
    let basis = orthonormalize_in_order(&vectors, 0.5).map(|(b, _)| b)?;
    Ok(Subspace {
        ambient_dim: s1.ambient_dim,
        basis,
        tol,
        unreliable_rank: unreliable,
    })
}

/// A system is canonical when every state is reachable from the infinite
/// past and no nonzero state is silent under all future readouts.
pub fn is_canonical(sys: &LinearSystem, tol: f64) -> Result<CanonicalReport> {
    sys.require_esp()?;
    let reachable_dim = reachable_subspace(sys, tol)?.dim();
    let kernel_dim = observability_kernel(sys, tol)?.dim();
    Ok(CanonicalReport {
        canonical: reachable_dim == sys.dim() && kernel_dim == 0,
        reachable_dim,
        kernel_dim,
    })
}

/// Orthonormal basis for the column space of `m`, visiting columns in
/// their given order so the result is deterministic in exact arithmetic.
/// The acceptance threshold comes from the singular values of `m` under
/// the global rank policy.
fn column_space(m: &DMatrix<f64>, ambient_dim: usize, tol: f64) -> Result<Subspace> {
    if ambient_dim == 0 || m.ncols() == 0 {
        return Subspace::trivial(ambient_dim, tol);
    }
    let sigma_max = operator_norm(m)?;
    if sigma_max <= RANK_FLOOR {
        return Subspace::trivial(ambient_dim, tol);
    }
    let threshold = rank_threshold(sigma_max, tol);
    let (basis, smallest_kept) = orthonormalize_in_order(m, threshold)?;
    let unreliable = basis.ncols() > 0 && sigma_max / smallest_kept > RANK_COND_LIMIT;
    Ok(Subspace {
        ambient_dim,
        basis,
        tol,
        unreliable_rank: unreliable,
    })
}

/// Modified Gram-Schmidt with a re-orthogonalization pass. Columns whose
/// residual after projection stays above `threshold` are kept, normalized
/// and sign-fixed; the rest are treated as dependent. Returns the basis
/// and the smallest accepted residual (infinite when nothing is kept).
fn orthonormalize_in_order(
    m: &DMatrix<f64>,
    threshold: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    let mut smallest = f64::INFINITY;
    for j in 0..m.ncols() {
        let mut v: DVector<f64> = m.column(j).into();
        for pass in 0..2 {
            for q in &kept {
                let coeff = q.dot(&v);
                v -= q * coeff;
            }
            if pass == 0 && kept.is_empty() {
                break;
            }
        }
        let norm = v.norm();
        if norm > threshold {
            smallest = smallest.min(norm);
            let mut q = v / norm;
            fix_sign(&mut q);
            kept.push(q);
        }
        if kept.len() == m.nrows() {
            break;
        }
    }
    let mut basis = DMatrix::zeros(m.nrows(), kept.len());
    for (i, q) in kept.iter().enumerate() {
        basis.set_column(i, q);
    }
    Ok((basis, smallest))
}

pub(crate) fn rank_threshold(sigma_max: f64, tol: f64) -> f64 {
    (tol * sigma_max).max(RANK_FLOOR)
}

/// Flips the vector so its first coordinate of non-negligible size is
/// positive; leaves exact zero vectors alone.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let scale = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return;
    }
    let lead = v.iter().copied().find(|x| x.abs() > 1e-8 * scale);
    if matches!(lead, Some(x) if x < 0.0) {
        v.neg_mut();
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rank tolerance must lie in (0, 1), got {tol}"
        )));
    }
    Ok(())
}
