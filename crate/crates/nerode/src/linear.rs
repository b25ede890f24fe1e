//! Linear state-space systems driven from the infinite past.
//!
//! A system is a triple `(A, C, W)` acting as `x_t = A x_{t-1} + C z_t`
//! with readout `y_t = W x_t`. When the spectral radius of `A` is below
//! one the recursion has exactly one bounded solution for every bounded
//! left-infinite input (the echo state property), the induced functional
//! is `z -> W sum_j A^j C z_{-j}`, and its impulse response
//! `psi_j = W A^j C` is absolutely summable. Everything here works with
//! finite windows plus the zero-tail convention of [`crate::signal`], so
//! evaluations are exact sums and the only approximation is the cut-off
//! kernel tail, which is certified by [`LinearSystem::l1_tail_bound`].

use nalgebra::{DMatrix, DVector, RowDVector, SVD};
use serde::{Deserialize, Serialize};

use crate::signal::Signal;
use crate::{ensure_finite_slice, Error, Result, DEFAULT_MARGIN};

/// Iteration cap for the QR/SVD iterations; generous for desk-scale sizes.
const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LinearSystemRepr {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<f64>,
}

/// State-space system `x_t = A x_{t-1} + C z_t`, `y_t = W x_t` with an
/// `N`-dimensional state. `N = 0` is allowed and denotes the zero filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearSystemRepr", into = "LinearSystemRepr")]
pub struct LinearSystem {
    a: DMatrix<f64>,
    c: DVector<f64>,
    w: RowDVector<f64>,
}

/// Outcome of the spectral-radius test for the echo state property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EspStatus {
    Holds,
    Indeterminate,
    Fails,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EspReport {
    pub status: EspStatus,
    pub rho: f64,
    pub margin: f64,
}

impl EspReport {
    pub fn holds(&self) -> bool {
        self.status == EspStatus::Holds
    }
}

/// A functional value together with a certified bound on the dropped
/// kernel tail times the input magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub error_bound: f64,
}

/// Leading impulse-response coefficients `(psi_0, psi_{-1}, ...)` with a
/// certified bound on the l1 mass beyond them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseResponse {
    pub coefficients: Vec<f64>,
    pub tail_bound: f64,
}

impl LinearSystem {
    /// Builds a system, checking shapes and entry finiteness.
    pub fn new(a: DMatrix<f64>, c: DVector<f64>, w: RowDVector<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "state matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if c.len() != a.nrows() || w.len() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} but |C| = {} and |W| = {}",
                a.nrows(),
                c.len(),
                w.len()
            )));
        }
        ensure_finite_slice(a.as_slice())?;
        ensure_finite_slice(c.as_slice())?;
        ensure_finite_slice(w.as_slice())?;
        Ok(Self { a, c, w })
    }

    /// Convenience constructor from flat row-major data.
    pub fn from_rows(a_rows: &[Vec<f64>], c: &[f64], w: &[f64]) -> Result<Self> {
        let n = a_rows.len();
        for (i, row) in a_rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} of A has length {} in a {n}-state system",
                    row.len()
                )));
            }
        }
        let flat: Vec<f64> = a_rows.iter().flatten().copied().collect();
        Self::new(
            DMatrix::from_row_slice(n, n, &flat),
            DVector::from_column_slice(c),
            RowDVector::from_row_slice(w),
        )
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn w(&self) -> &RowDVector<f64> {
        &self.w
    }

    /// Largest eigenvalue modulus of the state matrix.
    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius_of(&self.a)
    }

    /// Decides the echo state property from the spectral radius.
    ///
    /// `rho < 1 - margin` certifies the property; `rho >= 1` refutes it
    /// outright (the boundary case already admits two bounded solutions);
    /// the band `[1 - margin, 1)` is reported indeterminate because a
    /// computed radius that close to the boundary cannot be trusted to
    /// sit on the stable side.
    pub fn esp_check(&self, margin: f64) -> Result<EspReport> {
        if !(margin > 0.0 && margin < 1.0) || !margin.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "margin must lie in (0, 1), got {margin}"
            )));
        }
        let rho = self.spectral_radius()?;
        let status = if rho < 1.0 - margin {
            EspStatus::Holds
        } else if rho >= 1.0 {
            EspStatus::Fails
        } else {
            EspStatus::Indeterminate
        };
        Ok(EspReport { status, rho, margin })
    }

    /// Errors out unless `esp_check` at the default margin certifies the
    /// property; evaluation and reduction routines call this first.
    pub fn require_esp(&self) -> Result<f64> {
        let report = self.esp_check(DEFAULT_MARGIN)?;
        match report.status {
            EspStatus::Holds => Ok(report.rho),
            EspStatus::Indeterminate => Err(Error::EspIndeterminate {
                rho: report.rho,
                margin: report.margin,
            }),
            EspStatus::Fails => Err(Error::EspFails(format!(
                "spectral radius {} >= 1",
                report.rho
            ))),
        }
    }

    /// Value of the induced functional on a window, as the exact sum
    /// `sum_{j < L} W A^j C z_{-j}`. The reported error bound covers
    /// replacing the zero tail by any bounded continuation of the same
    /// sup-norm: certified kernel tail times `sup |z|`.
    pub fn evaluate_functional(&self, z: &Signal) -> Result<Evaluation> {
        self.require_esp()?;
        let window = z.window();
        let len = window.len();
        let mut value = 0.0;
        let mut row = self.w.clone();
        for j in 0..len {
            if self.dim() == 0 {
                break;
            }
            value += row_dot(&row, &self.c) * window[len - 1 - j];
            if j + 1 < len {
                row = &row * &self.a;
            }
        }
        let error_bound = self.tail_from_power(len)? * z.sup_norm();
        Ok(Evaluation { value, error_bound })
    }

    /// The last `out_len` outputs of the filter on the window, via the
    /// state recursion from a zero initial state. Entry `k` (oldest
    /// first) equals `evaluate_functional` on the window delayed by
    /// `out_len - 1 - k` steps.
    pub fn evaluate_filter(&self, z: &Signal, out_len: usize) -> Result<Signal> {
        self.require_esp()?;
        if out_len > z.len() {
            return Err(Error::InvalidParameter(format!(
                "requested {out_len} outputs from a window of length {}",
                z.len()
            )));
        }
        let window = z.window();
        let mut state = DVector::<f64>::zeros(self.dim());
        let mut outputs = Vec::with_capacity(z.len());
        for &sample in window {
            state = &self.a * &state + &self.c * sample;
            outputs.push(row_dot(&self.w, &state));
        }
        Signal::new(outputs[window.len() - out_len..].to_vec())
    }

    /// Impulse-response coefficients `psi_j = W A^j C` for
    /// `j = 0..=horizon`, with a certified l1 bound on the rest.
    pub fn impulse_response(&self, horizon: usize) -> Result<ImpulseResponse> {
        self.require_esp()?;
        let mut coefficients = Vec::with_capacity(horizon + 1);
        if self.dim() == 0 {
            coefficients.resize(horizon + 1, 0.0);
        } else {
            let mut row = self.w.clone();
            for j in 0..=horizon {
                coefficients.push(row_dot(&row, &self.c));
                if j < horizon {
                    row = &row * &self.a;
                }
            }
        }
        let tail_bound = self.tail_from_power(horizon + 1)?;
        Ok(ImpulseResponse { coefficients, tail_bound })
    }

    /// Certified upper bound on `sum_{j > horizon} |psi_j|`.
    ///
    /// The bound factors the tail as `(W A^{horizon+1}) A^i C`, groups the
    /// remaining powers into blocks of the first contracting power `k0`
    /// (the smallest `k` with `||A^k|| < 1`), and sums the resulting
    /// geometric envelope. For a nilpotent `A` the leading factor
    /// vanishes once the horizon passes the nilpotency index, so the
    /// bound is exactly zero there.
    pub fn l1_tail_bound(&self, horizon: usize) -> Result<f64> {
        self.require_esp()?;
        self.tail_from_power(horizon + 1)
    }

    /// Bound on `sum_{j >= start} |psi_j|`; `start = 0` bounds the whole
    /// l1 norm of the kernel.
    fn tail_from_power(&self, start: usize) -> Result<f64> {
        let n = self.dim();
        if n == 0 {
            return Ok(0.0);
        }
        let c_norm = self.c.norm();
        if c_norm == 0.0 {
            return Ok(0.0);
        }
        let mut row = self.w.clone();
        for _ in 0..start {
            if row.iter().all(|&x| x == 0.0) {
                break;
            }
            row = &row * &self.a;
        }
        let row_norm = row.norm();
        if row_norm == 0.0 {
            return Ok(0.0);
        }

        let rho = self.spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::EspFails(format!("spectral radius {rho} >= 1")));
        }
        let k_max = 10 * n * (1.0 / (1.0 - rho)).ceil() as usize;
        let mut block_sum = 1.0;
        let mut power = self.a.clone();
        let mut contraction = None;
        for _k in 1..=k_max {
            let norm_k = operator_norm(&power)?;
            if norm_k < 1.0 {
                contraction = Some(norm_k);
                break;
            }
            block_sum += norm_k;
            power = &power * &self.a;
        }
        let q = contraction.ok_or(Error::NoContractingPower { k_max })?;
        Ok(row_norm * c_norm * block_sum / (1.0 - q))
    }
}

impl ImpulseResponse {
    /// Certified upper bound on the full l1 norm of the kernel.
    pub fn l1_norm_bound(&self) -> f64 {
        self.coefficients.iter().map(|c| c.abs()).sum::<f64>() + self.tail_bound
    }

    /// Sum of `|psi_j|` over the first `t` retained coefficients.
    fn partial_l1(&self, t: usize) -> f64 {
        self.coefficients
            .iter()
            .take(t)
            .map(|c| c.abs())
            .sum::<f64>()
    }

    /// Bound on how much the functional can still distinguish two inputs
    /// that agree on their last `t` samples: `(certified l1 norm - sum of
    /// the first t |psi_j|) * input_gap`. Non-increasing in `t`; for `t`
    /// past the retained coefficients only the tail bound remains.
    pub fn ifp_gap_bound(&self, t: usize, input_gap: f64) -> Result<f64> {
        if !(input_gap >= 0.0) || !input_gap.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "input gap must be finite and >= 0, got {input_gap}"
            )));
        }
        let remaining = (self.l1_norm_bound() - self.partial_l1(t)).max(0.0);
        Ok(remaining * input_gap)
    }

    /// Convolution of the retained kernel against a window, with the
    /// dropped tail certified against the window's sup-norm.
    pub fn convolve(&self, z: &Signal) -> Evaluation {
        let window = z.window();
        let len = window.len();
        let value = self
            .coefficients
            .iter()
            .take(len)
            .enumerate()
            .map(|(j, psi)| psi * window[len - 1 - j])
            .sum();
        Evaluation {
            value,
            error_bound: self.tail_bound * z.sup_norm(),
        }
    }
}

impl TryFrom<LinearSystemRepr> for LinearSystem {
    type Error = Error;

    fn try_from(repr: LinearSystemRepr) -> Result<Self> {
        LinearSystem::from_rows(&repr.a, &repr.c, &repr.w)
    }
}

impl From<LinearSystem> for LinearSystemRepr {
    fn from(sys: LinearSystem) -> LinearSystemRepr {
        LinearSystemRepr {
            a: matrix_rows(&sys.a),
            c: sys.c.as_slice().to_vec(),
            w: sys.w.as_slice().to_vec(),
        }
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub(crate) fn row_dot(row: &RowDVector<f64>, col: &DVector<f64>) -> f64 {
    row.iter().zip(col.iter()).map(|(a, b)| a * b).sum()
}

/// Largest singular value; zero for an empty matrix.
pub(crate) fn operator_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenConvergence)?;
    Ok(svd.singular_values[0])
}

pub(crate) fn complex_eigenvalues_of(
    m: &DMatrix<f64>,
) -> Result<Vec<nalgebra::Complex<f64>>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if let Some(schur) = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    // QR iteration can stall when the whole diagonal sits near zero,
    // since its relative deflation test then compares against nothing.
    // Shifting the diagonal restores an absolute scale and moves every
    // eigenvalue by exactly the shift.
    let shift = 1.0 + m.norm();
    let shifted = m.clone() + DMatrix::identity(m.nrows(), m.ncols()) * shift;
    let schur = nalgebra::Schur::try_new(shifted, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenConvergence)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|ev| ev - nalgebra::Complex::new(shift, 0.0))
        .collect())
}

pub(crate) fn spectral_radius_of(a: &DMatrix<f64>) -> Result<f64> {
    Ok(complex_eigenvalues_of(a)?
        .iter()
        .fold(0.0, |acc: f64, ev| acc.max(ev.norm())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, c: f64, w: f64) -> LinearSystem {
        LinearSystem::from_rows(&[vec![a]], &[c], &[w]).unwrap()
    }

    #[test]
    fn scalar_system_holds_esp() {
        let report = scalar(0.5, 1.0, 1.0).esp_check(1e-8).unwrap();
        assert_eq!(report.status, EspStatus::Holds);
        assert!((report.rho - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_fails_esp() {
        let sys =
            LinearSystem::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 0.0], &[1.0, 0.0])
                .unwrap();
        let report = sys.esp_check(1e-8).unwrap();
        assert_eq!(report.status, EspStatus::Fails);
        assert!((report.rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_boundary_from_below_is_indeterminate() {
        let report = scalar(1.0 - 1e-9, 1.0, 1.0).esp_check(1e-8).unwrap();
        assert_eq!(report.status, EspStatus::Indeterminate);
    }

    #[test]
    fn margin_is_validated() {
        assert!(scalar(0.5, 1.0, 1.0).esp_check(0.0).is_err());
        assert!(scalar(0.5, 1.0, 1.0).esp_check(1.0).is_err());
    }

    #[test]
    fn functional_on_shifted_impulse() {
        let sys = scalar(0.5, 1.0, 1.0);
        let z = Signal::impulse(-3, 2.0).unwrap();
        let eval = sys.evaluate_functional(&z).unwrap();
        assert!((eval.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn functional_on_zero_window() {
        let sys = scalar(0.5, 1.0, 1.0);
        let eval = sys.evaluate_functional(&Signal::zero()).unwrap();
        assert_eq!(eval.value, 0.0);
        assert_eq!(eval.error_bound, 0.0);
    }

    #[test]
    fn functional_refuses_unstable_systems() {
        let sys = scalar(1.5, 1.0, 1.0);
        assert!(matches!(
            sys.evaluate_functional(&Signal::zero()),
            Err(Error::EspFails(_))
        ));
    }

    #[test]
    fn zero_dimensional_system_is_the_zero_filter() {
        let sys = LinearSystem::from_rows(&[], &[], &[]).unwrap();
        assert!(sys.esp_check(1e-8).unwrap().holds());
        let z = Signal::new(vec![3.0, -1.0]).unwrap();
        let eval = sys.evaluate_functional(&z).unwrap();
        assert_eq!(eval.value, 0.0);
        assert_eq!(eval.error_bound, 0.0);
        let psi = sys.impulse_response(4).unwrap();
        assert_eq!(psi.coefficients, vec![0.0; 5]);
        assert_eq!(psi.tail_bound, 0.0);
    }

    #[test]
    fn filter_entries_match_per_time_functional() {
        let sys = LinearSystem::from_rows(
            &[vec![0.0, -0.9], vec![0.9, 0.0]],
            &[1.0, 0.5],
            &[1.0, -1.0],
        )
        .unwrap();
        let z = Signal::new(vec![0.3, -1.0, 0.7, 0.4, -0.2]).unwrap();
        let out = sys.evaluate_filter(&z, 3).unwrap();
        for k in 0..3 {
            let delayed = z.delay(2 - k as i64);
            let expected = sys.evaluate_functional(&delayed).unwrap().value;
            assert!((out.window()[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_length_is_validated() {
        let sys = scalar(0.5, 1.0, 1.0);
        let z = Signal::new(vec![1.0, 2.0]).unwrap();
        assert!(sys.evaluate_filter(&z, 3).is_err());
        assert!(sys.evaluate_filter(&z, 0).unwrap().is_empty());
    }

    #[test]
    fn impulse_response_of_scalar_system() {
        let sys = scalar(0.5, 1.0, 1.0);
        let psi = sys.impulse_response(3).unwrap();
        assert_eq!(psi.coefficients, vec![1.0, 0.5, 0.25, 0.125]);
        assert!(psi.tail_bound > 0.0);
    }

    #[test]
    fn scalar_tail_bound_is_tight_to_a_factor_of_four() {
        let sys = scalar(0.5, 1.0, 1.0);
        let tail = sys.l1_tail_bound(10).unwrap();
        let exact = 0.5_f64.powi(11) / (1.0 - 0.5);
        assert!(tail >= exact - 1e-15, "bound {tail} below true tail {exact}");
        assert!(tail <= 4.0 * exact, "bound {tail} looser than 4x {exact}");
    }

    #[test]
    fn nilpotent_tail_bound_is_exactly_zero() {
        // 3-state shift register: psi = (3, -1, 2, 0, 0, ...)
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
        let psi = sys.impulse_response(4).unwrap();
        assert_eq!(psi.coefficients, vec![3.0, -1.0, 2.0, 0.0, 0.0]);
        assert_eq!(psi.tail_bound, 0.0);
        assert_eq!(sys.l1_tail_bound(2).unwrap(), 0.0);
        assert!(sys.l1_tail_bound(1).unwrap() >= 2.0);
    }

    #[test]
    fn convolve_matches_truncated_sum() {
        let psi = ImpulseResponse {
            coefficients: vec![1.0, 0.5, 0.25],
            tail_bound: 0.125,
        };
        let z = Signal::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let eval = psi.convolve(&z);
        assert!((eval.value - 1.75).abs() < 1e-15);
        assert!((eval.error_bound - 0.125).abs() < 1e-15);
        // window shorter than the kernel: the zero tail is exact
        let short = Signal::new(vec![2.0]).unwrap();
        assert!((psi.convolve(&short).value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ifp_gap_bound_shrinks_to_the_tail() {
        let psi = ImpulseResponse {
            coefficients: vec![1.0, 0.5, 0.25],
            tail_bound: 0.25,
        };
        let gap = 2.0;
        let full = psi.l1_norm_bound() * gap;
        assert_eq!(psi.ifp_gap_bound(0, gap).unwrap(), full);
        let mut previous = full;
        for t in 1..=5 {
            let bound = psi.ifp_gap_bound(t, gap).unwrap();
            assert!(bound <= previous + 1e-15);
            previous = bound;
        }
        assert!((psi.ifp_gap_bound(7, gap).unwrap() - 0.5).abs() < 1e-15);
        assert!(psi.ifp_gap_bound(1, -1.0).is_err());
    }

    #[test]
    fn serde_uses_matrix_field_names() {
        let sys = LinearSystem::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.3]], &[1.0, 0.0], &[1.0, 1.0])
            .unwrap();
        let text = serde_json::to_string(&sys).unwrap();
        assert_eq!(
            text,
            r#"{"A":[[0.5,0.0],[0.0,0.3]],"C":[1.0,0.0],"W":[1.0,1.0]}"#
        );
        let back: LinearSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn serde_rejects_ragged_or_mismatched_shapes() {
        assert!(serde_json::from_str::<LinearSystem>(
            r#"{"A":[[0.5,0.0]],"C":[1.0],"W":[1.0]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<LinearSystem>(
            r#"{"A":[[0.5]],"C":[1.0,2.0],"W":[1.0]}"#
        )
        .is_err());
    }
}
