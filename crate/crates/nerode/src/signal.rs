//! Finite windows of left-infinite input sequences.
//!
//! A [`Signal`] stores the last `L` samples `(z_{-L+1}, ..., z_0)` of a
//! real sequence indexed by times `t <= 0`; everything before the window
//! is an implicit zero tail. Under that convention every window denotes a
//! genuine left-infinite sequence with bounded support, so functional
//! evaluations on windows are exact rather than approximate.

use serde::{Deserialize, Serialize};

use crate::{ensure_finite_slice, Error, Result};

/// Window of a left-infinite sequence; the last entry is the value at
/// time 0, the first entry the oldest retained sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Signal {
    window: Vec<f64>,
}

impl Signal {
    /// Wraps a window given oldest-first. Rejects non-finite entries.
    pub fn new(window: Vec<f64>) -> Result<Self> {
        ensure_finite_slice(&window)?;
        Ok(Self { window })
    }

    /// The identically zero sequence (empty window).
    pub fn zero() -> Self {
        Self { window: Vec::new() }
    }

    /// A single spike of the given height at time `t <= 0`, zeros at the
    /// other retained times.
    pub fn impulse(t: i64, height: f64) -> Result<Self> {
        if t > 0 {
            return Err(Error::InvalidParameter(format!(
                "impulse time must be <= 0, got {t}"
            )));
        }
        if !height.is_finite() {
            return Err(Error::NonFinite { index: 0, value: height });
        }
        let mut window = vec![0.0; t.unsigned_abs() as usize + 1];
        window[0] = height;
        Ok(Self { window })
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Sample at time `t <= 0`; zero once `t` falls off the window.
    pub fn value_at(&self, t: i64) -> f64 {
        debug_assert!(t <= 0, "signals are only defined for times <= 0");
        let back = t.unsigned_abs() as usize;
        if back < self.window.len() {
            self.window[self.window.len() - 1 - back]
        } else {
            0.0
        }
    }

    /// `sup_t |z_t|`; zero for the empty window.
    pub fn sup_norm(&self) -> f64 {
        self.window.iter().fold(0.0, |acc, z| acc.max(z.abs()))
    }

    /// `sup_t |z_t| w_{-t}`. The zero tail contributes nothing, so the
    /// supremum runs over the window only.
    pub fn weighted_norm(&self, weights: &WeightingSequence) -> f64 {
        self.window
            .iter()
            .rev()
            .enumerate()
            .fold(0.0, |acc, (k, z)| acc.max(z.abs() * weights.weight(k)))
    }

    /// Shifts the sequence back in time by `tau >= 0` steps, dropping the
    /// `tau` most recent samples. Negative `tau` appends `|tau|` zeros at
    /// the recent end instead.
    pub fn delay(&self, tau: i64) -> Signal {
        if tau >= 0 {
            let keep = self.window.len().saturating_sub(tau as usize);
            Signal { window: self.window[..keep].to_vec() }
        } else {
            let mut window = self.window.clone();
            window.extend(std::iter::repeat(0.0).take(tau.unsigned_abs() as usize));
            Signal { window }
        }
    }

    /// Appends a finite block at the recent end; the block's last entry
    /// becomes the new time-0 sample.
    pub fn concat(&self, tail: &[f64]) -> Result<Signal> {
        ensure_finite_slice(tail)?;
        let mut window = self.window.clone();
        window.extend_from_slice(tail);
        Ok(Signal { window })
    }

    /// `sup_t |u_t - v_t|` with both zero tails in force.
    pub fn sup_distance(&self, other: &Signal) -> f64 {
        let n = self.window.len().max(other.window.len());
        let mut gap: f64 = 0.0;
        for back in 0..n as i64 {
            gap = gap.max((self.value_at(-back) - other.value_at(-back)).abs());
        }
        gap
    }

    /// Equality as left-infinite sequences: windows may differ in length
    /// as long as the extra entries are exactly zero.
    pub fn seq_eq(&self, other: &Signal) -> bool {
        self.sup_distance(other) == 0.0
    }
}

impl TryFrom<Vec<f64>> for Signal {
    type Error = Error;

    fn try_from(window: Vec<f64>) -> Result<Self> {
        Signal::new(window)
    }
}

impl From<Signal> for Vec<f64> {
    fn from(signal: Signal) -> Vec<f64> {
        signal.window
    }
}

/// Strictly decreasing weights `w_0 = 1 > w_1 > ... -> 0` attached to how
/// far in the past a sample sits. Weighted norms built from these make
/// "inputs that agree recently are close" quantitative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightingSequence {
    Geometric { lambda: f64 },
}

impl WeightingSequence {
    /// `w_k = lambda^k` with `0 < lambda < 1`.
    pub fn geometric(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "geometric weight ratio must lie in (0, 1), got {lambda}"
            )));
        }
        Ok(Self::Geometric { lambda })
    }

    /// Weight for a sample `k` steps in the past.
    pub fn weight(&self, k: usize) -> f64 {
        match self {
            Self::Geometric { lambda } => lambda.powi(k as i32),
        }
    }
}
