//! Random instances for sweeps and stress tests.
//!
//! Every sampler draws from the caller's generator, so a seeded
//! generator reproduces the exact instance stream.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::finite::{esp_check, FiniteSystem};
use crate::linear::LinearSystem;
use crate::morphism::LinearMap;
use crate::signal::Signal;

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// An orthogonal matrix distributed by the invariant measure, obtained
/// by orthonormalizing a Gaussian matrix and fixing the factor signs.
pub fn haar_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A system whose state map is `radius` times an orthogonal matrix, so
/// every eigenvalue has modulus exactly `radius`, with Gaussian input
/// and readout vectors. Radii below one give uniformly well-behaved
/// echoing systems; radii of one or more give certified failures.
pub fn rotation_system(n: usize, radius: f64, rng: &mut impl Rng) -> LinearSystem {
    let a = haar_orthogonal(n, rng) * radius;
    let c = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    let w = RowDVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    LinearSystem::new(a, c, w).expect("sampled entries are finite")
}

/// A system with a Gaussian state map rescaled to the given spectral
/// radius. Less uniform than [`rotation_system`] (eigenvalues spread
/// below the radius and the map can be far from normal), which makes it
/// the rougher test diet.
pub fn gaussian_system(n: usize, radius: f64, rng: &mut impl Rng) -> LinearSystem {
    let a = loop {
        let g = gaussian_matrix(n, n, rng);
        let rho = crate::linear::spectral_radius_of(&g).expect("finite Gaussian matrix");
        if n == 0 {
            break g;
        }
        if rho > 1e-9 {
            break g * (radius / rho);
        }
    };
    let c = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    let w = RowDVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    LinearSystem::new(a, c, w).expect("sampled entries are finite")
}

/// An invertible map with condition number at most `max_condition`,
/// built from two orthogonal factors and log-uniform singular values.
pub fn well_conditioned_map(n: usize, max_condition: f64, rng: &mut impl Rng) -> LinearMap {
    assert!(max_condition >= 1.0, "condition numbers are at least one");
    let half_span = 0.5 * max_condition.ln();
    let mut singular = DMatrix::zeros(n, n);
    for i in 0..n {
        singular[(i, i)] = rng.random_range(-half_span..=half_span).exp();
    }
    let m = haar_orthogonal(n, rng) * singular * haar_orthogonal(n, rng);
    LinearMap::new(m).expect("sampled entries are finite")
}

/// A signal with entries uniform in `[-amplitude, amplitude]`.
pub fn random_signal(len: usize, amplitude: f64, rng: &mut impl Rng) -> Signal {
    let window = (0..len)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    Signal::new(window).expect("sampled entries are finite")
}

fn random_outputs(n_states: usize, n_outputs: usize, rng: &mut impl Rng) -> Vec<i64> {
    (0..n_states)
        .map(|_| rng.random_range(0..n_outputs) as i64)
        .collect()
}

/// A finite system with uniformly random transitions and outputs drawn
/// from `{0, .., n_outputs - 1}`. Beyond a handful of states these
/// almost never have the echo property, so they exercise the failure
/// paths.
pub fn random_finite_system(
    n_states: usize,
    arity: usize,
    n_outputs: usize,
    rng: &mut impl Rng,
) -> FiniteSystem {
    let transition = (0..n_states)
        .map(|_| (0..arity).map(|_| rng.random_range(0..n_states)).collect())
        .collect();
    FiniteSystem::new(transition, random_outputs(n_states, n_outputs, rng))
        .expect("sampled tables are well formed")
}

fn narrow_image_system(
    n_states: usize,
    arity: usize,
    n_outputs: usize,
    rng: &mut impl Rng,
) -> FiniteSystem {
    // each symbol maps the whole state set onto at most two targets
    let mut transition = vec![vec![0usize; arity]; n_states];
    for z in 0..arity {
        let lo = rng.random_range(0..n_states);
        let hi = rng.random_range(0..n_states);
        for row in transition.iter_mut() {
            row[z] = if rng.random_bool(0.5) { lo } else { hi };
        }
    }
    FiniteSystem::new(transition, random_outputs(n_states, n_outputs, rng))
        .expect("sampled tables are well formed")
}

fn descending_system(
    n_states: usize,
    arity: usize,
    n_outputs: usize,
    rng: &mut impl Rng,
) -> FiniteSystem {
    // every transition strictly decreases a nonzero state, so any two
    // trajectories collapse onto state 0 within n steps
    let transition = (0..n_states)
        .map(|x| {
            (0..arity)
                .map(|_| if x == 0 { 0 } else { rng.random_range(0..x) })
                .collect()
        })
        .collect();
    FiniteSystem::new(transition, random_outputs(n_states, n_outputs, rng))
        .expect("sampled tables are well formed")
}

/// A finite system that provably has the echo property, drawn from a
/// mixture of contracting families. Uniform tables are useless here
/// (the property is vanishingly rare among them), so the sampler mixes
/// symbols with two-point images and strictly descending maps, keeping
/// enough variety for the partition and quotient paths.
pub fn random_echoing_system(
    n_states: usize,
    arity: usize,
    n_outputs: usize,
    rng: &mut impl Rng,
) -> FiniteSystem {
    for _ in 0..64 {
        let candidate = if rng.random_bool(0.5) {
            narrow_image_system(n_states, arity, n_outputs, rng)
        } else {
            descending_system(n_states, arity, n_outputs, rng)
        };
        if esp_check(&candidate).esp {
            return candidate;
        }
    }
    descending_system(n_states, arity, n_outputs, rng)
}
