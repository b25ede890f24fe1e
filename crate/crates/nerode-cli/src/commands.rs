//! One handler per subcommand. Each returns the finished report in
//! both renderings together with the exit code it should carry.

use std::fmt::Write as _;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use nerode::finite::{esp_check, ifp_empirical, nerode_partition, reachable_states, reduce as reduce_finite, witness_word};
use nerode::morphism::{check_morphism, find_isomorphism, LinearMap, MorphismReport};
use nerode::realization::{approximate_realization, hankel_rank, minimal_realization};
use nerode::reduction::{reduce, verify_reduction, ReducedRealization, ReductionReport};
use nerode::subspace::is_canonical;
use nerode::{EspReport, EspStatus, FiniteMemoryFilter, ImpulseResponse, LinearSystem};

use crate::checks::{quotient_is_exact, sustained_pair, word_synchronizes};
use crate::input::{load_finite, load_kernel, load_state_space, load_system, KernelFile, SystemFile};
use crate::output::{CliError, Emitted, EXIT_INDETERMINATE, EXIT_INFEASIBLE, EXIT_OK, EXIT_SEMANTIC};

const SCHEMA: u32 = 1;

fn esp_exit(status: EspStatus) -> u8 {
    match status {
        EspStatus::Holds => EXIT_OK,
        EspStatus::Indeterminate => EXIT_INDETERMINATE,
        EspStatus::Fails => EXIT_SEMANTIC,
    }
}

/// Gate for commands that only make sense on echoing systems.
fn require_holds(sys: &LinearSystem, margin: f64, side: &str) -> Result<EspReport, CliError> {
    let report = sys.esp_check(margin)?;
    match report.status {
        EspStatus::Holds => Ok(report),
        status => Err(CliError {
            code: esp_exit(status),
            message: format!(
                "{side}echo property {}: rho = {}",
                if status == EspStatus::Fails { "fails" } else { "is indeterminate" },
                report.rho
            ),
        }),
    }
}

#[derive(Serialize)]
struct CheckEspStateSpace {
    schema: u32,
    command: &'static str,
    kind: &'static str,
    #[serde(flatten)]
    report: EspReport,
}

#[derive(Serialize)]
struct CheckEspFinite {
    schema: u32,
    command: &'static str,
    kind: &'static str,
    esp: bool,
    merge_steps: Option<usize>,
    sustained_pair: Option<(usize, usize)>,
}

pub fn check_esp(file: &Path, margin: f64) -> Result<Emitted, CliError> {
    match load_system(file)? {
        SystemFile::StateSpace(sys) => {
            let report = sys.esp_check(margin)?;
            let text = match report.status {
                EspStatus::Holds => {
                    format!("echo property holds: rho = {} (margin {:e})\n", report.rho, report.margin)
                }
                EspStatus::Indeterminate => format!(
                    "echo property indeterminate: rho = {} lies within {:e} of 1\n",
                    report.rho, report.margin
                ),
                EspStatus::Fails => format!("echo property fails: rho = {}\n", report.rho),
            };
            let payload = CheckEspStateSpace {
                schema: SCHEMA,
                command: "check-esp",
                kind: "state_space",
                report,
            };
            Emitted::new(&payload, text, esp_exit(report.status))
        }
        SystemFile::Finite(sys) => {
            let report = esp_check(&sys);
            let witness = if report.esp { None } else { sustained_pair(&sys) };
            let text = match (report.esp, report.merge_steps, witness) {
                (true, Some(k), _) => {
                    format!("echo property holds: trajectories merge within {k} steps\n")
                }
                (_, _, Some((x, y))) => {
                    format!("echo property fails: states {x} and {y} can stay distinct forever\n")
                }
                _ => "echo property fails\n".to_string(),
            };
            let payload = CheckEspFinite {
                schema: SCHEMA,
                command: "check-esp",
                kind: "finite",
                esp: report.esp,
                merge_steps: report.merge_steps,
                sustained_pair: witness,
            };
            let code = if report.esp { EXIT_OK } else { EXIT_SEMANTIC };
            Emitted::new(&payload, text, code)
        }
    }
}

#[derive(Serialize)]
struct ReduceStateSpace {
    schema: u32,
    command: &'static str,
    kind: &'static str,
    original_dim: usize,
    reduced_dim: usize,
    #[serde(flatten)]
    realization: ReducedRealization,
    verification: ReductionReport,
}

#[derive(Serialize)]
struct ReduceFinite {
    schema: u32,
    command: &'static str,
    kind: &'static str,
    original_states: usize,
    reduced_states: usize,
    classes: Vec<Vec<usize>>,
    #[serde(flatten)]
    quotient: nerode::finite::FiniteSystem,
    homomorphism_exact: bool,
    minimal: bool,
}

pub fn reduce_cmd(file: &Path, tol: f64, margin: f64, horizon: usize) -> Result<Emitted, CliError> {
    match load_system(file)? {
        SystemFile::StateSpace(sys) => {
            require_holds(&sys, margin, "")?;
            let realization = reduce(&sys, tol)?;
            let verification = verify_reduction(&sys, &realization, horizon, tol)?;
            let mut text = format!(
                "reduced {} states to {}\n",
                sys.dim(),
                realization.dim()
            );
            let _ = writeln!(
                text,
                "impulse gap over horizon {horizon}: {:e}",
                verification.impulse_gap
            );
            let _ = writeln!(
                text,
                "residuals: projector {:e}, equivariance {:e}, readout {:e}, annihilation {:e}, spectrum {:e}",
                verification.pi_sigma_residual,
                verification.equivariance_residual,
                verification.readout_residual,
                verification.annihilation_residual,
                verification.spectrum_residual,
            );
            let _ = writeln!(
                text,
                "verification: {}",
                if verification.passes { "PASS" } else { "FAIL" }
            );
            let code = if verification.passes { EXIT_OK } else { EXIT_SEMANTIC };
            let payload = ReduceStateSpace {
                schema: SCHEMA,
                command: "reduce",
                kind: "state_space",
                original_dim: sys.dim(),
                reduced_dim: realization.dim(),
                realization,
                verification,
            };
            Emitted::new(&payload, text, code)
        }
        SystemFile::Finite(sys) => {
            let report = esp_check(&sys);
            if !report.esp {
                return Err(CliError {
                    code: EXIT_SEMANTIC,
                    message: "echo property fails; nothing to reduce".to_string(),
                });
            }
            let (quotient, partition) = reduce_finite(&sys)?;
            let homomorphism_exact = quotient_is_exact(&sys, &quotient, &partition);
            let minimal = nerode_partition(&quotient)?.n_classes() == quotient.n_states();
            let text = format!(
                "reduced {} states to {}\nclasses: {:?}\nquotient is {}\n",
                sys.n_states(),
                quotient.n_states(),
                partition.classes(),
                match (homomorphism_exact, minimal) {
                    (true, true) => "exact and minimal",
                    (true, false) => "exact but not minimal",
                    (false, _) => "NOT a homomorphic image",
                }
            );
            let code = if homomorphism_exact && minimal { EXIT_OK } else { EXIT_SEMANTIC };
            let payload = ReduceFinite {
                schema: SCHEMA,
                command: "reduce",
                kind: "finite",
                original_states: sys.n_states(),
                reduced_states: quotient.n_states(),
                classes: partition.classes(),
                quotient,
                homomorphism_exact,
                minimal,
            };
            Emitted::new(&payload, text, code)
        }
    }
}

#[derive(Serialize)]
struct Realize {
    schema: u32,
    command: &'static str,
    dimension: usize,
    hankel_rank_oracle: usize,
    kept: usize,
    truncation_error: f64,
    #[serde(flatten)]
    realization: ReducedRealization,
}

pub fn realize(file: &Path, tol: f64, eps: Option<f64>) -> Result<Emitted, CliError> {
    let response = match load_kernel(file)? {
        KernelFile::Window(filter) => ImpulseResponse {
            coefficients: filter.psi().iter().rev().copied().collect(),
            tail_bound: 0.0,
        },
        KernelFile::Measured(response) => response,
    };
    let total = response.coefficients.len();

    let (realization, kept, truncation_error) = match eps {
        Some(eps) => {
            let fitted = approximate_realization(&response, eps)?;
            (fitted.realization, fitted.kept, fitted.truncation_error)
        }
        None if response.tail_bound == 0.0 => {
            let window: Vec<f64> = response.coefficients.iter().rev().copied().collect();
            let filter = FiniteMemoryFilter::new(window)?;
            (minimal_realization(&filter, tol)?, total, 0.0)
        }
        None => {
            return Err(CliError {
                code: EXIT_INFEASIBLE,
                message: format!(
                    "measured response carries a certified tail of {:e}; \
                     pass --eps larger than that",
                    response.tail_bound
                ),
            });
        }
    };

    let kept_window: Vec<f64> = response.coefficients[..kept].iter().rev().copied().collect();
    let oracle = hankel_rank(&FiniteMemoryFilter::new(kept_window)?, tol)?;
    let exact = eps.is_none();
    let code = if exact && realization.dim() != oracle { EXIT_SEMANTIC } else { EXIT_OK };
    let mut text = format!(
        "realized dimension {} (Hankel rank oracle: {oracle})\n",
        realization.dim()
    );
    let _ = writeln!(
        text,
        "kept {kept} of {total} coefficients, truncation error {truncation_error:e}"
    );
    let payload = Realize {
        schema: SCHEMA,
        command: "realize",
        dimension: realization.dim(),
        hankel_rank_oracle: oracle,
        kept,
        truncation_error,
        realization,
    };
    Emitted::new(&payload, text, code)
}

#[derive(Serialize)]
struct Compare {
    schema: u32,
    command: &'static str,
    horizon: usize,
    max_impulse_gap: f64,
    tail_bound_left: f64,
    tail_bound_right: f64,
    canonical_left: bool,
    canonical_right: bool,
    equivalent: bool,
    isomorphism: Option<LinearMap>,
    morphism_residuals: Option<MorphismReport>,
}

pub fn compare(
    file_a: &Path,
    file_b: &Path,
    tol: f64,
    margin: f64,
    horizon: usize,
) -> Result<Emitted, CliError> {
    let left = load_state_space(file_a)?;
    let right = load_state_space(file_b)?;
    require_holds(&left, margin, "left system: ")?;
    require_holds(&right, margin, "right system: ")?;

    let psi_left = left.impulse_response(horizon)?;
    let psi_right = right.impulse_response(horizon)?;
    let max_impulse_gap = psi_left
        .coefficients
        .iter()
        .zip(&psi_right.coefficients)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    let canonical_left = is_canonical(&left, tol)?.canonical;
    let canonical_right = is_canonical(&right, tol)?.canonical;
    let equivalent = max_impulse_gap < tol;

    let mut isomorphism = None;
    let mut morphism_residuals = None;
    if equivalent && canonical_left && canonical_right {
        match find_isomorphism(&left, &right, tol) {
            Ok(map) => {
                morphism_residuals = Some(check_morphism(&map, &left, &right, 10.0 * tol)?);
                isomorphism = Some(map);
            }
            Err(nerode::Error::NoIsomorphism(_)) => {}
            Err(err) => return Err(err.into()),
        }
    }

    let mut text = format!(
        "max impulse gap over horizon {horizon}: {max_impulse_gap:e} \
         (certified tails {:e} / {:e})\n",
        psi_left.tail_bound, psi_right.tail_bound
    );
    let _ = writeln!(
        text,
        "canonical: left {}, right {}",
        if canonical_left { "yes" } else { "no" },
        if canonical_right { "yes" } else { "no" }
    );
    if equivalent {
        let _ = writeln!(text, "systems are equivalent at tolerance {tol:e}");
    } else {
        let _ = writeln!(text, "systems differ at tolerance {tol:e}");
    }
    if let Some(report) = &morphism_residuals {
        let _ = writeln!(
            text,
            "isomorphism recovered: equivariance {:e}, input {:e}, readout {:e}",
            report.equivariance_residual, report.input_residual, report.readout_residual
        );
    }
    let code = if equivalent { EXIT_OK } else { EXIT_SEMANTIC };
    let payload = Compare {
        schema: SCHEMA,
        command: "compare",
        horizon,
        max_impulse_gap,
        tail_bound_left: psi_left.tail_bound,
        tail_bound_right: psi_right.tail_bound,
        canonical_left,
        canonical_right,
        equivalent,
        isomorphism,
        morphism_residuals,
    };
    Emitted::new(&payload, text, code)
}

#[derive(Serialize)]
struct OracleChecks {
    pair_simulation: bool,
    synchronizing_words: bool,
    quotient_homomorphism: bool,
    quotient_minimal: bool,
    witness_words: bool,
    forgetting_within_bound: bool,
}

#[derive(Serialize)]
struct OracleSuite {
    reachable_states: usize,
    nerode_classes: usize,
    quotient_states: usize,
    merge_steps: usize,
    empirical_forget_steps: usize,
    trials: usize,
    seed: u64,
    checks: OracleChecks,
}

#[derive(Serialize)]
struct Oracle {
    schema: u32,
    command: &'static str,
    n_states: usize,
    arity: usize,
    esp: bool,
    sustained_pair: Option<(usize, usize)>,
    suite: Option<OracleSuite>,
}

pub fn oracle(file: &Path, trials: usize, seed: u64) -> Result<Emitted, CliError> {
    let sys = load_finite(file)?;
    let report = esp_check(&sys);
    let witness = sustained_pair(&sys);
    let pair_simulation = report.esp == witness.is_none();

    if !report.esp {
        let text = match witness {
            Some((x, y)) => format!(
                "echo property fails: states {x} and {y} can stay distinct forever\n"
            ),
            None => "echo property fails\n".to_string(),
        };
        let payload = Oracle {
            schema: SCHEMA,
            command: "oracle",
            n_states: sys.n_states(),
            arity: sys.arity(),
            esp: false,
            sustained_pair: witness,
            suite: None,
        };
        return Emitted::new(&payload, text, EXIT_SEMANTIC);
    }

    let merge_steps = report
        .merge_steps
        .expect("echoing systems carry a merge bound");
    let n = sys.n_states();
    let reachable = reachable_states(&sys)?;
    let partition = nerode_partition(&sys)?;
    let (quotient, quotient_partition) = reduce_finite(&sys)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_word = |len: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        (0..len).map(|_| rng.random_range(0..sys.arity())).collect()
    };

    let synchronizing_words = (0..trials).all(|_| {
        let word = random_word(merge_steps, &mut rng);
        word_synchronizes(&sys, &word)
    });

    let quotient_homomorphism = quotient_is_exact(&sys, &quotient, &quotient_partition);
    let quotient_minimal = nerode_partition(&quotient)?.n_classes() == quotient.n_states();

    let mut witness_words = true;
    for target in 0..n {
        let word = witness_word(&sys, target)?;
        match word {
            Some(word) => {
                let reaches = (0..n).all(|x| sys.run(x, &word) == target);
                if !reaches || !reachable.contains(&target) {
                    witness_words = false;
                }
            }
            None => {
                if reachable.contains(&target) {
                    witness_words = false;
                }
            }
        }
    }

    let mut empirical_forget_steps = 0usize;
    let mut forgetting_within_bound = true;
    for _ in 0..trials {
        let past_u = random_word(n * n, &mut rng);
        let past_v = random_word(n * n, &mut rng);
        let continuation = random_word(merge_steps + 8, &mut rng);
        let gaps = ifp_empirical(&sys, &past_u, &past_v, &continuation)?;
        let forget = gaps
            .iter()
            .rposition(|&g| g != 0.0)
            .map_or(0, |last| last + 1);
        empirical_forget_steps = empirical_forget_steps.max(forget);
        if forget > merge_steps {
            forgetting_within_bound = false;
        }
    }

    let checks = OracleChecks {
        pair_simulation,
        synchronizing_words,
        quotient_homomorphism,
        quotient_minimal,
        witness_words,
        forgetting_within_bound,
    };
    let all_pass = pair_simulation
        && synchronizing_words
        && quotient_homomorphism
        && quotient_minimal
        && witness_words
        && forgetting_within_bound;

    let mut text = format!(
        "echo property holds: trajectories merge within {merge_steps} steps\n"
    );
    let _ = writeln!(
        text,
        "{} states ({} reachable), {} behavior classes, quotient has {} states",
        n,
        reachable.len(),
        partition.n_classes(),
        quotient.n_states()
    );
    let _ = writeln!(
        text,
        "pasts forgotten after at most {empirical_forget_steps} shared steps \
         across {trials} trials"
    );
    for (name, ok) in [
        ("pair simulation", pair_simulation),
        ("synchronizing words", synchronizing_words),
        ("quotient homomorphism", quotient_homomorphism),
        ("quotient minimality", quotient_minimal),
        ("witness words", witness_words),
        ("forgetting bound", forgetting_within_bound),
    ] {
        let _ = writeln!(text, "check {name}: {}", if ok { "ok" } else { "FAILED" });
    }

    let payload = Oracle {
        schema: SCHEMA,
        command: "oracle",
        n_states: n,
        arity: sys.arity(),
        esp: true,
        sustained_pair: None,
        suite: Some(OracleSuite {
            reachable_states: reachable.len(),
            nerode_classes: partition.n_classes(),
            quotient_states: quotient.n_states(),
            merge_steps,
            empirical_forget_steps,
            trials,
            seed,
            checks,
        }),
    };
    let code = if all_pass { EXIT_OK } else { EXIT_SEMANTIC };
    Emitted::new(&payload, text, code)
}
