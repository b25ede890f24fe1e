//! End-to-end tests of the binary: exit codes, report contents, and
//! output-file behavior, driven through real process invocations.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nerode::morphism::{gl_action, LinearMap};
use nerode::realization::shift_realization;
use nerode::{FiniteMemoryFilter, LinearSystem};

fn nerode_bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nerode"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_file(dir: &Path, name: &str, contents: &str) {
    fs::write(dir.join(name), contents).unwrap();
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code_of(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

const SCALAR_HALF: &str = r#"{"A": [[0.5]], "C": [1.0], "W": [1.0]}"#;
const IDENTITY: &str = r#"{"A": [[1.0, 0.0], [0.0, 1.0]], "C": [1.0, 1.0], "W": [1.0, 1.0]}"#;
const DIAG: &str = r#"{"A": [[0.5, 0.0], [0.0, 0.3]], "C": [1.0, 0.0], "W": [1.0, 1.0]}"#;
const RESETTING: &str = r#"{"transition": [[0, 1], [0, 2], [0, 2]], "output": [0, 1, 2]}"#;
const PERMUTATION: &str = r#"{"transition": [[1, 0], [0, 1]], "output": [0, 1]}"#;
const CLONED: &str = r#"{"transition": [[1, 0], [2, 0], [2, 0]], "output": [0, 1, 1]}"#;

#[test]
fn check_esp_reports_rho_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "scalar.json", SCALAR_HALF);
    write_file(dir.path(), "identity.json", IDENTITY);
    write_file(dir.path(), "near.json", r#"{"A": [[0.999999999999]], "C": [1.0], "W": [1.0]}"#);

    let out = nerode_bin(dir.path(), &["check-esp", "scalar.json"]);
    assert_eq!(code_of(&out), 0);
    assert!(stdout_of(&out).contains("rho = 0.5"));

    let out = nerode_bin(dir.path(), &["check-esp", "identity.json"]);
    assert_eq!(code_of(&out), 2);

    let out = nerode_bin(dir.path(), &["check-esp", "near.json"]);
    assert_eq!(code_of(&out), 3);
}

#[test]
fn check_esp_handles_finite_systems() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "resetting.json", RESETTING);
    write_file(dir.path(), "permutation.json", PERMUTATION);

    let out = nerode_bin(dir.path(), &["check-esp", "resetting.json"]);
    assert_eq!(code_of(&out), 0);
    assert!(stdout_of(&out).contains("merge within 2 steps"));

    let out = nerode_bin(dir.path(), &["check-esp", "permutation.json"]);
    assert_eq!(code_of(&out), 2);
    assert!(stdout_of(&out).contains("stay distinct forever"));
}

#[test]
fn malformed_and_missing_files_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "bad.json", "not json");
    write_file(dir.path(), "alien.json", r#"{"foo": 1}"#);

    assert_eq!(code_of(&nerode_bin(dir.path(), &["check-esp", "bad.json"])), 64);
    assert_eq!(code_of(&nerode_bin(dir.path(), &["check-esp", "alien.json"])), 64);
    assert_eq!(code_of(&nerode_bin(dir.path(), &["check-esp", "absent.json"])), 64);
    assert_eq!(code_of(&nerode_bin(dir.path(), &["check-esp", "bad.json", "--wat"])), 64);
    assert_eq!(
        code_of(&nerode_bin(dir.path(), &["reduce", "bad.json", "--tol", "0"])),
        64
    );
}

#[test]
fn reduce_collapses_the_diagonal_example() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "diag.json", DIAG);

    let out = nerode_bin(dir.path(), &["reduce", "diag.json", "--format", "structured"]);
    assert_eq!(code_of(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["reduced_dim"], 1);
    assert!((doc["A"][0][0].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert!((doc["C"][0].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((doc["W"][0].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(doc["verification"]["passes"], true);
}

#[test]
fn reduce_drops_the_silent_slot_of_a_shift_register() {
    let dir = tempfile::tempdir().unwrap();
    let shift = shift_realization(&FiniteMemoryFilter::new(vec![0.0, 1.0]).unwrap());
    write_file(dir.path(), "shift.json", &serde_json::to_string(&shift).unwrap());

    let out = nerode_bin(dir.path(), &["reduce", "shift.json", "--format", "structured"]);
    assert_eq!(code_of(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["reduced_dim"], 1);
}

#[test]
fn reduce_rejects_non_echoing_systems() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "identity.json", IDENTITY);
    let out = nerode_bin(dir.path(), &["reduce", "identity.json"]);
    assert_eq!(code_of(&out), 2);
}

#[test]
fn reduce_output_round_trips_at_the_same_dimension() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "diag.json", DIAG);

    let out = nerode_bin(
        dir.path(),
        &["reduce", "diag.json", "--format", "structured", "--output", "red.json"],
    );
    assert_eq!(code_of(&out), 0);
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp-"))
        .collect();
    assert!(leftovers.is_empty());

    let again = nerode_bin(dir.path(), &["reduce", "red.json", "--format", "structured"]);
    assert_eq!(code_of(&again), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&again)).unwrap();
    assert_eq!(doc["original_dim"], 1);
    assert_eq!(doc["reduced_dim"], 1);
}

#[test]
fn reduce_merges_cloned_finite_states() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "cloned.json", CLONED);
    let out = nerode_bin(dir.path(), &["reduce", "cloned.json", "--format", "structured"]);
    assert_eq!(code_of(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["original_states"], 3);
    assert_eq!(doc["reduced_states"], 2);
    assert_eq!(doc["homomorphism_exact"], true);
    assert_eq!(doc["minimal"], true);
}

#[test]
fn realize_matches_the_hankel_oracle() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "memoryless.json", r#"{"psi": [0.0, 0.0, 0.0, 1.0]}"#);
    write_file(dir.path(), "full.json", r#"{"psi": [2.0, -1.0, 3.0]}"#);
    write_file(dir.path(), "zero.json", r#"{"psi": [0.0, 0.0]}"#);

    let out = nerode_bin(dir.path(), &["realize", "memoryless.json", "--format", "structured"]);
    assert_eq!(code_of(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["dimension"], 1);
    assert_eq!(doc["hankel_rank_oracle"], 1);

    let out = nerode_bin(dir.path(), &["realize", "full.json", "--format", "structured"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["dimension"], 3);

    let out = nerode_bin(dir.path(), &["realize", "zero.json", "--format", "structured"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["dimension"], 0);
}

#[test]
fn realize_fits_a_measured_response_within_eps() {
    let dir = tempfile::tempdir().unwrap();
    write_file(
        dir.path(),
        "measured.json",
        r#"{"coefficients": [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
            "tail_bound": 0.0078125}"#,
    );

    let out = nerode_bin(
        dir.path(),
        &["realize", "measured.json", "--eps", "0.05", "--format", "structured"],
    );
    assert_eq!(code_of(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["dimension"], 1);
    let pole = doc["A"][0][0].as_f64().unwrap();
    assert!((pole - 0.5).abs() < 0.05, "pole {pole}");
    assert!(doc["truncation_error"].as_f64().unwrap() < 0.05);

    let out = nerode_bin(dir.path(), &["realize", "measured.json", "--eps", "0.001"]);
    assert_eq!(code_of(&out), 4);
    let out = nerode_bin(dir.path(), &["realize", "measured.json"]);
    assert_eq!(code_of(&out), 4);
}

#[test]
fn compare_recovers_the_change_of_basis() {
    let dir = tempfile::tempdir().unwrap();
    let sys = LinearSystem::from_rows(
        &[vec![0.0, 0.5], vec![-0.5, 0.0]],
        &[1.0, 1.0],
        &[1.0, -1.0],
    )
    .unwrap();
    let basis: LinearMap =
        serde_json::from_value(serde_json::json!({"matrix": [[2.0, 1.0], [1.0, 1.0]]})).unwrap();
    let moved = gl_action(&basis, &sys).unwrap();
    write_file(dir.path(), "a.json", &serde_json::to_string(&sys).unwrap());
    write_file(dir.path(), "b.json", &serde_json::to_string(&moved).unwrap());
    write_file(dir.path(), "scalar.json", SCALAR_HALF);

    let out = nerode_bin(dir.path(), &["compare", "a.json", "b.json", "--format", "structured"]);
    assert_eq!(code_of(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(doc["max_impulse_gap"].as_f64().unwrap() < 1e-9);
    assert_eq!(doc["equivalent"], true);
    let matrix = doc["isomorphism"]["matrix"].as_array().unwrap();
    for (i, row) in matrix.iter().enumerate() {
        for (j, entry) in row.as_array().unwrap().iter().enumerate() {
            let expected = basis.matrix()[(i, j)];
            assert!((entry.as_f64().unwrap() - expected).abs() < 1e-8);
        }
    }
    assert_eq!(doc["morphism_residuals"]["passes"], true);

    let out = nerode_bin(dir.path(), &["compare", "a.json", "scalar.json"]);
    assert_eq!(code_of(&out), 2);
    assert!(stdout_of(&out).contains("systems differ"));
}

#[test]
fn compare_of_a_system_with_itself_yields_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "diag_full.json", r#"{"A": [[0.5, 0.0], [0.0, 0.3]], "C": [1.0, 1.0], "W": [1.0, 1.0]}"#);
    let out = nerode_bin(
        dir.path(),
        &["compare", "diag_full.json", "diag_full.json", "--format", "structured"],
    );
    assert_eq!(code_of(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let matrix = doc["isomorphism"]["matrix"].as_array().unwrap();
    for (i, row) in matrix.iter().enumerate() {
        for (j, entry) in row.as_array().unwrap().iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((entry.as_f64().unwrap() - expected).abs() < 1e-9);
        }
    }
}

#[test]
fn oracle_cross_checks_pass_on_a_contracting_system() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "resetting.json", RESETTING);
    write_file(dir.path(), "permutation.json", PERMUTATION);

    let out = nerode_bin(
        dir.path(),
        &["oracle", "resetting.json", "--trials", "50", "--format", "structured"],
    );
    assert_eq!(code_of(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["esp"], true);
    let checks = &doc["suite"]["checks"];
    for name in [
        "pair_simulation",
        "synchronizing_words",
        "quotient_homomorphism",
        "quotient_minimal",
        "witness_words",
        "forgetting_within_bound",
    ] {
        assert_eq!(checks[name], true, "check {name}");
    }

    let out = nerode_bin(dir.path(), &["oracle", "permutation.json"]);
    assert_eq!(code_of(&out), 2);
}

#[test]
fn structured_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "resetting.json", RESETTING);
    let args = ["oracle", "resetting.json", "--seed", "9", "--format", "structured"];
    let first = nerode_bin(dir.path(), &args);
    let second = nerode_bin(dir.path(), &args);
    assert_eq!(first.stdout, second.stdout);
}
