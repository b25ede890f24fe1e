//! File loading with format detection. Every input is a JSON document;
//! the top-level fields decide what it describes.

use std::fs;
use std::path::Path;

use nerode::linear::ImpulseResponse;
use nerode::{FiniteMemoryFilter, LinearSystem};
use nerode::finite::FiniteSystem;

use crate::output::CliError;

pub enum SystemFile {
    StateSpace(LinearSystem),
    Finite(FiniteSystem),
}

pub enum KernelFile {
    /// Exact kernel window, field `psi`.
    Window(FiniteMemoryFilter),
    /// Measured leading coefficients with a certified tail, fields
    /// `coefficients` and `tail_bound`.
    Measured(ImpulseResponse),
}

fn read_document(path: &Path) -> Result<serde_json::Value, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|err| CliError::usage(format!("cannot read {}: {err}", path.display())))?;
    serde_json::from_str(&raw)
        .map_err(|err| CliError::usage(format!("cannot parse {}: {err}", path.display())))
}

fn decode<T: serde::de::DeserializeOwned>(
    value: serde_json::Value,
    path: &Path,
    what: &str,
) -> Result<T, CliError> {
    serde_json::from_value(value)
        .map_err(|err| CliError::usage(format!("{} is not a {what}: {err}", path.display())))
}

fn has_fields(value: &serde_json::Value, fields: &[&str]) -> bool {
    fields.iter().all(|f| value.get(f).is_some())
}

/// Loads a state-space or finite system, deciding by field names:
/// `A`/`C`/`W` versus `transition`/`output`.
pub fn load_system(path: &Path) -> Result<SystemFile, CliError> {
    let value = read_document(path)?;
    if has_fields(&value, &["A", "C", "W"]) {
        return Ok(SystemFile::StateSpace(decode(value, path, "state-space system")?));
    }
    if has_fields(&value, &["transition", "output"]) {
        return Ok(SystemFile::Finite(decode(value, path, "finite system")?));
    }
    Err(CliError::usage(format!(
        "{} is neither a state-space system (fields A, C, W) nor a \
         finite system (fields transition, output)",
        path.display()
    )))
}

pub fn load_state_space(path: &Path) -> Result<LinearSystem, CliError> {
    match load_system(path)? {
        SystemFile::StateSpace(sys) => Ok(sys),
        SystemFile::Finite(_) => Err(CliError::usage(format!(
            "{} holds a finite system; this command needs a state-space system",
            path.display()
        ))),
    }
}

pub fn load_finite(path: &Path) -> Result<FiniteSystem, CliError> {
    match load_system(path)? {
        SystemFile::Finite(sys) => Ok(sys),
        SystemFile::StateSpace(_) => Err(CliError::usage(format!(
            "{} holds a state-space system; this command needs a finite system",
            path.display()
        ))),
    }
}

/// Loads a kernel for realization: an exact window (`psi`) or a
/// measured response (`coefficients`, `tail_bound`).
pub fn load_kernel(path: &Path) -> Result<KernelFile, CliError> {
    let value = read_document(path)?;
    if value.get("psi").is_some() {
        return Ok(KernelFile::Window(decode(value, path, "kernel window")?));
    }
    if has_fields(&value, &["coefficients", "tail_bound"]) {
        return Ok(KernelFile::Measured(decode(value, path, "measured response")?));
    }
    Err(CliError::usage(format!(
        "{} is neither a kernel window (field psi) nor a measured \
         response (fields coefficients, tail_bound)",
        path.display()
    )))
}
