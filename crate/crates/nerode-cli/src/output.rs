//! Report emission: exit-code policy, text and structured rendering,
//! atomic output writing.

use std::fs;
use std::path::Path;

use serde::Serialize;

/// Exit codes follow the usual scripting conventions: 0 success, 2
/// semantic failure (no echo property, behaviors differ), 3 cannot
/// decide, 4 infeasible request, 64 usage or parse problem.
pub const EXIT_OK: u8 = 0;
pub const EXIT_SEMANTIC: u8 = 2;
pub const EXIT_INDETERMINATE: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;
pub const EXIT_USAGE: u8 = 64;

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        Self { code: EXIT_USAGE, message }
    }
}

impl From<nerode::Error> for CliError {
    fn from(err: nerode::Error) -> Self {
        use nerode::Error;
        let code = match err {
            Error::EspFails(_)
            | Error::NoContractingPower { .. }
            | Error::NotCanonical(_)
            | Error::NoIsomorphism(_) => EXIT_SEMANTIC,
            Error::EspIndeterminate { .. }
            | Error::EigenConvergence
            | Error::Internal(_) => EXIT_INDETERMINATE,
            Error::EpsBelowFloor { .. } => EXIT_INFEASIBLE,
            _ => EXIT_USAGE,
        };
        Self { code, message: err.to_string() }
    }
}

/// A finished report in both renderings plus the exit code it carries.
pub struct Emitted {
    pub text: String,
    pub structured: String,
    pub code: u8,
}

impl Emitted {
    pub fn new(payload: &impl Serialize, text: String, code: u8) -> Result<Self, CliError> {
        let mut structured = serde_json::to_string_pretty(payload).map_err(|err| CliError {
            code: EXIT_INDETERMINATE,
            message: format!("cannot serialize report: {err}"),
        })?;
        structured.push('\n');
        Ok(Self { text, structured, code })
    }
}

/// Writes the body to stdout, or to the path via a temporary file in
/// the same directory followed by a rename, so readers never observe a
/// half-written report.
pub fn write_report(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        print!("{body}");
        return Ok(());
    };
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let finish = fs::write(&tmp, body).and_then(|()| fs::rename(&tmp, path));
    if let Err(err) = finish {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::usage(format!(
            "cannot write {}: {err}",
            path.display()
        )));
    }
    Ok(())
}
