//! Diagnostics, guarded file writes and run sidecars.

use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use evalcards_core::json::{sha256_hex, to_canonical_string};
use serde_json::json;

/// Malformed input, failed validation or a refused overwrite.
pub const EXIT_USER: u8 = 2;
/// Anything that is not the caller's fault.
pub const EXIT_INTERNAL: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn user(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USER,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

pub struct Console {
    color: bool,
}

impl Console {
    pub fn from_env() -> Self {
        let color = std::env::var_os("EVALCARDS_NO_COLOR").is_none() && io::stderr().is_terminal();
        Console { color }
    }

    fn tag(&self, word: &str, ansi: &str) -> String {
        if self.color {
            format!("\x1b[{ansi}m{word}\x1b[0m")
        } else {
            word.to_string()
        }
    }

    pub fn error(&self, message: &str) {
        eprintln!("{}: {message}", self.tag("error", "1;31"));
    }

    /// Prints a diagnostic anchored at `path:line` when a line is known.
    pub fn diagnostic(&self, path: &Path, line: Option<usize>, warning: bool, message: &str) {
        let tag = if warning {
            self.tag("warning", "1;33")
        } else {
            self.tag("error", "1;31")
        };
        match line {
            Some(line) => eprintln!("{}:{line}: {tag}: {message}", path.display()),
            None => eprintln!("{}: {tag}: {message}", path.display()),
        }
    }

    pub fn info(&self, message: &str) {
        let mut out = io::stdout().lock();
        let _ = writeln!(out, "{message}");
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))
}

/// Refuses to replace an existing file unless `force` is set.
pub fn guard(path: &Path, force: bool) -> Result<(), CliError> {
    if !force && path.exists() {
        return Err(CliError::user(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::internal(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

/// Generation time, pinned by `SOURCE_DATE_EPOCH` when set.
fn generated_at() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Path of the run sidecar for an output file.
pub fn sidecar_for(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".run.json");
    path.with_file_name(name)
}

/// Records what a run produced. Outputs themselves never carry a time, so
/// they stay byte-identical across runs; the time lives here.
pub fn write_sidecar(
    sidecar: &Path,
    command: &str,
    inputs: &[&Path],
    outputs: &[(PathBuf, String)],
) -> Result<(), CliError> {
    let doc = json!({
        "tool": "evalcards",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "generated_at": generated_at(),
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "outputs": outputs
            .iter()
            .map(|(p, body)| json!({"path": p.display().to_string(), "sha256": sha256_hex(body.as_bytes())}))
            .collect::<Vec<_>>(),
    });
    write_file(
        sidecar,
        &to_canonical_string(&doc).expect("sidecar serializes"),
    )
}
