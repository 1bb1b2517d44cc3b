//! Report documents and run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use ahcc_core::solver::SolveReport;
use ahcc_core::verify::VerificationSummary;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

/// The JSON report written by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub config: RunConfig,
    pub solve: Option<SolveReport>,
    pub verification: Option<VerificationSummary>,
    /// Artifact name to path.
    pub files: BTreeMap<String, PathBuf>,
    pub version: String,
    pub timestamp: String,
}

impl ReportDoc {
    pub fn new(config: RunConfig, now: DateTime<Utc>) -> Self {
        ReportDoc {
            config,
            solve: None,
            verification: None,
            files: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: now.to_rfc3339(),
        }
    }

    pub fn pass(&self) -> bool {
        let solved = self.solve.as_ref().is_none_or(|s| s.converged);
        solved && self.verification.as_ref().is_none_or(|v| v.pass)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Schema(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
    }
}

/// Creates a fresh `<base>/<command>-<timestamp>` directory, adding a
/// numeric suffix rather than reusing an existing one.
pub fn create_run_dir(base: &Path, command: &str, now: DateTime<Utc>) -> Result<PathBuf, CliError> {
    fs::create_dir_all(base).map_err(|e| CliError::io(base, e))?;
    let stem = format!("{command}-{}", now.format("%Y%m%dT%H%M%S%.3fZ"));
    for k in 0.. {
        let name = if k == 0 { stem.clone() } else { format!("{stem}-{k}") };
        let dir = base.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::io(&dir, e)),
        }
    }
    unreachable!()
}

pub fn residual_csv(report: &SolveReport) -> String {
    let mut out = String::from("iteration,residual,e1,e2\n");
    let cell = |v: Option<&f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for (k, r) in report.residual_history.iter().enumerate() {
        let (e1, e2) = (cell(report.e1_history.get(k)), cell(report.e2_history.get(k)));
        writeln!(out, "{k},{r:e},{e1},{e2}").unwrap();
    }
    out
}

pub fn profile_csv(profile: &[(f64, f64)]) -> String {
    let mut out = String::from("rho,max_frame_norm\n");
    for (rho, v) in profile {
        writeln!(out, "{rho:e},{v:e}").unwrap();
    }
    out
}
