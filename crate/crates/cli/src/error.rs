use serde::Serialize;
use thiserror::Error;
use uamn_core::SolveError;

use crate::instance::FieldProblem;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error{}: {message}", location.as_ref().map(|l| format!(" at {l}")).unwrap_or_default())]
    Parse { location: Option<String>, message: String },
    #[error("instance failed validation:\n{}", list(.0))]
    Validation(Vec<FieldProblem>),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{0}")]
    CheckFailed(String),
}

fn list(problems: &[FieldProblem]) -> String {
    problems.iter().map(|p| format!("  {p}")).collect::<Vec<_>>().join("\n")
}

/// Machine-readable failure record written as `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<FieldProblem>,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solve(SolveError::RobustlyInfeasible) => 2,
            CliError::Solve(SolveError::LatticeTooLarge { .. }) => 3,
            CliError::Parse { .. } | CliError::Validation(_) | CliError::Usage(_) => 4,
            CliError::Solve(SolveError::Invalid(_)) => 4,
            CliError::Solve(SolveError::Unsupported(_)) => 4,
            CliError::Io { .. } | CliError::CheckFailed(_) => 1,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let kind = match self {
            CliError::Parse { .. } => "parse",
            CliError::Validation(_) => "validation",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
            CliError::Solve(SolveError::RobustlyInfeasible) => "infeasible",
            CliError::Solve(SolveError::LatticeTooLarge { .. }) => "lattice-cap",
            CliError::Solve(SolveError::Invalid(_)) => "validation",
            CliError::Solve(SolveError::Unsupported(_)) => "unsupported",
            CliError::CheckFailed(_) => "check-failed",
        };
        let problems = match self {
            CliError::Validation(p) => p.clone(),
            _ => Vec::new(),
        };
        ErrorRecord {
            kind,
            exit_code: self.exit_code(),
            message: self.to_string(),
            problems,
        }
    }
}
