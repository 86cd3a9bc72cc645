use std::path::PathBuf;

use thiserror::Error;

/// Which axis of a tabulated surface a query fell outside of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Frequency,
    Power,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Frequency => f.write_str("frequency"),
            Axis::Power => f.write_str("power"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{axis} {value} outside tabulated range [{min}, {max}]")]
    Range {
        axis: Axis,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("surface build failed in {} cell(s): {}", .cells.len(), format_cells(.cells))]
    SurfaceBuild { cells: Vec<(f64, f64)> },

    #[error("singular network: {0}")]
    Singular(&'static str),

    #[error("{0}")]
    Precondition(String),

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_cells(cells: &[(f64, f64)]) -> String {
    cells
        .iter()
        .map(|(f, p)| format!("({:.4} GHz, {:.1} dBm)", f / 1e9, p))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse { .. } | Error::Range { .. } | Error::Domain(_) => 2,
            Error::NonConvergence { .. } | Error::SurfaceBuild { .. } | Error::Singular(_) => 3,
            Error::Io { .. } => 4,
            Error::Precondition(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
