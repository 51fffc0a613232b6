//! Experiment harness: TOML spec parsing, sweep expansion, parallel
//! execution with CSV/JSON artifacts, invariant check evaluation, and
//! log-log rate-slope regression.

pub mod checks;
pub mod config;
pub mod execute;
pub mod slope;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CoreError;
use crate::optimizers::RunConfig;

pub use checks::{numeric_prox, prox_oracle_deviation, CheckOutcome};
pub use config::{parse_spec, render_spec};
pub use execute::{execute, ExecReport, RunSummary, OUTPUT_ENV};
pub use slope::{median_avg_gap_curve, slope, slope_of_points, GapSeries, SlopeReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Syntax or schema problem in the spec document (line/key context from
    /// the TOML parser where available).
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally valid spec with inconsistent contents.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl HarnessError {
    /// Process exit code classification: 2 for config problems, 3 for
    /// runtime/numeric failures. Check failures are reported separately and
    /// map to exit 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse(_) | HarnessError::Validation(_) => 2,
            HarnessError::Io(_) => 3,
            // A rejected explicit step size is a configuration mistake.
            HarnessError::Core(CoreError::StepSize(_)) => 2,
            HarnessError::Core(_) => 3,
        }
    }
}

pub type HResult<T> = std::result::Result<T, HarnessError>;

/// The run-level checks a spec can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    GradBound,
    Descent,
    ESeq,
    TheoremBound,
    SelfBounding,
    ProxOracle,
    LocalSmooth,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        CheckKind::GradBound,
        CheckKind::Descent,
        CheckKind::ESeq,
        CheckKind::TheoremBound,
        CheckKind::SelfBounding,
        CheckKind::ProxOracle,
        CheckKind::LocalSmooth,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            CheckKind::GradBound => "grad_bound",
            CheckKind::Descent => "descent",
            CheckKind::ESeq => "e_seq",
            CheckKind::TheoremBound => "theorem_bound",
            CheckKind::SelfBounding => "self_bounding",
            CheckKind::ProxOracle => "prox_oracle",
            CheckKind::LocalSmooth => "local_smooth",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.id() == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

/// A fully validated experiment: expanded runs, requested checks, output
/// destinations and slope-regression windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub runs: Vec<RunConfig>,
    pub checks: Vec<CheckKind>,
    pub output: OutputSpec,
    pub slope_windows: Vec<(u64, u64)>,
}
