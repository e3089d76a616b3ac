use std::fmt;
use std::path::Path;

use aveas_core::calibration::CalibrationError;
use aveas_core::metrics::MetricsError;
use aveas_core::model::ValidationReport;
use aveas_core::sampler::SamplerError;
use aveas_core::sim::ConfigError;
use aveas_core::store::StoreError;

/// Process exit codes. These values are part of the interface and never change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Validation = 1,
    Usage = 2,
    Io = 3,
    Computation = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
    /// Machine-readable details, printed on stdout.
    pub report: Option<ValidationReport>,
}

impl CliError {
    pub fn new(status: ExitStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            report: None,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitStatus::Usage, message)
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(ExitStatus::Io, format!("{}: {err}", path.display()))
    }

    pub fn validation(message: impl Into<String>, report: ValidationReport) -> Self {
        Self {
            status: ExitStatus::Validation,
            message: message.into(),
            report: Some(report),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::ValidationFailed(r) => return CliError::validation(e.to_string(), r.clone()),
            StoreError::DuplicateId(_) | StoreError::InvalidId(_) => ExitStatus::Validation,
            StoreError::NotFound(_) => ExitStatus::Usage,
            StoreError::CorruptEntry { .. }
            | StoreError::CorruptIndex { .. }
            | StoreError::Locked(_)
            | StoreError::MissingRoot(_)
            | StoreError::Io { .. } => ExitStatus::Io,
        };
        CliError::new(status, e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match &e {
            MetricsError::Validation(r) => CliError::validation(e.to_string(), r.clone()),
            MetricsError::InvalidHorizon(_) => CliError::usage(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        let status = match &e {
            CalibrationError::InvalidSpec(_) | CalibrationError::Simulation(_) => ExitStatus::Usage,
            CalibrationError::EmptySample(_) => ExitStatus::Computation,
        };
        CliError::new(status, e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        let status = match &e {
            SamplerError::InvalidSpec(_) | SamplerError::Simulation(_) => ExitStatus::Usage,
            SamplerError::NoSuchEvent(_)
            | SamplerError::MissingStates { .. }
            | SamplerError::NoLaneChange(_)
            | SamplerError::NoApproacher(_)
            | SamplerError::Unsupported(..) => ExitStatus::Computation,
        };
        CliError::new(status, e.to_string())
    }
}
