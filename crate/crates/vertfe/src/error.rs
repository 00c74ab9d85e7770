use std::fmt::Debug;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use vertfe_core::pipeline::PipelineError;
use vertfe_core::stats::StatsError;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("input not found: {}", .0.display())]
    InputNotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad header: {0}")]
    Header(String),
    #[error("payload holds {got} bytes, expected {expected}")]
    Payload { expected: usize, got: usize },
    #[error("expected a {expected} volume, found {found}")]
    WrongKind { expected: &'static str, found: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
}

impl FormatError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            FormatError::InputNotFound(path.to_path_buf())
        } else {
            FormatError::Io { path: path.to_path_buf(), source }
        }
    }
}

/// Error reported by a command, with its machine-readable kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub exit_code: u8,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

/// Leading identifier of a `Debug` rendering, i.e. the variant name.
fn variant_name<E: Debug>(e: &E) -> String {
    let s = format!("{e:?}");
    s.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
}

impl CliError {
    pub fn new(kind: impl Into<String>, message: impl Into<String>, exit_code: u8) -> Self {
        Self { kind: kind.into(), message: message.into(), exit_code }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("Usage", message, EXIT_USAGE)
    }

    /// `{"error": {...}}` as printed on standard error.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wrapped<'a> {
            error: &'a CliError,
        }
        serde_json::to_string(&Wrapped { error: self }).expect("serialisable error")
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::new(variant_name(&e), e.to_string(), EXIT_DATA)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        let (kind, code) = match &e {
            PipelineError::Config(_) => ("Config".to_string(), EXIT_USAGE),
            PipelineError::Voxel(inner) => (variant_name(inner), EXIT_DATA),
            PipelineError::Segment(inner) => (variant_name(inner), EXIT_DATA),
            PipelineError::Mesh(inner) => (variant_name(inner), EXIT_DATA),
            PipelineError::Material(inner) => (variant_name(inner), EXIT_DATA),
            PipelineError::Fem(inner) => (variant_name(inner), EXIT_NUMERICAL),
            PipelineError::Failure(inner) => (variant_name(inner), EXIT_NUMERICAL),
        };
        CliError::new(kind, message, code)
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::new(variant_name(&e), e.to_string(), EXIT_DATA)
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(variant_name(&e), e.to_string(), EXIT_DATA)
            }
        }
    )*};
}

data_error!(
    vertfe_core::voxel::VoxelError,
    vertfe_core::segment::SegmentError,
    vertfe_core::mesh::MeshError,
    vertfe_core::material::MaterialError,
    vertfe_core::phantom::PhantomError
);

#[cfg(test)]
mod tests {
    use super::*;
    use vertfe_core::fem::FemError;
    use vertfe_core::segment::SegmentError;

    #[test]
    fn kinds_and_codes() {
        let e: CliError = PipelineError::Segment(SegmentError::EmptyMask).into();
        assert_eq!((e.kind.as_str(), e.exit_code), ("EmptyMask", EXIT_DATA));
        let e: CliError = PipelineError::Fem(FemError::NoConvergence { iterations: 3, residual: 0.1 }).into();
        assert_eq!((e.kind.as_str(), e.exit_code), ("NoConvergence", EXIT_NUMERICAL));
        let e: CliError = FormatError::InputNotFound("x.vgrid".into()).into();
        assert_eq!(e.kind, "InputNotFound");
        assert!(e.to_json().starts_with("{\"error\":{\"kind\":\"InputNotFound\""));
    }
}
