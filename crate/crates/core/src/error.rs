use alloc::boxed::Box;
use alloc::string::String;

use crate::geometry::Plane;

/// Errors raised by the recovery kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(
        "low-confidence plane: {inlier_count} inliers ({inlier_fraction:.3} of candidates) below the required fraction"
    )]
    LowConfidence {
        plane: Plane,
        inlier_count: usize,
        inlier_fraction: f64,
    },
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("point cloud has no pixel provenance")]
    MissingProvenance,
    #[error("registration failed: {0}")]
    RegistrationFailed(String),
    #[error("no valid robot placement: tightest violated constraint `{constraint}` by {violation:.4} m")]
    NoPlacement { constraint: String, violation: f64 },
    #[error("frame {index}: {source}")]
    Frame { index: usize, source: Box<Error> },
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
    #[error("object {0}: no candidate mesh supplied")]
    MissingMesh(u16),
    #[error("unknown synthetic preset `{0}`")]
    UnknownPreset(String),
}

impl Error {
    /// Wraps `self` with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error beneath any stage or frame wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Frame { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
