use std::path::{Path, PathBuf};

use scenelift_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("object {id}: cannot load mesh {path}: {message}")]
    Asset { id: u16, path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    /// Command-line usage errors (reported by the argument parser).
    pub const USAGE: i32 = 2;
    /// Missing, unreadable or inconsistent input files.
    pub const INPUT: i32 = 3;
    pub const CONFIG: i32 = 4;
    /// Supported-plane estimation failed.
    pub const ALIGN: i32 = 5;
    pub const REGISTRATION: i32 = 6;
    pub const NO_PLACEMENT: i32 = 7;
    pub const BLEND: i32 = 8;
    /// Mesh assets or rendering.
    pub const RENDER: i32 = 9;
    /// Background geometry construction.
    pub const BACKGROUND: i32 = 10;
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl std::fmt::Display) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } => exit::INPUT,
            Error::Asset { .. } => exit::RENDER,
            Error::Config(_) => exit::CONFIG,
            Error::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    if let CoreError::Stage { stage, source } = e {
        return match *stage {
            "inputs" | "unproject" | "partition" => match source.root() {
                CoreError::Config(_) => exit::CONFIG,
                _ => exit::INPUT,
            },
            "config" => exit::CONFIG,
            "align" => exit::ALIGN,
            "register" => exit::REGISTRATION,
            "blend" => exit::BLEND,
            "render" => exit::RENDER,
            "background" => exit::BACKGROUND,
            _ => core_exit_code(source),
        };
    }
    match e {
        CoreError::DimensionMismatch { .. } | CoreError::MissingProvenance | CoreError::MissingMesh(_) => exit::INPUT,
        CoreError::Config(_) | CoreError::UnknownPreset(_) => exit::CONFIG,
        CoreError::LowConfidence { .. } => exit::ALIGN,
        CoreError::RegistrationFailed(_) => exit::REGISTRATION,
        CoreError::NoPlacement { .. } => exit::NO_PLACEMENT,
        CoreError::Frame { .. } => exit::BLEND,
        _ => exit::OTHER,
    }
}
