//! Command implementations and the experiment sweep harness.

pub mod commands;
pub mod settings;
pub mod sweep;

use std::path::Path;

use anisotag_core::codec::CodecError;
use anisotag_core::detector::DetectorError;
use anisotag_core::gcode::GcodeError;
use anisotag_core::geometry::GeometryError;
use anisotag_core::optics::OpticsError;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use settings::{CommonArgs, ConfigFile, Settings};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Gcode(#[from] GcodeError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}
