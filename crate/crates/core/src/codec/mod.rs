//! Payload bits to per-region microstructure angles and back.
//!
//! A payload of `n * m` bits is split into `n` MSB-first symbols. With Gray
//! coding enabled each symbol is read as a Gray word, so neighbouring angle
//! states differ in a single bit. Symbol `v` is placed at axis angle
//! `M(v / 2^m * pi)` where `M` is the [`NonlinearMap`].
//! No error-correcting code is applied.

mod gray;
mod interp;
mod map;

pub use gray::{bits_to_value, gray_decode, gray_encode, value_to_bits};
pub use interp::MonotoneCubic;
pub use map::{scan_grid, NonlinearMap, Orientation, MAP_MAGIC, TABLE_SIZE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, MicrostructureAngle};

/// Largest supported symbol width.
pub const MAX_BITS_PER_REGION: u32 = 16;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("value {value} does not fit in {bits} bits")]
    ValueOutOfRange { value: u32, bits: u32 },
    #[error("empty bit sequence")]
    EmptyBits,
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error("payload has {got} bits, expected exactly {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("payload has {got} bits but the tag holds only {capacity}")]
    PayloadTooLong { capacity: usize, got: usize },
    #[error("detected {got} regions, expected {expected}")]
    RegionCountMismatch { expected: usize, got: usize },
    #[error("region {region}: state {state} out of range for {bits} bits")]
    StateOutOfRange { region: usize, state: u32, bits: u32 },
    #[error("crossing angle is not strictly monotone at knot {index} (delta = {delta} rad)")]
    NonMonotone { index: usize, delta: f64 },
    #[error("malformed map cache: {0}")]
    CacheFormat(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CodecError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub n_regions: usize,
    pub bits_per_region: u32,
    pub use_gray: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            n_regions: 17,
            bits_per_region: 3,
            use_gray: true,
        }
    }
}

impl CodecConfig {
    pub fn new(n_regions: usize, bits_per_region: u32, use_gray: bool) -> Result<Self> {
        let cfg = Self {
            n_regions,
            bits_per_region,
            use_gray,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_regions == 0 {
            return Err(CodecError::InvalidConfig("at least one region is required".into()));
        }
        if self.bits_per_region == 0 || self.bits_per_region > MAX_BITS_PER_REGION {
            return Err(CodecError::InvalidConfig(format!(
                "bits per region must be in 1..={MAX_BITS_PER_REGION}, got {}",
                self.bits_per_region
            )));
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.n_regions * self.bits_per_region as usize
    }

    pub fn states(&self) -> u32 {
        1 << self.bits_per_region
    }

    fn symbol_value(&self, bits: &[bool]) -> Result<u32> {
        if self.use_gray {
            gray_decode(bits)
        } else {
            bits_to_value(bits)
        }
    }

    fn symbol_bits(&self, value: u32) -> Result<Vec<bool>> {
        if self.use_gray {
            gray_encode(value, self.bits_per_region)
        } else {
            value_to_bits(value, self.bits_per_region)
        }
    }
}

/// One encoded region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleCode {
    pub region_index: usize,
    pub value: u32,
    pub angle: MicrostructureAngle,
}

/// Right-pads `bits` with zeros to the tag capacity.
pub fn pad_payload(bits: &[bool], cfg: &CodecConfig) -> Result<Vec<bool>> {
    let capacity = cfg.capacity();
    if bits.len() > capacity {
        return Err(CodecError::PayloadTooLong {
            capacity,
            got: bits.len(),
        });
    }
    let mut out = bits.to_vec();
    out.resize(capacity, false);
    Ok(out)
}

/// Symbol values of a full-length payload, one per region.
pub fn payload_states(payload: &[bool], cfg: &CodecConfig) -> Result<Vec<u32>> {
    cfg.validate()?;
    if payload.len() != cfg.capacity() {
        return Err(CodecError::LengthMismatch {
            expected: cfg.capacity(),
            got: payload.len(),
        });
    }
    payload
        .chunks_exact(cfg.bits_per_region as usize)
        .map(|chunk| cfg.symbol_value(chunk))
        .collect()
}

pub fn encode(payload: &[bool], cfg: &CodecConfig, map: &NonlinearMap) -> Result<Vec<AngleCode>> {
    Ok(payload_states(payload, cfg)?
        .into_iter()
        .enumerate()
        .map(|(region_index, value)| AngleCode {
            region_index,
            value,
            angle: map.state_angle(value, cfg.bits_per_region),
        })
        .collect())
}

/// Concatenates the symbol bits of detected states in region order.
pub fn decode(states: &[u32], cfg: &CodecConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    if states.len() != cfg.n_regions {
        return Err(CodecError::RegionCountMismatch {
            expected: cfg.n_regions,
            got: states.len(),
        });
    }
    let mut out = Vec::with_capacity(cfg.capacity());
    for (region, &state) in states.iter().enumerate() {
        if state >= cfg.states() {
            return Err(CodecError::StateOutOfRange {
                region,
                state,
                bits: cfg.bits_per_region,
            });
        }
        out.extend(cfg.symbol_bits(state)?);
    }
    Ok(out)
}

/// Parses a string of `0`/`1` characters, ignoring whitespace and `_`.
pub fn parse_bits(text: &str) -> Result<Vec<bool>> {
    text.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(CodecError::InvalidConfig(format!("invalid bit character {other:?}"))),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Number of positions where two equal-length bit strings differ.
pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len())
}
