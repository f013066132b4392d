//! Printer instruction files for SCS tags.
//!
//! A [`TagLayout`] is realised as one layer of parallel infill lines per
//! region, each line a half-cylinder bead whose direction is the region's
//! axis angle. Emission is deterministic and uses relative extrusion with
//! one `E` value per extruding move.

mod emit;
mod estimate;
mod infill;
mod program;

pub use emit::{emit_gcode, render_number, write_gcode, COORD_DECIMALS, E_DECIMALS};
pub use estimate::angle_estimate;
pub use infill::{infill_segments, Segment};
pub use program::{parse_gcode, Decimal, ExtrusionMode, GcodeProgram, Line, Motion, MoveKind};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::AngleCode;
use crate::geometry::MicrostructureAngle;

/// Credit-card tag size, millimeters.
pub const CARD_WIDTH: f64 = 85.6;
pub const CARD_HEIGHT: f64 = 53.98;

const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GcodeError {
    #[error("invalid printer profile: {0}")]
    InvalidProfile(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("region {region} is too narrow for a single {linewidth} mm line")]
    EmptyRegion { region: usize, linewidth: f64 },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("region {region} contains no extruding moves")]
    AmbiguousRegion { region: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, GcodeError>;

/// Nozzle, filament and layer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrinterProfile {
    pub filament_diameter: f64,
    pub nozzle_diameter: f64,
    pub linewidth: f64,
    pub layer_height: f64,
    pub z_print: f64,
    /// mm/min.
    pub feed_rate: f64,
    /// Fraction in `(0, 1]` applied to the volume-balanced feed length.
    pub extrusion_factor: f64,
}

impl Default for PrinterProfile {
    fn default() -> Self {
        Self::with_layer_height(0.2)
    }
}

impl PrinterProfile {
    /// Default nozzle and filament with `z_print = layer_height + 0.1`.
    pub fn with_layer_height(layer_height: f64) -> Self {
        Self {
            filament_diameter: 1.75,
            nozzle_diameter: 0.4,
            linewidth: 0.4,
            layer_height,
            z_print: layer_height + 0.1,
            feed_rate: 3000.0,
            extrusion_factor: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("filament diameter", self.filament_diameter),
            ("nozzle diameter", self.nozzle_diameter),
            ("linewidth", self.linewidth),
            ("layer height", self.layer_height),
            ("feed rate", self.feed_rate),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(GcodeError::InvalidProfile(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.z_print >= self.layer_height && self.z_print.is_finite()) {
            return Err(GcodeError::InvalidProfile(format!(
                "z_print {} is below the layer height {}",
                self.z_print, self.layer_height
            )));
        }
        if !(self.extrusion_factor > 0.0 && self.extrusion_factor <= 1.0) {
            return Err(GcodeError::InvalidProfile(format!(
                "extrusion factor must be in (0, 1], got {}",
                self.extrusion_factor
            )));
        }
        Ok(())
    }
}

/// Filament feed length for a bead of length `path_length`.
///
/// The bead cross-section is a half ellipse with semi-axes `w/2` and `h`,
/// balanced against the fed filament cylinder, then scaled by the
/// extrusion factor: `factor * h * w / d_f^2 * l`.
pub fn extrusion_length(path_length: f64, profile: &PrinterProfile) -> f64 {
    profile.extrusion_factor * profile.layer_height * profile.linewidth
        / (profile.filament_diameter * profile.filament_diameter)
        * path_length
}

/// One encoding region: the strip `u0 <= x <= u1` across the full height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutRegion {
    pub u0: f64,
    pub u1: f64,
    pub angle: MicrostructureAngle,
}

impl LayoutRegion {
    pub fn width(&self) -> f64 {
        self.u1 - self.u0
    }
}

/// Physical tag: regions partition `[0, width]` along X; lines run across
/// `[0, height]` along Y. `origin` places the lower-left corner on the bed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagLayout {
    pub width: f64,
    pub height: f64,
    pub origin: (f64, f64),
    pub regions: Vec<LayoutRegion>,
}

impl TagLayout {
    /// Equal-width regions carrying `angles` in order.
    pub fn uniform(width: f64, height: f64, angles: &[MicrostructureAngle]) -> Self {
        let n = angles.len().max(1) as f64;
        let regions = angles
            .iter()
            .enumerate()
            .map(|(i, &angle)| LayoutRegion {
                u0: width * i as f64 / n,
                u1: if i + 1 == angles.len() { width } else { width * (i + 1) as f64 / n },
                angle,
            })
            .collect();
        Self {
            width,
            height,
            origin: (0.0, 0.0),
            regions,
        }
    }

    pub fn from_codes(width: f64, height: f64, codes: &[AngleCode]) -> Self {
        let angles: Vec<MicrostructureAngle> = codes.iter().map(|c| c.angle).collect();
        Self::uniform(width, height, &angles)
    }

    pub fn with_origin(mut self, x: f64, y: f64) -> Self {
        self.origin = (x, y);
        self
    }

    pub fn angles(&self) -> Vec<MicrostructureAngle> {
        self.regions.iter().map(|r| r.angle).collect()
    }

    /// Interior region boundaries, left to right.
    pub fn boundaries(&self) -> Vec<f64> {
        self.regions.iter().skip(1).map(|r| r.u0).collect()
    }

    pub fn validate(&self, linewidth: f64) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return Err(GcodeError::InvalidLayout(format!(
                "tag size must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        let (first, last) = match (self.regions.first(), self.regions.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(GcodeError::InvalidLayout("layout has no regions".into())),
        };
        if first.u0.abs() > BOUNDARY_EPS || (last.u1 - self.width).abs() > BOUNDARY_EPS {
            return Err(GcodeError::InvalidLayout(format!(
                "regions must span [0, {}], got [{}, {}]",
                self.width, first.u0, last.u1
            )));
        }
        for (i, pair) in self.regions.windows(2).enumerate() {
            if (pair[0].u1 - pair[1].u0).abs() > BOUNDARY_EPS {
                return Err(GcodeError::InvalidLayout(format!(
                    "regions {i} and {} do not share a boundary",
                    i + 1
                )));
            }
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.width() < 2.0 * linewidth - BOUNDARY_EPS {
                return Err(GcodeError::InvalidLayout(format!(
                    "region {i} is {} mm wide, minimum is {} mm",
                    r.width(),
                    2.0 * linewidth
                )));
            }
        }
        Ok(())
    }

    /// Region containing `x` in tag coordinates; boundaries belong to the
    /// region on their right.
    pub fn region_at(&self, x: f64) -> Option<usize> {
        if x < -BOUNDARY_EPS || x > self.width + BOUNDARY_EPS {
            return None;
        }
        let idx = self.regions.partition_point(|r| r.u1 <= x);
        Some(idx.min(self.regions.len().saturating_sub(1)))
    }

    /// Short hex digest of the exact layout contents.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"layout");
        for v in [self.width, self.height, self.origin.0, self.origin.1] {
            h.update(v.to_le_bytes());
        }
        h.update((self.regions.len() as u64).to_le_bytes());
        for r in &self.regions {
            h.update(r.u0.to_le_bytes());
            h.update(r.u1.to_le_bytes());
            h.update(r.angle.delta().to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrusion_formula() {
        let mut p = PrinterProfile::default();
        assert_eq!(extrusion_length(0.0, &p), 0.0);
        p.extrusion_factor = 1.0;
        let l = extrusion_length(10.0, &p);
        assert!((l - 0.2 * 0.4 / (1.75 * 1.75) * 10.0).abs() < 1e-15);
        assert!((l - 0.26122).abs() < 1e-5);
        let mut half = p;
        half.filament_diameter /= 2.0;
        assert!((extrusion_length(10.0, &half) / l - 4.0).abs() < 1e-12);
    }

    #[test]
    fn default_z_print() {
        let p = PrinterProfile::default();
        assert!((p.z_print - 0.3).abs() < 1e-12);
        assert!(p.validate().is_ok());
        let mut bad = p;
        bad.z_print = 0.1;
        assert!(bad.validate().is_err());
        bad = p;
        bad.extrusion_factor = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn uniform_layout_partitions_width() {
        let angles = vec![MicrostructureAngle::from_degrees(10.0); 17];
        let layout = TagLayout::uniform(CARD_WIDTH, CARD_HEIGHT, &angles);
        layout.validate(0.4).unwrap();
        assert_eq!(layout.regions.len(), 17);
        assert_eq!(layout.regions[16].u1, CARD_WIDTH);
        assert_eq!(layout.boundaries().len(), 16);
        assert_eq!(layout.region_at(0.0), Some(0));
        assert_eq!(layout.region_at(CARD_WIDTH), Some(16));
        assert_eq!(layout.region_at(layout.regions[3].u0), Some(3));
        assert_eq!(layout.region_at(-1.0), None);
    }

    #[test]
    fn layout_validation() {
        let a = MicrostructureAngle::from_degrees(0.0);
        let mut layout = TagLayout::uniform(10.0, 5.0, &[a, a]);
        assert!(layout.validate(0.4).is_ok());
        assert!(layout.validate(3.0).is_err());
        layout.regions[1].u0 = 5.5;
        assert!(layout.validate(0.4).is_err());
        assert!(TagLayout::uniform(10.0, 5.0, &[]).validate(0.4).is_err());
    }

    #[test]
    fn hash_tracks_contents() {
        let a = MicrostructureAngle::from_degrees(30.0);
        let l1 = TagLayout::uniform(10.0, 5.0, &[a, a]);
        let l2 = TagLayout::uniform(10.0, 5.0, &[a, MicrostructureAngle::from_degrees(31.0)]);
        assert_eq!(l1.content_hash(), l1.clone().content_hash());
        assert_ne!(l1.content_hash(), l2.content_hash());
        assert_ne!(l1.content_hash(), l1.clone().with_origin(1.0, 0.0).content_hash());
    }
}
