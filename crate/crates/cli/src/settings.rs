//! Run settings from flags, optionally overridden by a JSON config file.

use std::fs;
use std::path::Path;

use anisotag_core::codec::CodecConfig;
use anisotag_core::detector::DetectorConfig;
use anisotag_core::gcode::{PrinterProfile, CARD_HEIGHT, CARD_WIDTH};
use anisotag_core::geometry::DetectionGeometry;
use anisotag_core::optics::{RigSettings, DEFAULT_DIFFUSE_LEVEL, DEFAULT_SENSOR_SIGMA};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// Everything a command needs besides its file paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub rig: RigSettings,
    pub codec: CodecConfig,
    pub threshold: f64,
    pub debounce_frames: usize,
    pub tag_width: f64,
    pub tag_height: f64,
    pub profile: PrinterProfile,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            rig: RigSettings::default(),
            codec: CodecConfig::default(),
            threshold: DetectorConfig::default().threshold,
            debounce_frames: DetectorConfig::default().debounce_frames,
            tag_width: CARD_WIDTH,
            tag_height: CARD_HEIGHT,
            profile: PrinterProfile::default(),
        }
    }
}

impl Settings {
    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            threshold: self.threshold,
            debounce_frames: self.debounce_frames,
            ..DetectorConfig::for_codec(&self.codec)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rig.validate()?;
        self.detector().validate()?;
        self.profile.validate()?;
        if !(self.tag_width > 0.0 && self.tag_height > 0.0) {
            return Err(HarnessError::Usage(format!(
                "tag size must be positive, got {} x {}",
                self.tag_width, self.tag_height
            )));
        }
        Ok(())
    }

    /// Applies every key present in `file`.
    pub fn apply(mut self, file: &ConfigFile) -> Self {
        let g = &mut self.rig.geometry;
        macro_rules! set {
            ($target:expr, $field:ident) => {
                if let Some(v) = file.$field {
                    $target = v;
                }
            };
        }
        if let Some(a) = file.alpha_deg {
            g.alpha = a.to_radians();
        }
        set!(g.plane_distance, plane_distance);
        set!(g.circle_radius, circle_radius);
        set!(g.sensor_count, sensor_count);
        set!(self.rig.sensor_sigma, sensor_sigma);
        set!(self.rig.beam.diameter, beam_diameter);
        set!(self.rig.step, step);
        set!(self.rig.noise_sigma, noise_sigma);
        set!(self.rig.ambient, ambient);
        set!(self.rig.borderline_width, borderline_width);
        set!(self.rig.diffuse_level, diffuse_level);
        set!(self.rig.seed, seed);
        set!(self.threshold, threshold);
        set!(self.debounce_frames, debounce_frames);
        set!(self.codec.n_regions, n_regions);
        set!(self.codec.bits_per_region, bits_per_region);
        set!(self.codec.use_gray, use_gray);
        set!(self.tag_width, tag_width);
        set!(self.tag_height, tag_height);
        if let Some(h) = file.layer_height {
            let z_offset = self.profile.z_print - self.profile.layer_height;
            self.profile.layer_height = h;
            self.profile.z_print = h + z_offset;
        }
        set!(self.profile.z_print, z_print);
        set!(self.profile.linewidth, linewidth);
        set!(self.profile.filament_diameter, filament_diameter);
        set!(self.profile.feed_rate, feed_rate);
        set!(self.profile.extrusion_factor, extrusion_factor);
        self
    }

    /// Stable digest of the settings, for tagging output rows.
    pub fn digest(&self) -> String {
        crate::short_hash(&serde_json::to_vec(self).expect("settings serialize"))
    }
}

/// Config file keys; every key is optional and overrides the flag value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha_deg: Option<f64>,
    pub plane_distance: Option<f64>,
    pub circle_radius: Option<f64>,
    pub sensor_count: Option<usize>,
    pub sensor_sigma: Option<f64>,
    pub beam_diameter: Option<f64>,
    pub step: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub ambient: Option<f64>,
    pub borderline_width: Option<f64>,
    pub diffuse_level: Option<f64>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub debounce_frames: Option<usize>,
    pub n_regions: Option<usize>,
    pub bits_per_region: Option<u32>,
    pub use_gray: Option<bool>,
    pub tag_width: Option<f64>,
    pub tag_height: Option<f64>,
    pub layer_height: Option<f64>,
    pub z_print: Option<f64>,
    pub linewidth: Option<f64>,
    pub filament_diameter: Option<f64>,
    pub feed_rate: Option<f64>,
    pub extrusion_factor: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON file whose keys override the flags below.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Incident angle of the beam, degrees.
    #[arg(long, global = true, default_value_t = 70.0)]
    pub alpha_deg: f64,
    /// Distance from the tag to the background plane, mm.
    #[arg(long, global = true, default_value_t = 65.0)]
    pub plane_distance: f64,
    /// Radius of the sensor circle, mm.
    #[arg(long, global = true, default_value_t = 15.0)]
    pub circle_radius: f64,
    #[arg(long, global = true, default_value_t = 16)]
    pub sensor_count: usize,
    /// Spatial spread of each sensor's response, mm.
    #[arg(long, global = true, default_value_t = DEFAULT_SENSOR_SIGMA)]
    pub sensor_sigma: f64,
    /// Beam spot diameter, mm.
    #[arg(long, global = true, default_value_t = 5.0)]
    pub beam_diameter: f64,
    /// Beam advance per frame, mm.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub step: f64,
    /// Gaussian ADC noise, counts.
    #[arg(long, global = true, default_value_t = 8.0)]
    pub noise_sigma: f64,
    /// Background light offset, counts.
    #[arg(long, global = true, default_value_t = 16.0)]
    pub ambient: f64,
    /// Width of the diffuse zone at each region boundary, mm.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub borderline_width: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_DIFFUSE_LEVEL)]
    pub diffuse_level: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Similarity a frame must exceed to be valid.
    #[arg(long, global = true, default_value_t = 0.9)]
    pub threshold: f64,
    /// Valid runs shorter than this many frames are dropped.
    #[arg(long, global = true, default_value_t = 3)]
    pub debounce_frames: usize,
    #[arg(long, global = true, default_value_t = 17)]
    pub n_regions: usize,
    #[arg(long, global = true, default_value_t = 3)]
    pub bits_per_region: u32,
    /// Disable Gray coding of region symbols.
    #[arg(long, global = true)]
    pub binary: bool,
    /// Tag extent across the regions, mm.
    #[arg(long, global = true, default_value_t = CARD_WIDTH)]
    pub tag_width: f64,
    /// Tag extent along the infill lines, mm.
    #[arg(long, global = true, default_value_t = CARD_HEIGHT)]
    pub tag_height: f64,
    #[arg(long, global = true, default_value_t = 0.2)]
    pub layer_height: f64,
}

impl CommonArgs {
    /// Flag values, then the config file on top, validated.
    pub fn resolve(&self) -> Result<Settings> {
        let defaults = Settings::default();
        let geometry = DetectionGeometry {
            alpha: self.alpha_deg.to_radians(),
            plane_distance: self.plane_distance,
            circle_radius: self.circle_radius,
            sensor_count: self.sensor_count,
        };
        let mut settings = Settings {
            rig: RigSettings {
                geometry,
                sensor_sigma: self.sensor_sigma,
                step: self.step,
                noise_sigma: self.noise_sigma,
                ambient: self.ambient,
                borderline_width: self.borderline_width,
                diffuse_level: self.diffuse_level,
                seed: self.seed,
                ..defaults.rig
            },
            codec: CodecConfig {
                n_regions: self.n_regions,
                bits_per_region: self.bits_per_region,
                use_gray: !self.binary,
            },
            threshold: self.threshold,
            debounce_frames: self.debounce_frames,
            tag_width: self.tag_width,
            tag_height: self.tag_height,
            profile: PrinterProfile::with_layer_height(self.layer_height),
        };
        settings.rig.beam.diameter = self.beam_diameter;
        if let Some(path) = &self.config {
            settings = settings.apply(&ConfigFile::load(path)?);
        }
        settings.validate()?;
        Ok(settings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_override_fields() {
        let file: ConfigFile = serde_json::from_str(r#"{"noise_sigma": 0, "alpha_deg": 60, "layer_height": 0.3}"#).unwrap();
        let s = Settings::default().apply(&file);
        assert_eq!(s.rig.noise_sigma, 0.0);
        assert!((s.rig.geometry.alpha - 60f64.to_radians()).abs() < 1e-15);
        assert!((s.profile.z_print - 0.4).abs() < 1e-12);
        assert_eq!(s.codec, CodecConfig::default());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn digest_tracks_every_field() {
        let a = Settings::default();
        let b = Settings { threshold: 0.91, ..a };
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), Settings::default().digest());
    }
}
