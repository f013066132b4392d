//! Software twin of a reflection-anisotropy tag for FDM-printed surfaces.
//!
//! Data is stored as the in-plane angle of smooth half-cylinder infill
//! lines. Under a collimated beam each angle reflects a distinct conic
//! pattern onto a background plane, which a ring of photoresistors samples.
//!
//! The crate is organised along the pipeline:
//!
//! 1. [`geometry`] – reflection law, cone angle, fixed point, conic
//!    parameters and detection-circle crossings.
//! 2. [`codec`] – Gray coding and the nonlinear angle map that spaces the
//!    states uniformly on the detection circle.
//! 3. [`gcode`] – infill generation, extrusion math, G-code emission,
//!    parsing and angle recovery from toolpaths.
//! 4. [`optics`] – virtual swipe: beam overlap, sensor ring response,
//!    voltage divider and 12-bit quantisation, trace files.
//! 5. [`detector`] – correlation similarity, thresholding, borderline
//!    segmentation and accuracy metrics.

pub mod codec;
pub mod detector;
pub mod gcode;
pub mod geometry;
pub mod optics;

pub use codec::{AngleCode, CodecConfig, NonlinearMap};
pub use detector::{DetectionReport, DetectorConfig, ReferenceSet};
pub use gcode::{GcodeProgram, PrinterProfile, TagLayout};
pub use geometry::{DetectionGeometry, MicrostructureAngle, Point2};
pub use optics::{SensorFrame, SwipeScenario};
