//! Nonlinear angle remapping.
//!
//! Uniformly spaced microstructure angles cross the detection circle at
//! very unevenly spaced polar angles. The map `M` scans `psi(delta)`,
//! checks that it is strictly monotone, and inverts it so that evenly
//! spaced symbol values land at evenly spaced crossings.
//!
//! Cache layout (`ATMAP1`), all numbers little-endian:
//!
//! ```text
//! b"ATMAP1"
//! f64 alpha, f64 plane_distance      (first header pair)
//! f64 circle_radius, f64 sensors     (second header pair)
//! u64 knot count
//! count x (f64 delta, f64 psi)
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::interp::MonotoneCubic;
use super::{CodecError, Result};
use crate::geometry::{circle_intersection_angle, DetectionGeometry, MicrostructureAngle};

pub const MAP_MAGIC: &[u8; 6] = b"ATMAP1";

/// Knots in the `psi(delta)` scan.
pub const TABLE_SIZE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearMap {
    geometry: DetectionGeometry,
    /// `(delta, psi)` knots with `psi` unwrapped to be continuous.
    table: Vec<(f64, f64)>,
    interpolant: MonotoneCubic,
    orientation: Orientation,
}

/// Scan grid: `TABLE_SIZE` axis angles strictly inside `(0, pi)`.
pub fn scan_grid() -> impl Iterator<Item = f64> {
    (0..TABLE_SIZE).map(|j| PI * (j + 1) as f64 / (TABLE_SIZE + 1) as f64)
}

fn unwrap_angles(raw: &mut [f64]) {
    for k in 1..raw.len() {
        let mut step = raw[k] - raw[k - 1];
        while step > PI {
            raw[k] -= 2.0 * PI;
            step -= 2.0 * PI;
        }
        while step < -PI {
            raw[k] += 2.0 * PI;
            step += 2.0 * PI;
        }
    }
}

impl NonlinearMap {
    /// Scans the crossing angle over [`scan_grid`] and builds the map.
    pub fn build(geom: &DetectionGeometry) -> Result<Self> {
        let deltas: Vec<f64> = scan_grid().collect();
        let mut psis = deltas
            .iter()
            .map(|&d| circle_intersection_angle(geom, &MicrostructureAngle::from_delta(d)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        unwrap_angles(&mut psis);
        Self::from_table(*geom, deltas.into_iter().zip(psis).collect())
    }

    /// Rebuilds a map from precomputed knots, re-checking monotonicity.
    pub fn from_table(geometry: DetectionGeometry, table: Vec<(f64, f64)>) -> Result<Self> {
        if table.len() < 2 {
            return Err(CodecError::CacheFormat(format!("need at least 2 knots, got {}", table.len())));
        }
        let increasing = table[1].1 > table[0].1;
        for (k, w) in table.windows(2).enumerate() {
            let ok = if increasing { w[1].1 > w[0].1 } else { w[1].1 < w[0].1 };
            if !ok || w[1].0 <= w[0].0 {
                return Err(CodecError::NonMonotone {
                    index: k + 1,
                    delta: w[1].0,
                });
            }
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = table.iter().copied().unzip();
        let interpolant = MonotoneCubic::new(xs, ys).ok_or(CodecError::NonMonotone {
            index: 0,
            delta: table[0].0,
        })?;
        Ok(Self {
            geometry,
            table,
            interpolant,
            orientation: if increasing {
                Orientation::Increasing
            } else {
                Orientation::Decreasing
            },
        })
    }

    pub fn geometry(&self) -> &DetectionGeometry {
        &self.geometry
    }

    pub fn table(&self) -> &[(f64, f64)] {
        &self.table
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Observed crossing-angle span `(psi_min, psi_max)`.
    pub fn psi_span(&self) -> (f64, f64) {
        self.interpolant.range()
    }

    /// Interpolated crossing angle `g(delta)`.
    pub fn psi(&self, delta: f64) -> f64 {
        self.interpolant.eval(delta)
    }

    /// `M(u) = g^-1(psi_min + u / pi * (psi_max - psi_min))` for `u` in
    /// `[0, pi]` (radians).
    pub fn map(&self, u: f64) -> f64 {
        let (lo, hi) = self.psi_span();
        self.interpolant.inverse(lo + u / PI * (hi - lo))
    }

    /// Inverse of [`map`](Self::map).
    pub fn unmap(&self, delta: f64) -> f64 {
        let (lo, hi) = self.psi_span();
        (self.psi(delta) - lo) / (hi - lo) * PI
    }

    /// Axis angle carrying symbol `value` out of `2^bits`.
    pub fn state_angle(&self, value: u32, bits: u32) -> MicrostructureAngle {
        let states = (1u64 << bits) as f64;
        MicrostructureAngle::from_delta(self.map(value as f64 / states * PI))
    }

    /// Nearest symbol for an axis angle, wrapping `2^bits` to 0.
    pub fn state_for_angle(&self, delta: f64, bits: u32) -> u32 {
        let states = 1u64 << bits;
        let (dlo, dhi) = self.interpolant.domain();
        let d = delta.rem_euclid(PI);
        // Angles outside the scanned interval sit next to psi's end points.
        let u = if d < dlo || d > dhi {
            let to_lo = (d - dlo).abs().min(PI - (d - dlo).abs());
            let to_hi = (d - dhi).abs().min(PI - (d - dhi).abs());
            self.unmap(if to_lo < to_hi { dlo } else { dhi })
        } else {
            self.unmap(d)
        };
        ((u / PI * states as f64).round() as u64 % states) as u32
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 8 * 5 + 16 * self.table.len());
        out.extend_from_slice(MAP_MAGIC);
        for v in [
            self.geometry.alpha,
            self.geometry.plane_distance,
            self.geometry.circle_radius,
            self.geometry.sensor_count as f64,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.table.len() as u64).to_le_bytes());
        for &(d, p) in &self.table {
            out.extend_from_slice(&d.to_le_bytes());
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| CodecError::CacheFormat(msg.to_string());
        if bytes.len() < 6 || &bytes[..6] != MAP_MAGIC {
            return Err(bad("missing ATMAP1 magic"));
        }
        let mut words = bytes[6..].chunks_exact(8);
        let mut next = || -> Result<[u8; 8]> {
            words
                .next()
                .map(|c| c.try_into().expect("chunk of 8"))
                .ok_or_else(|| bad("truncated map cache"))
        };
        let alpha = f64::from_le_bytes(next()?);
        let plane_distance = f64::from_le_bytes(next()?);
        let circle_radius = f64::from_le_bytes(next()?);
        let sensors = f64::from_le_bytes(next()?);
        let count = u64::from_le_bytes(next()?) as usize;
        if bytes.len() != 6 + 8 * 5 + 16 * count {
            return Err(bad("map cache length does not match knot count"));
        }
        if !(sensors >= 2.0 && sensors.fract() == 0.0) {
            return Err(bad("sensor count is not a whole number"));
        }
        let geometry = DetectionGeometry::new(alpha, plane_distance, circle_radius, sensors as usize)?;
        let mut table = Vec::with_capacity(count);
        for _ in 0..count {
            let d = f64::from_le_bytes(next()?);
            let p = f64::from_le_bytes(next()?);
            table.push((d, p));
        }
        Self::from_table(geometry, table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|source| CodecError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|source| CodecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Short content hash of the cache bytes, used to tag generated files.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        hex::encode(&digest[..8])
    }
}
