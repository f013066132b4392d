//! Virtual detection rig.
//!
//! A uniform disk beam is swiped across the tag. Every region under the
//! beam contributes its reflected pattern in proportion to the overlapped
//! beam area, borderline zones contribute a diffuse lobe, and a ring of
//! photoresistors on the detection circle turns the resulting illumination
//! into 12-bit divider readings.

mod io;
mod swipe;

pub use io::{format_references, format_trace, parse_references, parse_trace, read_trace, write_trace};
pub use swipe::{
    beam_fractions, diffuse_lobe, frame_illumination, reference_frames, simulate_swipe, simulate_swipe_with,
    swipe_positions, BeamFractions, References, ResponseCache, RigSettings, SwipeScenario, DEFAULT_DIFFUSE_LEVEL,
};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{sample_pattern, DetectionGeometry, GeometryError, IlluminationPattern, MicrostructureAngle, Point2};

pub const ADC_MAX: u16 = 4095;

/// Pattern samples traced per state when computing sensor responses.
pub const RESPONSE_SAMPLES: usize = 4096;

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, OpticsError>;

/// Collimated beam with a uniform circular footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamProfile {
    /// Millimeters.
    pub diameter: f64,
}

impl Default for BeamProfile {
    fn default() -> Self {
        Self { diameter: 5.0 }
    }
}

/// Photoresistors evenly spaced on the detection circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRing {
    pub geometry: DetectionGeometry,
    /// Spatial spread of each sensor's Gaussian response, millimeters.
    pub sigma: f64,
}

/// Default sensor spread, millimeters.
pub const DEFAULT_SENSOR_SIGMA: f64 = 2.0;

impl Default for SensorRing {
    fn default() -> Self {
        Self {
            geometry: DetectionGeometry::default(),
            sigma: DEFAULT_SENSOR_SIGMA,
        }
    }
}

impl SensorRing {
    pub fn new(geometry: DetectionGeometry, sigma: f64) -> Self {
        Self { geometry, sigma }
    }

    pub fn len(&self) -> usize {
        self.geometry.sensor_count
    }

    pub fn is_empty(&self) -> bool {
        self.geometry.sensor_count == 0
    }

    /// Spacing between neighbouring sensors along the circle.
    pub fn spacing(&self) -> f64 {
        2.0 * self.geometry.circle_radius * (std::f64::consts::PI / self.len() as f64).sin()
    }

    /// Sensor `k` sits at polar angle `2 pi k / count` around the fixed point.
    pub fn positions(&self) -> Vec<Point2> {
        let fp = self.geometry.fixed_point();
        let r = self.geometry.circle_radius;
        let count = self.len();
        (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                Point2::new(fp.u + r * a.cos(), fp.v + r * a.sin())
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(OpticsError::InvalidScenario(format!("sensor sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

fn distance_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let (abx, aby) = (b.u - a.u, b.v - a.v);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        (((p.u - a.u) * abx + (p.v - a.v) * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a.u + t * abx - p.u).hypot(a.v + t * aby - p.v)
}

/// Distance from `p` to the polyline through the pattern samples.
pub fn distance_to_pattern(p: Point2, pattern: &IlluminationPattern) -> f64 {
    let pts: Vec<Point2> = pattern.points().collect();
    match pts.len() {
        0 => f64::INFINITY,
        1 => p.distance(pts[0]),
        _ => pts
            .windows(2)
            .map(|w| distance_to_segment(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Relative illumination `exp(-dist^2 / 2 sigma^2)` of every sensor, where
/// `dist` is the distance from the sensor center to the sampled curve.
pub fn sensor_response(pattern: &IlluminationPattern, ring: &SensorRing) -> Vec<f64> {
    let two_s2 = 2.0 * ring.sigma * ring.sigma;
    ring.positions()
        .into_iter()
        .map(|p| {
            let d = distance_to_pattern(p, pattern);
            (-d * d / two_s2).exp()
        })
        .collect()
}

/// Traces the pattern of `angle` and evaluates the ring response.
pub fn angle_response(angle: &MicrostructureAngle, ring: &SensorRing) -> Result<Vec<f64>> {
    let pattern = sample_pattern(&ring.geometry, angle, RESPONSE_SAMPLES)?;
    Ok(sensor_response(&pattern, ring))
}

/// Photoresistor in a divider with a fixed resistor, read by a 12-bit ADC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotoresistorModel {
    /// Resistance at zero illumination, ohms.
    pub r_dark: f64,
    /// Conductance gain per unit relative illumination.
    pub kappa: f64,
    /// Fixed divider resistor, ohms.
    pub r_fixed: f64,
    /// Supply and ADC reference voltage.
    pub v_supply: f64,
}

impl Default for PhotoresistorModel {
    fn default() -> Self {
        Self {
            r_dark: 100e3,
            kappa: 99.0,
            r_fixed: 1e3,
            v_supply: 3.3,
        }
    }
}

impl PhotoresistorModel {
    pub fn resistance(&self, illumination: f64) -> f64 {
        self.r_dark / (1.0 + self.kappa * illumination)
    }

    pub fn voltage(&self, illumination: f64) -> f64 {
        self.v_supply * self.r_fixed / (self.r_fixed + self.resistance(illumination))
    }

    /// Noiseless ADC count before ambient offset.
    pub fn counts(&self, illumination: f64) -> f64 {
        (self.voltage(illumination) / self.v_supply * ADC_MAX as f64).round()
    }
}

/// One quantised snapshot of the sensor ring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub index: usize,
    pub values: Vec<u16>,
}

impl SensorFrame {
    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Converts per-sensor illumination to ADC counts: divider reading, plus
/// the ambient offset, plus Gaussian noise with `noise_sigma` counts, then
/// rounded and clamped to 12 bits. No random numbers are drawn when
/// `noise_sigma` is zero.
pub fn frame_from_illumination<R: Rng>(
    illumination: &[f64],
    model: &PhotoresistorModel,
    ambient: f64,
    noise_sigma: f64,
    rng: &mut R,
    index: usize,
) -> SensorFrame {
    let noise = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("sigma is positive"));
    let values = illumination
        .iter()
        .map(|&l| {
            let mut c = model.counts(l.max(0.0)) + ambient;
            if let Some(n) = &noise {
                c += n.sample(rng);
            }
            c.round().clamp(0.0, ADC_MAX as f64) as u16
        })
        .collect();
    SensorFrame { index, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::codec::NonlinearMap;
    use crate::geometry::circle_intersections;

    #[test]
    fn ring_positions_are_uniform() {
        let ring = SensorRing::default();
        let pos = ring.positions();
        let fp = ring.geometry.fixed_point();
        assert_eq!(pos.len(), 16);
        assert!((pos[0].u - 15.0).abs() < 1e-12 && (pos[0].v - fp.v).abs() < 1e-12);
        for w in pos.windows(2) {
            assert!((w[0].distance(w[1]) - ring.spacing()).abs() < 1e-9);
        }
    }

    #[test]
    fn divider_constants() {
        let m = PhotoresistorModel::default();
        assert!((m.voltage(1.0) - 1.65).abs() < 1e-12);
        assert_eq!(m.counts(1.0), 2048.0);
        assert_eq!(m.counts(0.0), 41.0);
        let mut last = m.counts(0.0);
        for k in 1..=100 {
            let c = m.counts(k as f64 / 100.0);
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn dark_frame_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = frame_from_illumination(&[0.0; 16], &PhotoresistorModel::default(), 0.0, 0.0, &mut rng, 0);
        assert!(f.values.iter().all(|&v| v == f.values[0]));
        let mut lit = [0.0; 16];
        lit[5] = 1.0;
        let g = frame_from_illumination(&lit, &PhotoresistorModel::default(), 0.0, 0.0, &mut rng, 1);
        let max = *g.values.iter().max().unwrap();
        assert_eq!(g.values.iter().filter(|&&v| v == max).count(), 1);
        assert_eq!(g.values[5], max);
    }

    #[test]
    fn clamping() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = frame_from_illumination(&[1e9, 0.0], &PhotoresistorModel::default(), 5000.0, 0.0, &mut rng, 0);
        assert_eq!(f.values, vec![4095, 4095]);
        let g = frame_from_illumination(&[0.0], &PhotoresistorModel::default(), -500.0, 0.0, &mut rng, 0);
        assert_eq!(g.values, vec![0]);
    }

    #[test]
    fn far_degenerate_pattern_is_dark() {
        let geom = DetectionGeometry::default();
        let pattern = sample_pattern(&geom, &MicrostructureAngle::from_delta(0.0), 1024).unwrap();
        assert!(pattern.is_degenerate());
        // Sensors moved 200 mm away from the line u = 0.
        let ring = SensorRing::new(geom, 2.0);
        for p in ring.positions().iter().map(|p| Point2::new(p.u + 200.0, p.v)) {
            let d = distance_to_pattern(p, &pattern);
            assert!((-d * d / 8.0).exp() < 1e-6);
        }
    }

    #[test]
    fn narrow_kernel_lights_the_crossing_sensors() {
        let geom = DetectionGeometry::default();
        let map = NonlinearMap::build(&geom).unwrap();
        let ring = SensorRing::new(geom, SensorRing::default().spacing() / 4.0);
        let pos = ring.positions();
        for k in 0..8 {
            let angle = map.state_angle(k, 3);
            let resp = angle_response(&angle, &ring).unwrap();
            let (p1, p2) = circle_intersections(&geom, &angle).unwrap();
            let nearest = |p: Point2| {
                (0..pos.len())
                    .min_by(|&a, &b| pos[a].distance(p).total_cmp(&pos[b].distance(p)))
                    .unwrap()
            };
            let (n1, n2) = (nearest(p1), nearest(p2));
            assert_ne!(n1, n2);
            let lit: Vec<usize> = (0..pos.len()).filter(|&i| resp[i] > 0.5).collect();
            for i in &lit {
                assert!(*i == n1 || *i == n2, "state {k}: lit {lit:?}, expected {n1} {n2}");
            }
            let top = (0..pos.len()).max_by(|&a, &b| resp[a].total_cmp(&resp[b])).unwrap();
            assert!(top == n1 || top == n2, "state {k}: {resp:?}");
        }
    }

    #[test]
    fn wider_kernel_never_dims() {
        let geom = DetectionGeometry::default();
        let angle = MicrostructureAngle::from_degrees(63.0);
        let narrow = angle_response(&angle, &SensorRing::new(geom, 2.0)).unwrap();
        let wide = angle_response(&angle, &SensorRing::new(geom, 4.0)).unwrap();
        for (a, b) in narrow.iter().zip(&wide) {
            assert!(b >= a);
        }
    }
}
