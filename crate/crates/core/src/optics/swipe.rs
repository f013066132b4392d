//! Swipe simulation and reference frames.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    angle_response, frame_from_illumination, BeamProfile, OpticsError, PhotoresistorModel, Result, SensorFrame,
    SensorRing, DEFAULT_SENSOR_SIGMA,
};
use crate::codec::NonlinearMap;
use crate::gcode::TagLayout;
use crate::geometry::{DetectionGeometry, MicrostructureAngle};

/// Rig and simulation parameters shared by every swipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigSettings {
    pub geometry: DetectionGeometry,
    pub sensor_sigma: f64,
    pub beam: BeamProfile,
    pub model: PhotoresistorModel,
    /// Beam travel per frame, millimeters.
    pub step: f64,
    /// Standard deviation of additive ADC noise, counts.
    pub noise_sigma: f64,
    /// Constant ADC offset from background light, counts.
    pub ambient: f64,
    /// Width of the diffuse zone centred on each interior boundary, mm.
    pub borderline_width: f64,
    /// Illumination scale of the diffuse lobe under full beam overlap.
    pub diffuse_level: f64,
    pub seed: u64,
}

/// Default diffuse lobe scale. Borders between identical states need at
/// least about 1.18 to dip below the default threshold; above about 1.26
/// region interiors at the default card layout stop being valid.
pub const DEFAULT_DIFFUSE_LEVEL: f64 = 1.22;

impl Default for RigSettings {
    fn default() -> Self {
        Self {
            geometry: DetectionGeometry::default(),
            sensor_sigma: DEFAULT_SENSOR_SIGMA,
            beam: BeamProfile::default(),
            model: PhotoresistorModel::default(),
            step: 0.5,
            noise_sigma: 8.0,
            ambient: 16.0,
            borderline_width: 1.0,
            diffuse_level: DEFAULT_DIFFUSE_LEVEL,
            seed: 0,
        }
    }
}

impl RigSettings {
    pub fn ring(&self) -> SensorRing {
        SensorRing::new(self.geometry, self.sensor_sigma)
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_sigma = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.ring().validate()?;
        let checks = [
            ("beam diameter", self.beam.diameter, self.beam.diameter > 0.0),
            ("swipe step", self.step, self.step > 0.0),
            ("noise sigma", self.noise_sigma, self.noise_sigma >= 0.0),
            ("borderline width", self.borderline_width, self.borderline_width >= 0.0),
            ("diffuse level", self.diffuse_level, self.diffuse_level >= 0.0),
            ("dark resistance", self.model.r_dark, self.model.r_dark > 0.0),
            ("fixed resistance", self.model.r_fixed, self.model.r_fixed > 0.0),
            ("kappa", self.model.kappa, self.model.kappa >= 0.0),
            ("supply voltage", self.model.v_supply, self.model.v_supply > 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(OpticsError::InvalidScenario(format!("{name} out of range: {value}")));
            }
        }
        if !self.ambient.is_finite() {
            return Err(OpticsError::InvalidScenario("ambient level must be finite".into()));
        }
        Ok(())
    }
}

/// A tag under a rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwipeScenario {
    pub layout: TagLayout,
    pub rig: RigSettings,
}

impl SwipeScenario {
    pub fn new(layout: TagLayout, rig: RigSettings) -> Self {
        Self { layout, rig }
    }
}

/// Ring responses per axis angle, computed once per distinct angle.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    ring: SensorRing,
    responses: HashMap<u64, Vec<f64>>,
}

impl ResponseCache {
    pub fn new(ring: SensorRing) -> Self {
        Self {
            ring,
            responses: HashMap::new(),
        }
    }

    pub fn ring(&self) -> &SensorRing {
        &self.ring
    }

    pub fn response(&mut self, angle: &MicrostructureAngle) -> Result<&[f64]> {
        let key = angle.delta().to_bits();
        if !self.responses.contains_key(&key) {
            let r = angle_response(angle, &self.ring)?;
            self.responses.insert(key, r);
        }
        Ok(&self.responses[&key])
    }
}

/// Share of a uniform disk (center `x0`, radius `radius`) lying at `x < c`.
fn disk_fraction_below(x0: f64, radius: f64, c: f64) -> f64 {
    let t = ((c - x0) / radius).clamp(-1.0, 1.0);
    (t.asin() + t * (1.0 - t * t).sqrt() + std::f64::consts::FRAC_PI_2) / std::f64::consts::PI
}

fn strip_fraction(x0: f64, radius: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    (disk_fraction_below(x0, radius, b) - disk_fraction_below(x0, radius, a)).max(0.0)
}

/// Beam area shares over the clean part of every region and over all
/// borderline zones. The remainder lies outside the tag.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamFractions {
    pub regions: Vec<f64>,
    pub border: f64,
}

pub fn beam_fractions(layout: &TagLayout, beam: &BeamProfile, borderline_width: f64, center: f64) -> BeamFractions {
    let radius = beam.diameter / 2.0;
    let half = borderline_width / 2.0;
    let n = layout.regions.len();
    let regions = layout
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let a = if i > 0 { r.u0 + half } else { r.u0 };
            let b = if i + 1 < n { r.u1 - half } else { r.u1 };
            strip_fraction(center, radius, a, b)
        })
        .collect();
    let border = layout
        .boundaries()
        .iter()
        .map(|&b| strip_fraction(center, radius, (b - half).max(0.0), (b + half).min(layout.width)))
        .sum();
    BeamFractions { regions, border }
}

/// Beam centers `k * step` for `k = 0 ..= floor(width / step)`.
pub fn swipe_positions(width: f64, step: f64) -> Vec<f64> {
    let count = (width / step + 1e-9).floor() as usize;
    (0..=count).map(|k| k as f64 * step).collect()
}

/// Diffuse scattering from the tag center as seen by each sensor: a
/// Lambertian emitter in the tag plane lighting the background plane
/// gives irradiance proportional to `d * v / R^4`. Normalised to mean 1.
pub fn diffuse_lobe(ring: &SensorRing) -> Vec<f64> {
    let d = ring.geometry.plane_distance;
    let raw: Vec<f64> = ring
        .positions()
        .iter()
        .map(|p| {
            let r2 = p.u * p.u + d * d + p.v * p.v;
            (d * p.v.max(0.0)) / (r2 * r2)
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|x| x / mean).collect()
}

/// Illumination of every sensor with the beam centred at `center`.
pub fn frame_illumination(scenario: &SwipeScenario, cache: &mut ResponseCache, center: f64) -> Result<Vec<f64>> {
    let rig = &scenario.rig;
    let fr = beam_fractions(&scenario.layout, &rig.beam, rig.borderline_width, center);
    let count = rig.geometry.sensor_count;
    let mut illum = vec![0.0; count];
    for (region, &f) in scenario.layout.regions.iter().zip(&fr.regions) {
        if f > 0.0 {
            let resp = cache.response(&region.angle)?;
            for (acc, r) in illum.iter_mut().zip(resp) {
                *acc += f * r;
            }
        }
    }
    if fr.border > 0.0 && rig.diffuse_level > 0.0 {
        for (acc, l) in illum.iter_mut().zip(diffuse_lobe(cache.ring())) {
            *acc += fr.border * rig.diffuse_level * l;
        }
    }
    Ok(illum)
}

fn check_cache(rig: &RigSettings, cache: &ResponseCache) -> Result<()> {
    if *cache.ring() != rig.ring() {
        return Err(OpticsError::InvalidScenario("response cache was built for a different ring".into()));
    }
    Ok(())
}

/// Frames for a beam stepped across the tag width, reusing `cache`.
pub fn simulate_swipe_with(scenario: &SwipeScenario, cache: &mut ResponseCache) -> Result<Vec<SensorFrame>> {
    let rig = &scenario.rig;
    rig.validate()?;
    check_cache(rig, cache)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rig.seed);
    swipe_positions(scenario.layout.width, rig.step)
        .into_iter()
        .enumerate()
        .map(|(index, x)| {
            let illum = frame_illumination(scenario, cache, x)?;
            Ok(frame_from_illumination(
                &illum,
                &rig.model,
                rig.ambient,
                rig.noise_sigma,
                &mut rng,
                index,
            ))
        })
        .collect()
}

pub fn simulate_swipe(scenario: &SwipeScenario) -> Result<Vec<SensorFrame>> {
    let mut cache = ResponseCache::new(scenario.rig.ring());
    simulate_swipe_with(scenario, &mut cache)
}

/// Noiseless ambient frame and one frame per mapped state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub ambient: SensorFrame,
    pub states: Vec<SensorFrame>,
}

pub fn reference_frames(
    rig: &RigSettings,
    map: &NonlinearMap,
    bits: u32,
    cache: &mut ResponseCache,
) -> Result<References> {
    rig.validate()?;
    check_cache(rig, cache)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let count = rig.geometry.sensor_count;
    let ambient = frame_from_illumination(&vec![0.0; count], &rig.model, rig.ambient, 0.0, &mut rng, 0);
    let states = (0..1u32 << bits)
        .map(|k| {
            let resp = cache.response(&map.state_angle(k, bits))?.to_vec();
            Ok(frame_from_illumination(&resp, &rig.model, rig.ambient, 0.0, &mut rng, k as usize))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(References { ambient, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::{CARD_HEIGHT, CARD_WIDTH};

    #[test]
    fn disk_fractions() {
        assert!((disk_fraction_below(0.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(disk_fraction_below(0.0, 1.0, -2.0), 0.0);
        assert_eq!(disk_fraction_below(0.0, 1.0, 2.0), 1.0);
        // Numerical area of the cap x > 0.5 of the unit disk.
        let n = 200_000;
        let cap: f64 = (0..n)
            .map(|k| {
                let x = 0.5 + 0.5 * (k as f64 + 0.5) / n as f64;
                2.0 * (1.0 - x * x).sqrt() * 0.5 / n as f64
            })
            .sum();
        let expect = 1.0 - disk_fraction_below(0.0, 1.0, 0.5);
        assert!((cap / std::f64::consts::PI - expect).abs() < 1e-8);
    }

    #[test]
    fn fractions_sum_to_the_on_tag_share() {
        let layout = TagLayout::uniform(CARD_WIDTH, CARD_HEIGHT, &[MicrostructureAngle::from_degrees(10.0); 17]);
        let beam = BeamProfile::default();
        for x in swipe_positions(CARD_WIDTH, 0.37) {
            let fr = beam_fractions(&layout, &beam, 1.0, x);
            let total: f64 = fr.regions.iter().sum::<f64>() + fr.border;
            let on_tag = strip_fraction(x, 2.5, 0.0, CARD_WIDTH);
            assert!((total - on_tag).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn narrow_regions_always_leak() {
        let n = 22;
        let width = 4.0 * n as f64;
        let layout = TagLayout::uniform(width, CARD_HEIGHT, &[MicrostructureAngle::from_degrees(10.0); 22]);
        // Frames with the whole beam on the tag.
        for x in swipe_positions(width, 0.5).into_iter().filter(|&x| x >= 2.5 && x <= width - 2.5) {
            let fr = beam_fractions(&layout, &BeamProfile::default(), 0.0, x);
            let max = fr.regions.iter().copied().fold(0.0, f64::max);
            let total: f64 = fr.regions.iter().sum();
            assert!(total - max > 0.0, "x={x}");
        }
    }

    #[test]
    fn frame_counts() {
        assert_eq!(swipe_positions(85.6, 0.5).len(), 172);
        assert_eq!(swipe_positions(85.6, 0.25).len(), 343);
        assert_eq!(swipe_positions(1.0, 0.5), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn lobe_is_normalised() {
        let lobe = diffuse_lobe(&SensorRing::default());
        assert!((lobe.iter().sum::<f64>() / 16.0 - 1.0).abs() < 1e-12);
        assert!(lobe.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn noiseless_seed_independence() {
        let layout = TagLayout::uniform(20.0, 10.0, &[MicrostructureAngle::from_degrees(40.0); 4]);
        let rig = RigSettings::default().noiseless();
        let a = simulate_swipe(&SwipeScenario::new(layout.clone(), rig)).unwrap();
        let b = simulate_swipe(&SwipeScenario::new(layout.clone(), RigSettings { seed: 99, ..rig })).unwrap();
        assert_eq!(a, b);
        let noisy = RigSettings::default();
        let c = simulate_swipe(&SwipeScenario::new(layout.clone(), noisy)).unwrap();
        let d = simulate_swipe(&SwipeScenario::new(layout.clone(), noisy)).unwrap();
        let e = simulate_swipe(&SwipeScenario::new(layout, RigSettings { seed: 5, ..noisy })).unwrap();
        assert_eq!(c, d);
        assert_ne!(c, e);
    }

    #[test]
    fn cache_must_match_ring() {
        let layout = TagLayout::uniform(20.0, 10.0, &[MicrostructureAngle::from_degrees(40.0); 4]);
        let scenario = SwipeScenario::new(layout, RigSettings::default());
        let mut other = ResponseCache::new(SensorRing::new(DetectionGeometry::default(), 1.0));
        assert!(simulate_swipe_with(&scenario, &mut other).is_err());
    }
}
