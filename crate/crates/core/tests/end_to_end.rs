use anisotag_core::codec::{encode, hamming, CodecConfig, NonlinearMap};
use anisotag_core::detector::{segment_and_decode, DetectorConfig, ReferenceSet};
use anisotag_core::gcode::{angle_estimate, emit_gcode, parse_gcode, PrinterProfile, TagLayout, CARD_HEIGHT, CARD_WIDTH};
use anisotag_core::geometry::MicrostructureAngle;
use anisotag_core::optics::{
    frame_from_illumination, reference_frames, simulate_swipe_with, ResponseCache, RigSettings, SwipeScenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Pipeline {
    map: NonlinearMap,
    rig: RigSettings,
    cache: ResponseCache,
    refs: ReferenceSet,
    cfg: CodecConfig,
}

impl Pipeline {
    fn new(rig: RigSettings, cfg: CodecConfig) -> Self {
        let map = NonlinearMap::build(&rig.geometry).unwrap();
        let mut cache = ResponseCache::new(rig.ring());
        let refs = reference_frames(&rig, &map, cfg.bits_per_region, &mut cache).unwrap();
        let refs = ReferenceSet::from_references(&refs).unwrap();
        Self { map, rig, cache, refs, cfg }
    }

    /// Payload bits, through G-code and back to the angles the simulator
    /// sees, then the detector.
    fn run(&mut self, payload: &[bool]) -> anisotag_core::detector::DetectionReport {
        let codes = encode(payload, &self.cfg, &self.map).unwrap();
        let layout = TagLayout::from_codes(CARD_WIDTH, CARD_HEIGHT, &codes);
        let program = parse_gcode(&emit_gcode(&layout, &PrinterProfile::default()).unwrap().render()).unwrap();
        let printed: Vec<_> = angle_estimate(&program, &layout)
            .unwrap()
            .into_iter()
            .map(MicrostructureAngle::from_delta)
            .collect();
        // The printed angles deviate from the encoded ones by the toolpath
        // rounding only; the simulator sees the encoded layout.
        for (p, c) in printed.iter().zip(&codes) {
            let d = (p.delta() - c.angle.delta()).abs();
            assert!(d.min(std::f64::consts::PI - d) < 0.05f64.to_radians());
        }
        let scenario = SwipeScenario::new(layout, self.rig);
        let trace = simulate_swipe_with(&scenario, &mut self.cache).unwrap();
        segment_and_decode(&trace, &self.refs, &DetectorConfig::for_codec(&self.cfg), Some(payload)).unwrap()
    }
}

#[test]
fn noiseless_default_card_roundtrips() {
    let mut pipe = Pipeline::new(RigSettings::default().noiseless(), CodecConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let payload: Vec<bool> = (0..51).map(|_| rng.random()).collect();
        let report = pipe.run(&payload);
        assert!(report.detection_success, "regions {}", report.region_states.len());
        assert_eq!(report.bits, payload);
        assert_eq!(report.ber, Some(0.0));
    }
}

#[test]
fn default_noise_card_roundtrips() {
    let mut pipe = Pipeline::new(RigSettings::default(), CodecConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for seed in 0..20 {
        pipe.rig.seed = seed;
        let payload: Vec<bool> = (0..51).map(|_| rng.random()).collect();
        let report = pipe.run(&payload);
        assert!(report.detection_success);
        assert_eq!(report.ber, Some(0.0));
    }
}

#[test]
fn blanked_region_fails_detection() {
    let mut pipe = Pipeline::new(RigSettings::default().noiseless(), CodecConfig::default());
    let payload = vec![true; 51];
    let codes = encode(&payload, &pipe.cfg, &pipe.map).unwrap();
    let layout = TagLayout::from_codes(CARD_WIDTH, CARD_HEIGHT, &codes);
    let scenario = SwipeScenario::new(layout.clone(), pipe.rig);
    let mut trace = simulate_swipe_with(&scenario, &mut pipe.cache).unwrap();
    let region = &layout.regions[8];
    let ambient = frame_from_illumination(&[0.0; 16], &pipe.rig.model, pipe.rig.ambient, 0.0, &mut ChaCha8Rng::seed_from_u64(0), 0);
    for f in trace.iter_mut() {
        let x = f.index as f64 * pipe.rig.step;
        if x >= region.u0 - 1.0 && x <= region.u1 + 1.0 {
            f.values = ambient.values.clone();
        }
    }
    let report = segment_and_decode(&trace, &pipe.refs, &DetectorConfig::default(), Some(&payload)).unwrap();
    assert!(!report.detection_success);
    assert_eq!(report.region_states.len(), 16);
    assert!(report.bits.is_empty());
}

#[test]
fn isolated_border_frame_is_invalid() {
    // Two 20 mm regions: the beam centred on their border sees a mixture
    // with the diffuse lobe and no state clears the threshold.
    let pipe = Pipeline::new(RigSettings::default().noiseless(), CodecConfig::default());
    for (a, b) in [(0u32, 4u32), (2, 3), (5, 5)] {
        let angles = [pipe.map.state_angle(a, 3), pipe.map.state_angle(b, 3)];
        let scenario = SwipeScenario::new(TagLayout::uniform(40.0, CARD_HEIGHT, &angles), pipe.rig);
        let mut cache = ResponseCache::new(pipe.rig.ring());
        let trace = simulate_swipe_with(&scenario, &mut cache).unwrap();
        let mid = trace.len() / 2;
        let sims = pipe.refs.similarities(&trace[mid].as_f64()).unwrap();
        let best = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(best < 0.9, "states {a},{b}: {best}");
    }
}

#[test]
fn mostly_one_state_mixture_keeps_its_state() {
    for m in 1..=3 {
        let cfg = CodecConfig::new(17, m, true).unwrap();
        let pipe = Pipeline::new(RigSettings::default().noiseless(), cfg);
        let mut cache = ResponseCache::new(pipe.rig.ring());
        let k_max = cfg.states();
        for k in 0..k_max {
            let nb = (k + 1) % k_max;
            let a = cache.response(&pipe.map.state_angle(k, m)).unwrap().to_vec();
            let b = cache.response(&pipe.map.state_angle(nb, m)).unwrap().to_vec();
            let illum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.8 * x + 0.2 * y).collect();
            let frame = frame_from_illumination(&illum, &pipe.rig.model, pipe.rig.ambient, 0.0, &mut ChaCha8Rng::seed_from_u64(0), 0);
            let sims = pipe.refs.similarities(&frame.as_f64()).unwrap();
            let best = (0..sims.len()).fold(0, |b, i| if sims[i] > sims[b] { i } else { b });
            assert_eq!(best, k as usize, "m {m} state {k}");
        }
    }
}

#[test]
fn adjacent_confusion_cost_gray_vs_binary() {
    let map = NonlinearMap::build(&RigSettings::default().geometry).unwrap();
    let payload: Vec<bool> = (0..51).map(|i| i % 3 == 1 || i % 7 == 0).collect();
    let mut worst_binary = 0;
    for use_gray in [true, false] {
        let cfg = CodecConfig::new(17, 3, use_gray).unwrap();
        for (r, code) in encode(&payload, &cfg, &map).unwrap().iter().enumerate() {
            let mut states = anisotag_core::codec::payload_states(&payload, &cfg).unwrap();
            states[r] = (code.value + 1) % 8;
            let errs = hamming(&anisotag_core::codec::decode(&states, &cfg).unwrap(), &payload);
            if use_gray {
                assert_eq!(errs, 1);
            } else {
                worst_binary = worst_binary.max(errs);
            }
        }
    }
    assert!(worst_binary <= 3 && worst_binary >= 2);
}
