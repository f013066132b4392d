use anisotag_core::gcode::TagLayout;
use anisotag_core::geometry::MicrostructureAngle;
use anisotag_core::optics::{
    beam_fractions, diffuse_lobe, format_trace, frame_illumination, parse_trace, simulate_swipe, PhotoresistorModel,
    ResponseCache, RigSettings, SwipeScenario,
};
use proptest::prelude::*;

fn layout_from(degs: &[f64], width: f64) -> TagLayout {
    let angles: Vec<_> = degs.iter().map(|&d| MicrostructureAngle::from_degrees(d)).collect();
    TagLayout::uniform(width, 53.98, &angles)
}

fn degs_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..180.0f64, 4..=12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_gives_identical_trace(degs in degs_strategy(), seed in any::<u64>()) {
        let rig = RigSettings { seed, ..RigSettings::default() };
        let scenario = SwipeScenario::new(layout_from(&degs, 85.6), rig);
        let a = format_trace(&simulate_swipe(&scenario).unwrap());
        let b = format_trace(&simulate_swipe(&scenario).unwrap());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(format_trace(&parse_trace(&a).unwrap()), a);
    }

    #[test]
    fn noiseless_trace_ignores_seed(degs in degs_strategy(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let rig = RigSettings::default().noiseless();
        let layout = layout_from(&degs, 85.6);
        let a = simulate_swipe(&SwipeScenario::new(layout.clone(), RigSettings { seed: s1, ..rig })).unwrap();
        let b = simulate_swipe(&SwipeScenario::new(layout, RigSettings { seed: s2, ..rig })).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn illumination_is_affine_in_overlaps(degs in degs_strategy(), center in 0.0..85.6f64) {
        let rig = RigSettings::default();
        let scenario = SwipeScenario::new(layout_from(&degs, 85.6), rig);
        let mut cache = ResponseCache::new(rig.ring());
        let got = frame_illumination(&scenario, &mut cache, center).unwrap();
        let fr = beam_fractions(&scenario.layout, &rig.beam, rig.borderline_width, center);
        let lobe = diffuse_lobe(&rig.ring());
        let mut want: Vec<f64> = lobe.iter().map(|l| fr.border * rig.diffuse_level * l).collect();
        for (region, f) in scenario.layout.regions.iter().zip(&fr.regions) {
            for (w, r) in want.iter_mut().zip(cache.response(&region.angle).unwrap()) {
                *w += f * r;
            }
        }
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_layout_reverses_trace(degs in degs_strategy()) {
        // 80 mm is a whole number of 0.5 mm steps, so the beam centres of
        // the two swipes are mirror images of one another.
        let rig = RigSettings::default().noiseless();
        let forward = simulate_swipe(&SwipeScenario::new(layout_from(&degs, 80.0), rig)).unwrap();
        let reversed: Vec<f64> = degs.iter().rev().copied().collect();
        let backward = simulate_swipe(&SwipeScenario::new(layout_from(&reversed, 80.0), rig)).unwrap();
        prop_assert_eq!(forward.len(), backward.len());
        for (f, b) in forward.iter().zip(backward.iter().rev()) {
            prop_assert_eq!(&f.values, &b.values);
        }
    }

    #[test]
    fn brighter_never_reads_lower(a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let model = PhotoresistorModel::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(model.counts(lo) <= model.counts(hi));
        prop_assert!(model.voltage(lo) <= model.voltage(hi));
    }
}

#[test]
fn halving_step_doubles_frames() {
    let layout = layout_from(&[10.0, 50.0, 90.0, 130.0], 85.6);
    let coarse = simulate_swipe(&SwipeScenario::new(layout.clone(), RigSettings::default())).unwrap();
    let fine = simulate_swipe(&SwipeScenario::new(layout, RigSettings { step: 0.25, ..RigSettings::default() })).unwrap();
    assert!(fine.len().abs_diff(2 * coarse.len()) <= 1, "{} vs {}", fine.len(), coarse.len());
}
