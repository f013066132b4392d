use std::sync::OnceLock;

use anisotag_core::codec::{
    decode, encode, gray_decode, gray_encode, hamming, pad_payload, payload_states, CodecConfig, NonlinearMap,
};
use anisotag_core::geometry::{circle_intersection_angle, DetectionGeometry};
use proptest::prelude::*;

fn default_map() -> &'static NonlinearMap {
    static MAP: OnceLock<NonlinearMap> = OnceLock::new();
    MAP.get_or_init(|| NonlinearMap::build(&DetectionGeometry::default()).unwrap())
}

fn config_and_payload() -> impl Strategy<Value = (CodecConfig, Vec<bool>, bool)> {
    (1usize..24, 1u32..=5, any::<bool>()).prop_flat_map(|(n, m, gray)| {
        let cfg = CodecConfig::new(n, m, gray).unwrap();
        (Just(cfg), prop::collection::vec(any::<bool>(), cfg.capacity()), any::<bool>())
    })
}

/// Sorted crossing angles of all states, degrees.
fn state_psis(map: &NonlinearMap, bits: u32) -> Vec<f64> {
    let geom = map.geometry();
    let mut psis: Vec<f64> = (0..1u32 << bits)
        .map(|v| circle_intersection_angle(geom, &map.state_angle(v, bits)).unwrap().to_degrees())
        .collect();
    psis.sort_by(f64::total_cmp);
    psis
}

#[test]
fn mapped_states_cross_circle_evenly() {
    let psis = state_psis(default_map(), 3);
    let gaps: Vec<f64> = psis.windows(2).map(|w| w[1] - w[0]).collect();
    let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo <= 1.005, "gaps {gaps:?}");
}

proptest! {
    #[test]
    fn decode_inverts_encode((cfg, payload, _) in config_and_payload()) {
        let map = default_map();
        let codes = encode(&payload, &cfg, map).unwrap();
        prop_assert_eq!(codes.len(), cfg.n_regions);
        let states: Vec<u32> = codes
            .iter()
            .map(|c| map.state_for_angle(c.angle.delta(), cfg.bits_per_region))
            .collect();
        prop_assert_eq!(&states, &payload_states(&payload, &cfg).unwrap());
        prop_assert_eq!(decode(&states, &cfg).unwrap(), payload);
    }

    #[test]
    fn padding_keeps_prefix((cfg, payload, _) in config_and_payload(), cut in 0usize..120) {
        let prefix = &payload[..cut.min(payload.len())];
        let padded = pad_payload(prefix, &cfg).unwrap();
        prop_assert_eq!(padded.len(), cfg.capacity());
        prop_assert_eq!(&padded[..prefix.len()], prefix);
        prop_assert!(padded[prefix.len()..].iter().all(|b| !b));
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit(m in 1u32..=16, v in any::<u32>()) {
        let states = 1u64 << m;
        let v = (v as u64 % states) as u32;
        let next = ((v as u64 + 1) % states) as u32;
        let a = gray_encode(v, m).unwrap();
        let b = gray_encode(next, m).unwrap();
        prop_assert_eq!(hamming(&a, &b), 1);
        prop_assert_eq!(gray_decode(&a).unwrap(), v);
    }

    #[test]
    fn adjacent_confusion_costs_one_gray_bit((cfg, payload, up) in config_and_payload(), region in any::<prop::sample::Index>()) {
        let cfg = CodecConfig { use_gray: true, ..cfg };
        let mut states = payload_states(&payload, &cfg).unwrap();
        let r = region.index(states.len());
        let k = cfg.states();
        states[r] = if up { (states[r] + 1) % k } else { (states[r] + k - 1) % k };
        prop_assert_eq!(hamming(&decode(&states, &cfg).unwrap(), &payload), 1);
    }

    #[test]
    fn binary_confusion_never_beats_gray((cfg, payload, up) in config_and_payload(), region in any::<prop::sample::Index>()) {
        let cost = |gray: bool| {
            let cfg = CodecConfig { use_gray: gray, ..cfg };
            let mut states = payload_states(&payload, &cfg).unwrap();
            let r = region.index(states.len());
            let k = cfg.states();
            states[r] = if up { (states[r] + 1) % k } else { (states[r] + k - 1) % k };
            hamming(&decode(&states, &cfg).unwrap(), &payload)
        };
        prop_assert!(cost(true) <= cost(false));
    }

    #[test]
    fn map_and_unmap_are_inverse(u in 0.0..std::f64::consts::PI) {
        let map = default_map();
        prop_assert!((map.unmap(map.map(u)) - u).abs() < 1e-9);
    }
}
