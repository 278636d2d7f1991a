use proptest::prelude::*;
use rigmotion_core::animstring::{parse_animstring, quantize_clip, to_clip};
use rigmotion_core::{normalize, serialize_animstring, Clip, Quaternion, QuantizeSpec, Vec3};

fn unit_quat() -> impl Strategy<Value = Quaternion> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(x, y, z, w)| x * x + y * y + z * z + w * w > 1e-2)
        .prop_map(|(x, y, z, w)| Quaternion::new(x, y, z, w).normalized().unwrap())
}

fn quantize_spec() -> impl Strategy<Value = QuantizeSpec> {
    prop_oneof![
        Just(QuantizeSpec::LLM_EXCHANGE),
        Just(QuantizeSpec::ARCHIVAL),
        (1u32..=6).prop_map(QuantizeSpec::significant_figures),
        (1u32..=6).prop_map(QuantizeSpec::decimal_places),
    ]
}

fn clip() -> impl Strategy<Value = Clip> {
    let track = prop::collection::vec((0.0f64..1.0, unit_quat()), 1..=20);
    let root = prop::option::of(prop::collection::vec((0.0f64..1.0, prop::array::uniform3(-5.0f64..5.0)), 1..=20));
    (0.5f64..10.0, prop::collection::vec(track, 1..=8), root).prop_map(|(duration, tracks, root)| {
        let mut c = Clip::new("random motion", duration);
        for (i, keys) in tracks.into_iter().enumerate() {
            let mut keys: Vec<(f64, Quaternion)> = keys.into_iter().map(|(u, q)| (u * duration, q)).collect();
            keys.sort_by(|a, b| a.0.total_cmp(&b.0));
            c = c.with_track(format!("joint_{i}"), keys);
        }
        if let Some(root) = root {
            let mut keys: Vec<(f64, Vec3)> =
                root.into_iter().map(|(u, p)| (u * duration, Vec3::new(p[0], p[1], p[2]))).collect();
            keys.sort_by(|a, b| a.0.total_cmp(&b.0));
            c = c.with_root_motion(keys);
        }
        c
    })
}

fn assert_same(expected: &Clip, got: &Clip) -> Result<(), TestCaseError> {
    prop_assert_eq!(&expected.name, &got.name);
    prop_assert!((expected.duration - got.duration).abs() < 1e-12);
    prop_assert_eq!(expected.rotation_tracks.len(), got.rotation_tracks.len());
    for (a, b) in expected.rotation_tracks.iter().zip(&got.rotation_tracks) {
        prop_assert_eq!(&a.joint_name, &b.joint_name);
        prop_assert_eq!(a.keys.len(), b.keys.len());
        for (ka, kb) in a.keys.iter().zip(&b.keys) {
            prop_assert!((ka.time - kb.time).abs() < 1e-12);
            prop_assert!(ka.rotation.dot(kb.rotation).abs() >= 1.0 - 1e-6);
        }
    }
    prop_assert_eq!(expected.root_motion.is_some(), got.root_motion.is_some());
    for (ka, kb) in expected.root_motion.iter().flatten().zip(got.root_motion.iter().flatten()) {
        prop_assert!((ka.time - kb.time).abs() < 1e-12);
        prop_assert!((ka.translation - kb.translation).length() < 1e-9);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn serialize_then_parse_reproduces_quantized_clip(c in clip(), q in quantize_spec()) {
        let text = serialize_animstring(&c, &q);
        let parsed = to_clip(&parse_animstring(&text).unwrap()).unwrap();
        let expected = quantize_clip(&c, &q).unwrap();
        assert_same(&expected, &parsed)?;
    }

    #[test]
    fn canonical_text_is_a_fixed_point(c in clip(), q in quantize_spec()) {
        let text = serialize_animstring(&c, &q);
        let doc = parse_animstring(&text).unwrap();
        prop_assert_eq!(doc.render(&q), text);
    }

    #[test]
    fn normalize_is_idempotent(c in clip()) {
        let once = normalize(&c).unwrap();
        prop_assert_eq!(normalize(&once).unwrap(), once);
    }
}
