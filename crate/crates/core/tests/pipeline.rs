use pcrobust_core::corruption::CorruptionLevel;
use pcrobust_core::kitti::{self, LabelCoords};
use pcrobust_core::synth::{synth_frame, write_kitti_frame, SynthConfig};
use pcrobust_core::{apply, CorruptionConfig, CorruptionKind, CorruptionSpec, Severity};
use proptest::prelude::*;

#[test]
fn synthetic_frame_survives_kitti_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (frame, calib) = synth_frame("000007", 7, &SynthConfig::small());
    write_kitti_frame(dir.path(), &frame, &calib).unwrap();
    let cloud = kitti::read_point_cloud(dir.path().join("velodyne/000007.bin")).unwrap();
    assert_eq!(cloud.points, frame.cloud.points);
    let calib2 = kitti::read_calibration(dir.path().join("calib/000007.txt")).unwrap();
    let labels = kitti::read_labels(dir.path().join("label_2/000007.txt"), Some(&calib2), LabelCoords::Camera).unwrap();
    assert_eq!(labels.boxes.len(), frame.boxes.len());
    for (a, b) in labels.boxes.iter().zip(&frame.boxes) {
        assert_eq!(a.class, b.class);
        assert!((a.cx - b.cx).abs() < 0.01 && (a.cy - b.cy).abs() < 0.01 && (a.cz - b.cz).abs() < 0.01);
        assert!((a.yaw - b.yaw).abs() < 0.01 || ((a.yaw - b.yaw).abs() - std::f64::consts::TAU).abs() < 0.01);
    }
}

#[test]
fn every_cell_is_finite_and_keeps_scene_labels() {
    let (frame, _) = synth_frame("x", 3, &SynthConfig::small());
    let cfg = CorruptionConfig::default();
    for kind in CorruptionKind::ALL {
        for l in 1..=5 {
            let r = apply(&frame, CorruptionSpec { kind, severity: Severity::new(l).unwrap(), seed: 9 }, &cfg).unwrap();
            assert!(r.cloud.points.iter().all(|p| p.x.is_finite() && p.y.is_finite() && p.z.is_finite()), "{kind}@{l}");
            if !kind.mutates_labels() {
                assert_eq!(r.boxes, frame.boxes, "{kind}@{l}");
            }
            if kind.level() == CorruptionLevel::Object && !kind.mutates_labels() {
                assert_eq!(r.boxes.len(), frame.boxes.len());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn apply_is_a_function_of_its_spec(seed in any::<u64>(), k in 0usize..25, l in 0u8..=5) {
        let (frame, _) = synth_frame("p", 5, &SynthConfig::small());
        let spec = CorruptionSpec { kind: CorruptionKind::ALL[k], severity: Severity::new(l).unwrap(), seed };
        let cfg = CorruptionConfig::default();
        let a = apply(&frame, spec, &cfg).unwrap();
        let b = apply(&frame, spec, &cfg).unwrap();
        prop_assert_eq!(kitti::encode_points(&a.cloud.points), kitti::encode_points(&b.cloud.points));
        prop_assert_eq!(a.boxes, b.boxes);
    }
}
