use proptest::prelude::*;

use pressense_core::geometry::{find_peaks, Homography};
use pressense_core::losses::{contact_label_loss, structure_aware_ce, Force, Reduction};
use pressense_core::metrics::{char_errors, contact_iou, volumetric_iou};
use pressense_core::pressure::{contact_image, decode_expected, quantize};
use pressense_core::touch::{EngineConfig, EngineEvent, EngineState, TransitionKind};
use pressense_core::{BinIndexImage, BinMap, BinSpec, ContactLabel, PressureImage};

fn image(max_side: usize, max_p: f64) -> impl Strategy<Value = PressureImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(w, h)| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..max_p], w * h)
            .prop_map(move |d| PressureImage::new(w, h, d).unwrap())
    })
}

fn spec() -> impl Strategy<Value = BinSpec> {
    (2usize..12, 0.1f64..5.0, 1.5f64..20.0).prop_map(|(n, lo, ratio)| BinSpec::new(n, lo, lo * ratio).unwrap())
}

proptest! {
    #[test]
    fn quantize_is_monotone(spec in spec(), a in 0.0f64..200.0, b in 0.0f64..200.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(spec.bin_of(lo) <= spec.bin_of(hi));
    }

    #[test]
    fn representative_lies_in_its_bin(spec in spec(), t in 0.0f64..1.0) {
        let p = spec.p_low() + t * (spec.p_high() - spec.p_low());
        prop_assume!(p < spec.p_high());
        let b = spec.bin_of(p) as usize;
        prop_assert!(b >= 1);
        let rep = spec.representative(b);
        let edges = spec.edges();
        prop_assert!(rep >= edges[b - 1] && rep <= edges[b]);
    }

    #[test]
    fn contact_image_matches_nonzero_bins(p in image(8, 40.0)) {
        let spec = BinSpec::default();
        let c = contact_image(&p, spec.p_low()).unwrap();
        let q = quantize(&p, &spec);
        for (ci, qi) in c.data().iter().zip(q.data()) {
            prop_assert_eq!(*ci == 1, *qi >= 1);
        }
    }

    #[test]
    fn decoded_pressure_is_bounded(raw in prop::collection::vec(0.0f64..1.0, 9 * 6)) {
        let spec = BinSpec::default();
        let mut data = raw;
        for px in data.chunks_mut(9) {
            let s: f64 = px.iter().sum::<f64>() + 1e-9;
            px.iter_mut().for_each(|v| *v /= s);
        }
        let out = decode_expected(&BinMap::new(3, 2, 9, data).unwrap(), &spec).unwrap();
        let top = spec.representative(8);
        prop_assert!(out.data().iter().all(|&v| (0.0..=top + 1e-12).contains(&v)));
    }

    #[test]
    fn ious_are_symmetric_and_bounded((a, b) in (1usize..7, 1usize..7).prop_flat_map(|(w, h)| {
        let img = move || prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], w * h)
            .prop_map(move |d| PressureImage::new(w, h, d).unwrap());
        (img(), img())
    })) {
        let vab = volumetric_iou(&a, &b).unwrap();
        prop_assert_eq!(vab, volumetric_iou(&b, &a).unwrap());
        let (ca, cb) = (contact_image(&a, 1.0).unwrap(), contact_image(&b, 1.0).unwrap());
        let cab = contact_iou(&ca, &cb).unwrap();
        prop_assert_eq!(cab, contact_iou(&cb, &ca).unwrap());
        for v in [vab, cab].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn structure_aware_gradient_matches_differences(
        logits in prop::collection::vec(-3.0f64..3.0, 2..10),
        k in 0usize..10,
    ) {
        let n = logits.len();
        let k = (k % n) as u8;
        let target = BinIndexImage::new(1, 1, n, vec![k]).unwrap();
        let eval = |z: &[f64]| structure_aware_ce(&BinMap::new(1, 1, n, z.to_vec()).unwrap(), &target, Reduction::Sum).unwrap();
        let (_, grad) = eval(&logits);
        let h = 1e-6;
        for j in 0..n {
            let mut up = logits.clone();
            up[j] += h;
            let mut dn = logits.clone();
            dn[j] -= h;
            let fd = (eval(&up).0 - eval(&dn).0) / (2.0 * h);
            prop_assert!((fd - grad.data()[j]).abs() < 1e-6, "bin {j}: {fd} vs {}", grad.data()[j]);
        }
    }

    #[test]
    fn contact_label_gradient_matches_differences(
        z in prop::array::uniform6(-4.0f64..4.0),
        fingers in prop::array::uniform5(any::<bool>()),
        force in -1i8..=1,
    ) {
        let label = ContactLabel::new(fingers, Force::from_i8(force).unwrap());
        let (_, g) = contact_label_loss(&z, &label);
        let h = 1e-6;
        for i in 0..6 {
            let mut up = z;
            up[i] += h;
            let mut dn = z;
            dn[i] -= h;
            let fd = (contact_label_loss(&up, &label).0 - contact_label_loss(&dn, &label).0) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn debounced_presses_alternate_and_last(seq in prop::collection::vec(any::<bool>(), 0..40), debounce in 1u32..5) {
        let cfg = EngineConfig { debounce_frames: debounce, ..EngineConfig::default() };
        let mut engine = EngineState::new(cfg).unwrap();
        let mut transitions = Vec::new();
        for &on in &seq {
            let mut data = vec![0.0; 12 * 12];
            if on {
                data[6 * 12 + 6] = 4.0;
            }
            for e in engine.step_frame(&PressureImage::new(12, 12, data).unwrap(), None).unwrap() {
                if let EngineEvent::Touch(t) = e {
                    transitions.push((t.kind, t.frame));
                }
            }
            for (_, phase) in engine.phases() {
                if let pressense_core::touch::TrackPhase::PendingDown(n) | pressense_core::touch::TrackPhase::PendingUp(n) = phase {
                    prop_assert!(n < debounce);
                }
            }
        }
        for (i, (kind, frame)) in transitions.iter().enumerate() {
            let expected = if i % 2 == 0 { TransitionKind::Down } else { TransitionKind::Up };
            prop_assert_eq!(*kind, expected);
            if i % 2 == 1 {
                prop_assert!(frame - transitions[i - 1].1 >= debounce as u64);
            }
        }
    }

    #[test]
    fn width_map_is_monotone_and_clamped(a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let c = EngineConfig::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (wl, wh) = (c.width_map(lo), c.width_map(hi));
        prop_assert!(wl <= wh);
        prop_assert!(wl >= c.width_min_px && wh <= c.width_max_px);
    }

    #[test]
    fn kept_peaks_respect_min_distance(p in image(12, 10.0), d in 1.0f64..6.0) {
        let peaks = find_peaks(&p, 1.0, d).unwrap();
        for (i, a) in peaks.iter().enumerate() {
            prop_assert!(a.peak_pressure >= 1.0);
            for b in &peaks[i + 1..] {
                let dr = a.row as f64 - b.row as f64;
                let dc = a.col as f64 - b.col as f64;
                prop_assert!((dr * dr + dc * dc).sqrt() >= d - 1e-12);
            }
        }
    }

    #[test]
    fn homography_inverse_round_trips(
        m in prop::array::uniform8(-0.3f64..0.3),
        x in -50.0f64..50.0,
        y in -50.0f64..50.0,
    ) {
        let h = Homography::new([
            [1.0 + m[0], m[1], 10.0 * m[2]],
            [m[3], 1.0 + m[4], 10.0 * m[5]],
            [1e-3 * m[6], 1e-3 * m[7], 1.0],
        ]).unwrap();
        let inv = h.inverse().unwrap();
        let (u, v) = h.apply(x, y).unwrap();
        let (bx, by) = inv.apply(u, v).unwrap();
        prop_assert!((bx - x).abs() < 1e-8 && (by - y).abs() < 1e-8);
    }

    #[test]
    fn levenshtein_is_a_metric_on_samples(a in "[a-c]{0,8}", b in "[a-c]{0,8}", c in "[a-c]{0,8}") {
        prop_assert_eq!(char_errors(&a, &a), 0);
        prop_assert_eq!(char_errors(&a, &b), char_errors(&b, &a));
        prop_assert!(char_errors(&a, &c) <= char_errors(&a, &b) + char_errors(&b, &c));
        prop_assert!(char_errors(&a, &b) <= a.len().max(b.len()));
    }
}
