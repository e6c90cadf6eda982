use ari_core::arena::{calibrate, chance_level, point_in_polygon, ArenaLayout, Zone};
use ari_core::ingest::{downsample_1hz, parse_tracking_str, qc_check, Frame, RawTrack};
use ari_core::Metric;
use proptest::prelude::*;

fn layout(w: f64, h: f64, zones: Vec<Zone>) -> ArenaLayout {
    ArenaLayout {
        experiment_id: "prop".into(),
        width: w,
        height: h,
        zones,
        breathing_period: 300.0,
        session_len: 1800.0,
    }
}

fn track(likelihoods: &[f64], fps: f64) -> RawTrack {
    RawTrack {
        frames: likelihoods
            .iter()
            .enumerate()
            .map(|(i, &l)| Frame {
                index: i as u64,
                x: i as f64 * 0.5,
                y: 3.0,
                likelihood: l,
            })
            .collect(),
        fps,
        keypoint_names: vec!["center".into()],
        keypoint: "center".into(),
        scorer: "prop".into(),
    }
}

proptest! {
    #[test]
    fn rectangle_chance_is_its_area_ratio(
        w in 100.0..2000.0f64, h in 100.0..2000.0f64,
        fx in 0.0..0.9f64, fy in 0.0..0.9f64, fw in 0.01..0.1f64, fh in 0.01..0.1f64,
    ) {
        let (x0, y0) = (fx * w, fy * h);
        let zone = Zone::rect("z", x0, y0, x0 + fw * w, y0 + fh * h);
        let mirrored = Zone::rect("m", w - x0 - fw * w, y0, w - x0, y0 + fh * h);
        let a = chance_level(&layout(w, h, vec![zone]), Metric::Interface);
        let b = chance_level(&layout(w, h, vec![mirrored]), Metric::Interface);
        prop_assert!((a - fw * fh).abs() < 1e-12);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn calibration_inverts_a_camera_similarity(
        scale in 0.3..3.0f64, angle in -0.2..0.2f64, ox in -500.0..500.0f64, oy in -500.0..500.0f64,
        px in 0.0..1.0f64, py in 0.0..1.0f64,
    ) {
        let (w, h) = (900.0, 600.0);
        let cam = |p: [f64; 2]| {
            let (s, c) = angle.sin_cos();
            [ox + scale * (c * p[0] - s * p[1]), oy + scale * (s * p[0] + c * p[1])]
        };
        let corners = [cam([0.0, 0.0]), cam([w, 0.0]), cam([w, h]), cam([0.0, h])];
        let t = calibrate(&corners, (w, h)).unwrap();
        let mm = [px * w, py * h];
        let back = t.apply(cam(mm));
        prop_assert!((back[0] - mm[0]).abs() < 1e-6 && (back[1] - mm[1]).abs() < 1e-6);
    }

    #[test]
    fn zone_membership_matches_rectangle_bounds(x in -10.0..110.0f64, y in -10.0..60.0f64) {
        let z = Zone::rect("z", 0.0, 0.0, 100.0, 50.0);
        let strictly_inside = x > 1e-9 && x < 100.0 - 1e-9 && y > 1e-9 && y < 50.0 - 1e-9;
        let outside = !(-1e-9..=100.0 + 1e-9).contains(&x) || !(-1e-9..=50.0 + 1e-9).contains(&y);
        if strictly_inside {
            prop_assert!(point_in_polygon([x, y], &z.polygon));
        }
        if outside {
            prop_assert!(!point_in_polygon([x, y], &z.polygon));
        }
    }

    #[test]
    fn downsampling_picks_best_frame_per_second(
        likelihoods in prop::collection::vec(0.0..1.0f64, 1..400),
        fps in prop::sample::select(vec![5.0, 10.0, 25.0, 30.0]),
    ) {
        let t = track(&likelihoods, fps);
        let slots = downsample_1hz(&t, 0.6).unwrap();
        prop_assert_eq!(slots.len(), (likelihoods.len() as f64 / fps).ceil() as usize);
        for (k, slot) in slots.iter().enumerate() {
            let in_second: Vec<&Frame> =
                t.frames.iter().filter(|f| (f.index as f64 / fps).floor() as usize == k).collect();
            let best = in_second.iter().map(|f| f.likelihood).fold(f64::NEG_INFINITY, f64::max);
            match slot {
                Some(s) => {
                    prop_assert_eq!(s.likelihood, best);
                    prop_assert!(s.likelihood >= 0.6);
                    prop_assert_eq!((s.frame_index as f64 / fps).floor() as usize, k);
                }
                None => prop_assert!(best < 0.6),
            }
        }
    }

    #[test]
    fn qc_passes_exactly_at_the_fraction(total in 10usize..2000, frac in 0.0..1.0f64) {
        let good = (frac * total as f64).round() as usize;
        let l: Vec<f64> = (0..total).map(|i| if i < good { 0.9 } else { 0.1 }).collect();
        let q = qc_check(&track(&l, 10.0), 0.6, 0.9).unwrap();
        prop_assert_eq!(q.good_frames, good);
        prop_assert_eq!(q.passed, good * 10 >= total * 9);
    }

    #[test]
    fn tracking_csv_round_trips(likelihoods in prop::collection::vec(0.0..1.0f64, 1..100)) {
        let t = track(&likelihoods, 10.0);
        let back = parse_tracking_str(&t.to_csv_string(), "center", 10.0).unwrap();
        prop_assert_eq!(back.frames, t.frames);
    }
}
