mod common;

use ari_core::arena::{chance_level, preset};
use ari_core::ingest::parse_tracking_str;
use ari_core::synth::{
    make_dataset, pixel_corners, simulate_chick, simulate_path, BehaviorParams, DatasetOptions, ParamsSpec,
};
use ari_core::{Metric, Side};
use common::ingest_to_preferences;
use proptest::prelude::*;

#[test]
fn unattracted_walk_matches_interface_chance() {
    let layout = preset("exp1a").unwrap();
    let corners = pixel_corners(&layout);
    let chance = chance_level(&layout, Metric::Interface);
    let n = 50;
    let mut sum = 0.0;
    for seed in 0..n {
        let p = BehaviorParams { seed, ..Default::default() };
        let track = simulate_chick(&layout, &p, 10.0, 1800.0).unwrap();
        let prefs = ingest_to_preferences(&track, &layout, &corners, Side::Left, "c", 300);
        sum += prefs.session_values.interface.unwrap();
    }
    let mean = sum / n as f64;
    assert!((mean - chance).abs() < 0.05, "mean {mean} vs chance {chance}");
}

#[test]
fn strong_heat_attraction_saturates() {
    let layout = preset("exp2").unwrap();
    let corners = pixel_corners(&layout);
    let p = BehaviorParams {
        attract_heat: 8.0,
        dwell_bias: 50.0,
        seed: 4,
        ..Default::default()
    };
    let track = simulate_chick(&layout, &p, 10.0, 1800.0).unwrap();
    let prefs = ingest_to_preferences(&track, &layout, &corners, Side::Left, "c", 300);
    let h = prefs.session_values.heating.unwrap();
    assert!(h > 0.9, "p_heating {h}");
}

#[test]
fn pipeline_recovers_ground_truth() {
    let layout = preset("exp2").unwrap();
    let params = BehaviorParams {
        attract_interface: 1.0,
        attract_heat: 4.25,
        dwell_bias: 5.0,
        onset_delay: 300.0,
        ..Default::default()
    };
    let opts = DatasetOptions { n_chicks: 10, ..Default::default() };
    let ds = make_dataset(&layout, &ParamsSpec::Shared(params), &opts).unwrap();
    assert_eq!(ds.chicks.len(), 10);
    let mut diffs = Vec::new();
    for (chick, truth) in ds.chicks.iter().zip(&ds.truth) {
        let prefs = ingest_to_preferences(&chick.track, &layout, &ds.pixel_corners, chick.start_side, &chick.chick_id, 300);
        diffs.push((prefs.session_values.interface.unwrap() - truth.session.interface.unwrap()).abs());
        for (got, want) in prefs.bins.iter().zip(&truth.bins) {
            if let (Some(g), Some(w)) = (got.values.heating, want.heating) {
                assert!((g - w).abs() < 0.15, "bin {}: {g} vs {w}", got.bin);
            }
        }
    }
    let mad = diffs.iter().sum::<f64>() / diffs.len() as f64;
    assert!(mad < 0.02, "interface MAD {mad}");
}

#[test]
fn onset_delay_keeps_first_bin_at_chance() {
    let layout = preset("exp1a").unwrap();
    let chance = chance_level(&layout, Metric::Interface);
    let params = BehaviorParams {
        attract_interface: 2.0,
        dwell_bias: 3.0,
        onset_delay: 300.0,
        ..Default::default()
    };
    let opts = DatasetOptions { n_chicks: 20, ..Default::default() };
    let ds = make_dataset(&layout, &ParamsSpec::Shared(params), &opts).unwrap();
    let mean_bin = |k: usize| ds.truth.iter().map(|t| t.bins[k].interface.unwrap()).sum::<f64>() / ds.truth.len() as f64;
    let first = mean_bin(0);
    assert!((first - chance).abs() < 0.05, "bin 1 {first} vs {chance}");
    for k in 1..6 {
        assert!(mean_bin(k) > chance + 0.2, "bin {} {}", k + 1, mean_bin(k));
    }
}

#[test]
fn datasets_are_reproducible_and_chicks_independent() {
    let layout = preset("exp3").unwrap();
    let params = ParamsSpec::Shared(BehaviorParams { attract_face: 1.0, ..Default::default() });
    let small = DatasetOptions { n_chicks: 3, session_len: 60.0, ..Default::default() };
    let big = DatasetOptions { n_chicks: 5, ..small.clone() };
    let a = make_dataset(&layout, &params, &small).unwrap();
    let b = make_dataset(&layout, &params, &small).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.truth_csv(), b.truth_csv());
    let c = make_dataset(&layout, &params, &big).unwrap();
    assert_eq!(&c.chicks[..3], &a.chicks[..]);
    let seeds: std::collections::BTreeSet<u64> = c.chicks.iter().map(|ch| ch.seed).collect();
    assert_eq!(seeds.len(), 5);
}

#[test]
fn emitted_csv_round_trips_through_the_parser() {
    let layout = preset("exp1b").unwrap();
    let p = BehaviorParams { seed: 9, ..Default::default() };
    let track = simulate_chick(&layout, &p, 10.0, 30.0).unwrap();
    let back = parse_tracking_str(&track.to_csv_string(), &track.keypoint, track.fps).unwrap();
    assert_eq!(back.frames.len(), track.frames.len());
    for (a, b) in back.frames.iter().zip(&track.frames) {
        assert_eq!(a.index, b.index);
        assert_eq!((a.x, a.y, a.likelihood), (b.x, b.y, b.likelihood));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn walk_stays_inside_the_arena(
        seed in any::<u64>(),
        step_sd in 1.0f64..200.0,
        heat in 0.0f64..10.0,
        dwell in 0.0f64..20.0,
        exp in prop::sample::select(vec!["exp1a", "exp1b", "exp2", "exp3"]),
    ) {
        let layout = preset(exp).unwrap();
        let p = BehaviorParams { seed, step_sd, attract_heat: heat, attract_interface: 0.5, dwell_bias: dwell, ..Default::default() };
        let path = simulate_path(&layout, &p, 10.0, 60.0);
        prop_assert_eq!(path.len(), 600);
        for q in path {
            prop_assert!((0.0..=layout.width).contains(&q[0]) && (0.0..=layout.height).contains(&q[1]), "{:?}", q);
        }
    }
}
