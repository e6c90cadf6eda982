#![allow(dead_code)]

use ari_core::betamm::{logistic, ModelData, Observation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};

/// Draws a chicks x bins data set from the Beta mixed model with the given
/// linear predictor per bin (bin b uses `eta[b - 1]`).
pub fn simulate_beta_mixed(seed: u64, eta: &[f64], phi: f64, sigma: f64, n_chicks: usize) -> ModelData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let re = Normal::new(0.0, sigma).unwrap();
    let mut obs = Vec::new();
    for c in 0..n_chicks {
        let u = re.sample(&mut rng);
        for (b, e) in eta.iter().enumerate() {
            let mu = logistic(e + u);
            let y: f64 = Beta::new(mu * phi, (1.0 - mu) * phi).unwrap().sample(&mut rng);
            obs.push(Observation {
                chick_id: format!("c{c:02}"),
                bin: b as u32 + 1,
                y: y.clamp(0.0, 1.0),
            });
        }
    }
    ModelData::new(obs, 0.5).unwrap()
}

/// Two chicks with two bins each.
pub fn toy_two_chicks() -> ModelData {
    let o = |c: &str, bin, y| Observation {
        chick_id: c.into(),
        bin,
        y,
    };
    ModelData::new(
        vec![o("a", 1, 0.62), o("a", 2, 0.81), o("b", 1, 0.35), o("b", 2, 0.57)],
        0.5,
    )
    .unwrap()
}

/// Brute-force marginal log-likelihood: per chick, trapezoid rule over
/// `u in [-8 sigma - pad, 8 sigma + pad]` with 40001 points, densities from statrs.
/// `theta = [beta..., log_phi, log_sigma]`; bins map to coefficients by
/// rank among the observed bins (first bin is the reference).
pub fn trapezoid_loglik(theta: &[f64], data: &ModelData) -> f64 {
    use statrs::distribution::{Beta as BetaDist, Continuous, Normal as NormalDist};
    use std::collections::{BTreeMap, BTreeSet};

    let p = theta.len() - 2;
    let phi = theta[p].exp();
    let sigma = theta[p + 1].exp();
    let bins: Vec<u32> = data.observations.iter().map(|o| o.bin).collect::<BTreeSet<_>>().into_iter().collect();
    assert_eq!(bins.len(), p, "parameter vector does not match the design");
    let mut by_chick: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for o in &data.observations {
        let k = bins.iter().position(|b| *b == o.bin).unwrap();
        by_chick.entry(&o.chick_id).or_default().push((k, o.y));
    }
    let prior = NormalDist::new(0.0, sigma).unwrap();
    // The window covers the prior and, for small sigma, a posterior pulled far
    // from zero by the data.
    let n = 40001;
    let pad = (100.0 * sigma).min(8.0);
    let (lo, hi) = (-8.0 * sigma - pad, 8.0 * sigma + pad);
    let h = (hi - lo) / (n - 1) as f64;
    let mut total = 0.0;
    for obs in by_chick.values() {
        let logf: Vec<f64> = (0..n)
            .map(|i| {
                let u = lo + i as f64 * h;
                let mut v = prior.ln_pdf(u);
                for (k, y) in obs {
                    let eta = theta[0] + if *k > 0 { theta[*k] } else { 0.0 } + u;
                    let mu = 1.0 / (1.0 + (-eta).exp());
                    v += BetaDist::new(mu * phi, (1.0 - mu) * phi).unwrap().ln_pdf(*y);
                }
                v
            })
            .collect();
        let m = logf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = logf
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                w * (v - m).exp()
            })
            .sum();
        total += m + (s * h).ln();
    }
    total
}

/// Toy data sets with at most three chicks and four observations each.
pub fn toy_sets() -> Vec<(&'static str, ModelData)> {
    let o = |c: &str, bin, y| Observation {
        chick_id: c.into(),
        bin,
        y,
    };
    vec![
        ("two_by_two", toy_two_chicks()),
        ("single_half", ModelData::new(vec![o("a", 1, 0.5)], 0.5).unwrap()),
        (
            "three_by_four",
            ModelData::new(
                vec![
                    o("a", 1, 0.12), o("a", 2, 0.33), o("a", 3, 0.41), o("a", 4, 0.72),
                    o("b", 1, 0.55), o("b", 2, 0.61), o("b", 3, 0.58), o("b", 4, 0.93),
                    o("c", 1, 0.08), o("c", 2, 0.27), o("c", 4, 0.49),
                ],
                0.5,
            )
            .unwrap(),
        ),
        (
            "three_unbalanced",
            ModelData::new(
                vec![o("x", 1, 0.97), o("x", 2, 0.91), o("y", 2, 0.35), o("z", 1, 0.62), o("z", 2, 0.02)],
                0.5,
            )
            .unwrap(),
        ),
    ]
}

/// The 27-point parameter grid for a design with `p` coefficients:
/// intercept x log phi x log sigma, with fixed contrasts.
pub fn param_grid(p: usize) -> Vec<Vec<f64>> {
    let contrasts = [0.6, -0.4, 1.1];
    let mut out = Vec::new();
    for b0 in [-1.0, 0.0, 1.3] {
        for lp in [0.5, 2.0, 4.0] {
            for ls in [-2.0, -0.5, 0.7] {
                let mut t = vec![b0];
                t.extend_from_slice(&contrasts[..p - 1]);
                t.push(lp);
                t.push(ls);
                out.push(t);
            }
        }
    }
    out
}

/// Best point of a dense grid over `(beta0, beta1, log_phi, log_sigma)` for a
/// two-bin data set: a 15^4 sweep of the full box, then repeated 15^4 sweeps
/// of a box halved around the incumbent. Returns `(loglik, theta)`.
pub fn grid_search_2bin(data: &ModelData, n_quad: usize) -> (f64, Vec<f64>) {
    use ari_core::betamm::{marginal_loglik, Params};

    let ll = |t: &[f64]| marginal_loglik(&Params::from_slice(t), data, n_quad).unwrap_or(f64::NEG_INFINITY);
    let mut lo = [-2.0, -2.0, -2.0, -6.0];
    let mut hi = [2.0, 2.0, 12.0, 2.5];
    let k = 15;
    let mut best = (f64::NEG_INFINITY, vec![0.0; 4]);
    for _round in 0..12 {
        let axis = |d: usize, i: usize| lo[d] + (hi[d] - lo[d]) * i as f64 / (k - 1) as f64;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    for m in 0..k {
                        let t = [axis(0, i), axis(1, j), axis(2, l), axis(3, m)];
                        let v = ll(&t);
                        if v > best.0 {
                            best = (v, t.to_vec());
                        }
                    }
                }
            }
        }
        for d in 0..4 {
            let half = (hi[d] - lo[d]) / 4.0;
            lo[d] = best.1[d] - half;
            hi[d] = best.1[d] + half;
        }
    }
    best
}

/// Tracker output through CSV text, QC, 1 Hz selection, interpolation,
/// occupancy and preferences, as the command-line pipeline runs it.
pub fn ingest_to_preferences(
    track: &ari_core::ingest::RawTrack,
    layout: &ari_core::ArenaLayout,
    pixel_corners: &[ari_core::arena::Point; 4],
    start_side: ari_core::Side,
    chick_id: &str,
    bin_len: u32,
) -> ari_core::metrics::PreferenceSeries {
    use ari_core::arena::calibrate;
    use ari_core::ingest::{downsample_1hz, interpolate_gaps, parse_tracking_str, qc_check, DEFAULT_QC_FRACTION, DEFAULT_QC_LIKELIHOOD};
    use ari_core::metrics::{compute_preferences, zone_occupancy, BreathingSchedule, OccupancyOptions};

    let text = track.to_csv_string();
    let parsed = parse_tracking_str(&text, &track.keypoint, track.fps).unwrap();
    let qc = qc_check(&parsed, DEFAULT_QC_LIKELIHOOD, DEFAULT_QC_FRACTION).unwrap();
    assert!(qc.passed, "{qc:?}");
    let slots = downsample_1hz(&parsed, DEFAULT_QC_LIKELIHOOD).unwrap();
    let cal = calibrate(pixel_corners, (layout.width, layout.height)).unwrap();
    let traj = interpolate_gaps(&slots, &cal, Some((layout.width, layout.height)), chick_id).unwrap();
    let sched = BreathingSchedule::new(start_side, layout.breathing_period, traj.session_len as f64);
    let occ = zone_occupancy(&traj, layout, &sched, OccupancyOptions::default()).unwrap();
    compute_preferences(&occ, layout, bin_len).unwrap()
}
