//! Synthetic chick trajectories with known zone preferences.
//!
//! Each chick performs a Gaussian random walk reflected at the arena walls.
//! After `onset_delay` seconds it picks a target zone with probability
//! proportional to the zone's attraction weight and drifts toward it;
//! `dwell_bias` makes it reluctant to step out of a zone once inside. The
//! noiseless millimetre path is mapped to pixels with a fixed affine
//! calibration, jittered, and given tracker likelihoods with occasional
//! low-confidence bursts whose positions are garbage.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{ArenaLayout, Metric, Point, Side};
use crate::ingest::{Frame, RawTrack, DEFAULT_KEYPOINT};
use crate::metrics::{BreathingSchedule, PreferenceValues};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid behaviour parameters: {0}")]
    InvalidParams(String),
    #[error("invalid dataset options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodNoise {
    /// Likelihoods outside bursts are uniform on `[baseline_low, baseline_high]`.
    pub baseline_low: f64,
    pub baseline_high: f64,
    /// Per-frame probability that a low-likelihood burst begins.
    pub burst_rate: f64,
    /// Burst length range in frames (inclusive).
    pub burst_min_frames: u32,
    pub burst_max_frames: u32,
    /// Likelihoods inside bursts are uniform on `[burst_low, burst_high]`.
    pub burst_low: f64,
    pub burst_high: f64,
    /// Standard deviation of the pixel jitter on good frames.
    pub pixel_sd: f64,
}

impl Default for LikelihoodNoise {
    fn default() -> Self {
        LikelihoodNoise {
            baseline_low: 0.9,
            baseline_high: 1.0,
            burst_rate: 0.002,
            burst_min_frames: 5,
            burst_max_frames: 30,
            burst_low: 0.05,
            burst_high: 0.5,
            pixel_sd: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorParams {
    /// Random-walk standard deviation per frame and axis (mm).
    pub step_sd: f64,
    pub attract_interface: f64,
    pub attract_heat: f64,
    pub attract_face: f64,
    pub dwell_bias: f64,
    /// Seconds before any attraction acts.
    pub onset_delay: f64,
    /// Per-frame probability of choosing a new target zone.
    pub retarget_prob: f64,
    pub likelihood_noise: LikelihoodNoise,
    pub seed: u64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        BehaviorParams {
            step_sd: 15.0,
            attract_interface: 0.0,
            attract_heat: 0.0,
            attract_face: 0.0,
            dwell_bias: 0.0,
            onset_delay: 0.0,
            retarget_prob: 0.003,
            likelihood_noise: LikelihoodNoise::default(),
            seed: 0,
        }
    }
}

impl BehaviorParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
        if !(self.step_sd.is_finite() && self.step_sd > 0.0) {
            return bad("step_sd must be positive");
        }
        let weights = [self.attract_interface, self.attract_heat, self.attract_face, self.dwell_bias];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("attraction weights and dwell_bias must be finite and >= 0");
        }
        if !(self.onset_delay.is_finite() && self.onset_delay >= 0.0) {
            return bad("onset_delay must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.retarget_prob) {
            return bad("retarget_prob must lie in [0, 1]");
        }
        let n = &self.likelihood_noise;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(n.baseline_low) && unit(n.baseline_high) && n.baseline_low <= n.baseline_high)
            || !(unit(n.burst_low) && unit(n.burst_high) && n.burst_low <= n.burst_high)
            || !unit(n.burst_rate)
            || n.burst_min_frames > n.burst_max_frames
            || !(n.pixel_sd.is_finite() && n.pixel_sd >= 0.0)
        {
            return bad("inconsistent likelihood noise settings");
        }
        Ok(())
    }

    fn zone_weight(&self, layout: &ArenaLayout, zone: usize) -> f64 {
        let z = &layout.zones[zone];
        self.attract_interface
            + if z.heated { self.attract_heat } else { 0.0 }
            + if z.has_face { self.attract_face } else { 0.0 }
    }
}

/// Pixel position of arena point `p` under the synthetic camera: 1.2 px/mm
/// horizontally, 1 px/mm vertically, image y pointing down, arena origin at
/// pixel (90, 60 + height).
pub fn mm_to_pixel(layout: &ArenaLayout, p: Point) -> Point {
    [90.0 + 1.2 * p[0], 60.0 + (layout.height - p[1])]
}

/// Pixel positions of the arena corners `(0,0), (w,0), (w,h), (0,h)` under
/// the synthetic camera, for use with [`crate::arena::calibrate`].
pub fn pixel_corners(layout: &ArenaLayout) -> [Point; 4] {
    crate::arena::arena_corners(layout.width, layout.height).map(|c| mm_to_pixel(layout, c))
}

fn reflect(v: f64, hi: f64) -> f64 {
    let period = 2.0 * hi;
    let m = v.rem_euclid(period);
    if m > hi {
        period - m
    } else {
        m
    }
}

fn pick_target(rng: &mut ChaCha8Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut r = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return Some(i);
        }
        r -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

/// Noiseless millimetre path, one point per frame.
pub fn simulate_path(layout: &ArenaLayout, params: &BehaviorParams, fps: f64, session_len: f64) -> Vec<Point> {
    let n = (session_len * fps).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(0);
    let weights: Vec<f64> = (0..layout.zones.len()).map(|i| params.zone_weight(layout, i)).collect();
    let stay = params.dwell_bias / (1.0 + params.dwell_bias);

    let mut pos = [layout.width / 2.0, layout.height / 2.0];
    let mut target: Option<usize> = None;
    let mut path = Vec::with_capacity(n);
    for k in 0..n {
        path.push(pos);
        let t = k as f64 / fps;
        let attracting = t >= params.onset_delay;
        if attracting && (target.is_none() || rng.random::<f64>() < params.retarget_prob) {
            target = pick_target(&mut rng, &weights);
        }
        let mut drift = [0.0, 0.0];
        if let (true, Some(z)) = (attracting, target) {
            let goal = layout.zones[z].nearest_point(pos);
            let d = [goal[0] - pos[0], goal[1] - pos[1]];
            let dist = d[0].hypot(d[1]);
            if dist > 0.0 {
                let mag = (weights[z] * params.step_sd).min(dist);
                drift = [d[0] / dist * mag, d[1] / dist * mag];
            }
        }
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        let cand = [
            reflect(pos[0] + drift[0] + params.step_sd * nx, layout.width),
            reflect(pos[1] + drift[1] + params.step_sd * ny, layout.height),
        ];
        let u: f64 = rng.random();
        if attracting && stay > 0.0 {
            if let Some(here) = layout.zone_at(pos) {
                if layout.zone_at(cand) != Some(here) && u < stay {
                    continue;
                }
            }
        }
        pos = cand;
    }
    path
}

/// Tracker output for a millimetre path: pixel positions with jitter and
/// likelihoods, including low-likelihood bursts with garbage positions.
pub fn emit_frames(layout: &ArenaLayout, path: &[Point], noise: &LikelihoodNoise, seed: u64) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let corners = pixel_corners(layout);
    let (px_lo, px_hi) = (corners[0][0], corners[1][0]);
    let (py_lo, py_hi) = (corners[2][1], corners[0][1]);
    let mut burst_left = 0u32;
    path.iter()
        .enumerate()
        .map(|(i, p)| {
            if burst_left == 0 && rng.random::<f64>() < noise.burst_rate {
                burst_left = rng.random_range(noise.burst_min_frames..=noise.burst_max_frames);
            }
            let (x, y, likelihood) = if burst_left > 0 {
                burst_left -= 1;
                (
                    rng.random_range(px_lo - 50.0..px_hi + 50.0),
                    rng.random_range(py_lo - 50.0..py_hi + 50.0),
                    rng.random_range(noise.burst_low..=noise.burst_high),
                )
            } else {
                let px = mm_to_pixel(layout, *p);
                let jx: f64 = rng.sample(StandardNormal);
                let jy: f64 = rng.sample(StandardNormal);
                (
                    px[0] + noise.pixel_sd * jx,
                    px[1] + noise.pixel_sd * jy,
                    rng.random_range(noise.baseline_low..=noise.baseline_high),
                )
            };
            Frame {
                index: i as u64,
                x,
                y,
                likelihood,
            }
        })
        .collect()
}

/// Simulates one chick and returns its tracker output.
pub fn simulate_chick(
    layout: &ArenaLayout,
    params: &BehaviorParams,
    fps: f64,
    session_len: f64,
) -> Result<RawTrack, SynthError> {
    Ok(simulate_chick_detailed(layout, params, fps, session_len)?.0)
}

/// Like [`simulate_chick`], also returning the noiseless millimetre path.
pub fn simulate_chick_detailed(
    layout: &ArenaLayout,
    params: &BehaviorParams,
    fps: f64,
    session_len: f64,
) -> Result<(RawTrack, Vec<Point>), SynthError> {
    params.validate()?;
    if !(fps.is_finite() && fps > 0.0 && session_len.is_finite() && session_len * fps >= 1.0) {
        return Err(SynthError::InvalidOptions("need fps > 0 and at least one frame".into()));
    }
    let path = simulate_path(layout, params, fps, session_len);
    let frames = emit_frames(layout, &path, &params.likelihood_noise, params.seed);
    Ok((
        RawTrack {
            frames,
            fps,
            keypoint_names: vec![DEFAULT_KEYPOINT.to_string()],
            keypoint: DEFAULT_KEYPOINT.to_string(),
            scorer: "synthetic".to_string(),
        },
        path,
    ))
}

#[derive(Debug, Default, Clone, Copy)]
struct FrameTally {
    frames: u64,
    in_zone: u64,
    face: u64,
    heated: u64,
    breathing: u64,
}

impl FrameTally {
    fn values(&self, layout: &ArenaLayout) -> PreferenceValues {
        let cond = |num: u64, m: Metric| {
            (layout.metric_applies(m) && self.in_zone > 0).then(|| num as f64 / self.in_zone as f64)
        };
        PreferenceValues {
            interface: (self.frames > 0).then(|| self.in_zone as f64 / self.frames as f64),
            face: cond(self.face, Metric::Face),
            heating: cond(self.heated, Metric::Heating),
            breathing: cond(self.breathing, Metric::Breathing),
        }
    }
}

/// Realised preferences of one simulated chick, measured on every frame of
/// the noiseless path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub chick_id: String,
    pub seed: u64,
    pub start_side: Side,
    pub session: PreferenceValues,
    /// Per bin, bin `k` at index `k - 1`.
    pub bins: Vec<PreferenceValues>,
}

pub fn ground_truth(
    chick_id: &str,
    seed: u64,
    layout: &ArenaLayout,
    path: &[Point],
    fps: f64,
    start_side: Side,
    bin_len: u32,
) -> GroundTruth {
    let session_len = path.len() as f64 / fps;
    let sched = BreathingSchedule::new(start_side, layout.breathing_period, session_len);
    let n_bins = (session_len / bin_len as f64).ceil().max(1.0) as usize;
    let mut bins = vec![FrameTally::default(); n_bins];
    let mut total = FrameTally::default();
    for (k, p) in path.iter().enumerate() {
        let t = k as f64 / fps;
        let b = ((t / bin_len as f64).floor() as usize).min(n_bins - 1);
        for tally in [&mut bins[b], &mut total] {
            tally.frames += 1;
            if let Some(zi) = layout.zone_at(*p) {
                let z = &layout.zones[zi];
                tally.in_zone += 1;
                tally.face += u64::from(z.has_face);
                tally.heated += u64::from(z.heated);
                tally.breathing += u64::from(z.breathing_group == Some(sched.active_side(t)));
            }
        }
    }
    GroundTruth {
        chick_id: chick_id.to_string(),
        seed,
        start_side,
        session: total.values(layout),
        bins: bins.iter().map(|b| b.values(layout)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub n_chicks: usize,
    pub base_seed: u64,
    pub fps: f64,
    pub session_len: f64,
    /// Bin length used for the per-bin ground truth (s).
    pub bin_len: u32,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            n_chicks: 20,
            base_seed: 1,
            fps: 10.0,
            session_len: 1800.0,
            bin_len: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticChick {
    pub chick_id: String,
    pub seed: u64,
    /// Counterbalanced: even-indexed chicks start on the left.
    pub start_side: Side,
    pub track: RawTrack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub experiment_id: String,
    pub pixel_corners: [Point; 4],
    pub chicks: Vec<SyntheticChick>,
    pub truth: Vec<GroundTruth>,
}

/// Behaviour parameters for a dataset: one set for every chick, or one per chick.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamsSpec {
    Shared(BehaviorParams),
    PerChick(Vec<BehaviorParams>),
}

pub fn chick_id(index: usize) -> String {
    format!("chick{:03}", index + 1)
}

/// Simulates `n_chicks` chicks with seeds `base_seed + index`.
pub fn make_dataset(
    layout: &ArenaLayout,
    params: &ParamsSpec,
    opts: &DatasetOptions,
) -> Result<SyntheticDataset, SynthError> {
    if opts.n_chicks == 0 {
        return Err(SynthError::InvalidOptions("n_chicks must be >= 1".into()));
    }
    if opts.bin_len == 0 {
        return Err(SynthError::InvalidOptions("bin_len must be >= 1".into()));
    }
    if let ParamsSpec::PerChick(v) = params {
        if v.len() != opts.n_chicks {
            return Err(SynthError::InvalidOptions(format!(
                "{} parameter sets for {} chicks",
                v.len(),
                opts.n_chicks
            )));
        }
    }
    let mut chicks = Vec::with_capacity(opts.n_chicks);
    let mut truth = Vec::with_capacity(opts.n_chicks);
    for i in 0..opts.n_chicks {
        let mut p = match params {
            ParamsSpec::Shared(p) => p.clone(),
            ParamsSpec::PerChick(v) => v[i].clone(),
        };
        p.seed = opts.base_seed.wrapping_add(i as u64);
        let id = chick_id(i);
        let start_side = if i % 2 == 0 { Side::Left } else { Side::Right };
        let (track, path) = simulate_chick_detailed(layout, &p, opts.fps, opts.session_len)?;
        truth.push(ground_truth(&id, p.seed, layout, &path, opts.fps, start_side, opts.bin_len));
        chicks.push(SyntheticChick {
            chick_id: id,
            seed: p.seed,
            start_side,
            track,
        });
    }
    Ok(SyntheticDataset {
        experiment_id: layout.experiment_id.clone(),
        pixel_corners: pixel_corners(layout),
        chicks,
        truth,
    })
}

pub const TRUTH_CSV_HEADER: &str = "chick_id,seed,start_side,scope,metric,value";

impl SyntheticDataset {
    /// Ground truth in long format; `scope` is a bin number or `session`.
    pub fn truth_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TRUTH_CSV_HEADER);
        out.push('\n');
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for g in &self.truth {
            let scopes = g
                .bins
                .iter()
                .enumerate()
                .map(|(i, v)| ((i + 1).to_string(), v))
                .chain(std::iter::once(("session".to_string(), &g.session)));
            for (scope, vals) in scopes {
                for m in Metric::ALL {
                    let _ = writeln!(out, "{},{},{},{},{},{}", g.chick_id, g.seed, g.start_side, scope, m, fmt(vals.get(m)));
                }
            }
        }
        out
    }

    /// `chick_id,start_side` table for the analysis step.
    pub fn sessions_csv(&self) -> String {
        let mut out = String::from("chick_id,start_side\n");
        for c in &self.chicks {
            let _ = writeln!(out, "{},{}", c.chick_id, c.start_side);
        }
        out
    }

    /// Calibration document matching [`pixel_corners`].
    pub fn calibration_json(&self) -> String {
        serde_json::json!({ "pixel_corners": self.pixel_corners }).to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{calibrate, preset};

    #[test]
    fn reflection_stays_inside() {
        for v in [-1500.0, -0.5, 0.0, 3.0, 899.0, 900.0, 901.0, 2750.0] {
            let r = reflect(v, 900.0);
            assert!((0.0..=900.0).contains(&r), "{v} -> {r}");
        }
        assert_eq!(reflect(-3.0, 900.0), 3.0);
        assert_eq!(reflect(905.0, 900.0), 895.0);
    }

    #[test]
    fn calibration_recovers_millimetres() {
        let layout = preset("exp2").unwrap();
        let cal = calibrate(&pixel_corners(&layout), (layout.width, layout.height)).unwrap();
        for p in [[0.0, 0.0], [123.0, 456.0], [900.0, 600.0]] {
            let q = cal.apply(mm_to_pixel(&layout, p));
            assert!((q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9);
        }
        assert_eq!(pixel_corners(&layout), [[90.0, 660.0], [1170.0, 660.0], [1170.0, 60.0], [90.0, 60.0]]);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let layout = preset("exp1a").unwrap();
        let p = BehaviorParams { seed: 7, ..Default::default() };
        let a = simulate_chick(&layout, &p, 10.0, 120.0).unwrap();
        let b = simulate_chick(&layout, &p, 10.0, 120.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.frames.len(), 1200);
        let c = simulate_chick(&layout, &BehaviorParams { seed: 8, ..p }, 10.0, 120.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_params() {
        let layout = preset("exp1a").unwrap();
        let p = BehaviorParams { step_sd: 0.0, ..Default::default() };
        assert!(simulate_chick(&layout, &p, 10.0, 10.0).is_err());
        let p = BehaviorParams { attract_heat: -1.0, ..Default::default() };
        assert!(simulate_chick(&layout, &p, 10.0, 10.0).is_err());
        let opts = DatasetOptions { n_chicks: 0, ..Default::default() };
        assert!(make_dataset(&layout, &ParamsSpec::Shared(BehaviorParams::default()), &opts).is_err());
    }

    #[test]
    fn dataset_seeds_and_sides() {
        let layout = preset("exp1a").unwrap();
        let opts = DatasetOptions { n_chicks: 4, base_seed: 100, session_len: 30.0, ..Default::default() };
        let d = make_dataset(&layout, &ParamsSpec::Shared(BehaviorParams::default()), &opts).unwrap();
        let seeds: Vec<u64> = d.chicks.iter().map(|c| c.seed).collect();
        assert_eq!(seeds, vec![100, 101, 102, 103]);
        let sides: Vec<Side> = d.chicks.iter().map(|c| c.start_side).collect();
        assert_eq!(sides, vec![Side::Left, Side::Right, Side::Left, Side::Right]);
        assert!(d.truth_csv().starts_with(TRUTH_CSV_HEADER));
        assert_eq!(d.sessions_csv().lines().count(), 5);
    }

    #[test]
    fn bursts_have_low_likelihood() {
        let layout = preset("exp1a").unwrap();
        let p = BehaviorParams {
            seed: 3,
            likelihood_noise: LikelihoodNoise { burst_rate: 0.05, ..Default::default() },
            ..Default::default()
        };
        let t = simulate_chick(&layout, &p, 10.0, 60.0).unwrap();
        let low = t.frames.iter().filter(|f| f.likelihood < 0.6).count();
        assert!(low > 0);
        assert!(t.frames.iter().all(|f| (0.0..=1.0).contains(&f.likelihood)));
    }
}
