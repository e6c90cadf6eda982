use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use ari_core::arena::chance_level;
use ari_core::betamm::{
    emmeans_vs_chance, fit_beta_mixed, wald_type3, EmmAveraging, EmmResult, FitOptions, ModelData, ModelFit, WaldTest,
};
use ari_core::ingest::Trajectory;
use ari_core::metrics::{
    compute_preferences, parse_bin_rows, write_bin_rows, write_session_rows, zone_occupancy, BinRow,
    BreathingSchedule, OccupancyOptions, PreferenceSeries,
};
use ari_core::{ArenaLayout, Metric, Side};
use serde::{Deserialize, Serialize};

use crate::figure::{bin_summary, render_svg, summary_csv};
use crate::manifest::{read_input, resolve_layout, OutputDir, RunManifest};
use crate::preprocess::TRAJECTORY_INDEX;
use crate::{usage, AnalyzeArgs, CmdResult, Failure};

pub const BINS_FILE: &str = "preferences_bins.csv";
pub const SESSION_FILE: &str = "preferences_session.csv";
pub const INSUFFICIENT: &str = "insufficient data";

#[derive(Debug, Deserialize)]
struct IndexRow {
    chick_id: String,
    file: String,
}

#[derive(Debug, Deserialize)]
struct SessionRow {
    chick_id: String,
    start_side: String,
}

/// Everything written to `fit_<metric>.json`.
#[derive(Debug, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub experiment_id: String,
    pub chance: f64,
    /// `ok`, `insufficient data`, or `fit failed: <reason>`.
    pub status: String,
    pub n_chicks: usize,
    pub n_obs: usize,
    pub fit: Option<ModelFit>,
    pub wald: Option<WaldTest>,
    pub emm: Option<EmmResult>,
    pub notes: Vec<String>,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, manifest: &mut RunManifest) -> Result<Vec<T>> {
    let bytes = read_input(path)?;
    manifest.add_input(path, &bytes);
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("{} line {}", path.display(), i + 2)))
        .collect()
}

fn parse_metrics(names: &[String], layout: &ArenaLayout) -> Result<Vec<Metric>, Failure> {
    if names.is_empty() {
        return Ok(Metric::ALL.into_iter().filter(|m| layout.metric_applies(*m)).collect());
    }
    let mut out = Vec::new();
    for n in names {
        let m: Metric = n.parse().map_err(usage)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

pub fn run(args: &AnalyzeArgs) -> CmdResult {
    if args.bin_seconds == 0 {
        return Err(usage("--bin-seconds must be positive"));
    }
    if args.n_quad == 0 || args.n_quad % 2 == 0 {
        return Err(usage("--n-quad must be odd"));
    }
    let mut manifest = RunManifest::new("analyze", "", &args.layout);
    let layout = resolve_layout(&args.layout, Some(&mut manifest))?;
    manifest.experiment_id = layout.experiment_id.clone();
    let metrics = parse_metrics(&args.metrics, &layout)?;
    manifest.param("bin_seconds", args.bin_seconds);
    manifest.param("n_quad", args.n_quad);
    manifest.param("metrics", metrics.iter().map(|m| m.as_str()).collect::<Vec<_>>());
    manifest.param("exclude_interpolated", args.exclude_interpolated);

    let sides: BTreeMap<String, Side> = match &args.sessions {
        Some(p) => read_csv::<SessionRow>(p, &mut manifest)?
            .into_iter()
            .map(|r| {
                let side = r.start_side.parse::<Side>().map_err(|e| anyhow!("chick {}: {e}", r.chick_id))?;
                Ok((r.chick_id, side))
            })
            .collect::<Result<_>>()?,
        None => BTreeMap::new(),
    };
    let index: Vec<IndexRow> = read_csv(&args.input.join(TRAJECTORY_INDEX), &mut manifest)?;
    if index.is_empty() {
        return Err(Failure::Data(anyhow!("no trajectories listed in {}", args.input.display())));
    }

    let mut notes = Vec::new();
    let mut series: Vec<PreferenceSeries> = Vec::with_capacity(index.len());
    for row in &index {
        let path = args.input.join(&row.file);
        let bytes = read_input(&path)?;
        manifest.add_input(&path, &bytes);
        let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        let traj = Trajectory::from_csv_str(&row.chick_id, &text).with_context(|| format!("reading {}", path.display()))?;
        let start = match sides.get(&row.chick_id) {
            Some(s) => *s,
            None => {
                if args.sessions.is_some() {
                    notes.push(format!("{}: no start side listed; assumed left", row.chick_id));
                }
                Side::Left
            }
        };
        let sched = BreathingSchedule::new(start, layout.breathing_period, traj.session_len as f64);
        let opts = OccupancyOptions {
            exclude_interpolated: args.exclude_interpolated,
        };
        let occ = zone_occupancy(&traj, &layout, &sched, opts).with_context(|| format!("chick {}", row.chick_id))?;
        series.push(compute_preferences(&occ, &layout, args.bin_seconds).with_context(|| format!("chick {}", row.chick_id))?);
    }

    let mut out = OutputDir::create(&args.out)?;
    let bins_text = write_bin_rows(&series, &metrics);
    out.write(BINS_FILE, &bins_text)?;
    out.write(SESSION_FILE, write_session_rows(&series, &metrics))?;
    let rows = parse_bin_rows(&bins_text).map_err(|e| anyhow!("re-reading bin table: {e}"))?;

    let mut unconverged = Vec::new();
    for &metric in &metrics {
        let report = analyze_metric(&rows, metric, &layout, args.n_quad, &notes);
        let summary = bin_summary(&rows, metric, report.emm.as_ref());
        if report.fit.as_ref().is_some_and(|f| !f.converged) {
            unconverged.push(metric.as_str());
        }
        out.write(&format!("fit_{metric}.txt"), render_text(&report))?;
        out.write(&format!("fit_{metric}.json"), serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n")?;
        out.write(&format!("fig_{metric}.csv"), summary_csv(&summary, report.chance))?;
        out.write(&format!("fig_{metric}.svg"), render_svg(&summary, metric, &layout.experiment_id, report.chance))?;
    }
    out.finish(manifest)?;

    if unconverged.is_empty() {
        Ok(())
    } else {
        Err(Failure::NonConvergence(format!("fit did not converge for: {}", unconverged.join(", "))))
    }
}

fn analyze_metric(rows: &[BinRow], metric: Metric, layout: &ArenaLayout, n_quad: usize, notes: &[String]) -> MetricReport {
    let chance = chance_level(layout, metric);
    let mut report = MetricReport {
        metric: metric.as_str().to_string(),
        experiment_id: layout.experiment_id.clone(),
        chance,
        status: INSUFFICIENT.to_string(),
        n_chicks: 0,
        n_obs: 0,
        fit: None,
        wald: None,
        emm: None,
        notes: notes.to_vec(),
    };
    if !layout.metric_applies(metric) {
        report.notes.push(format!("layout {} has no {metric} cue", layout.experiment_id));
        return report;
    }
    let data = match ModelData::from_bin_rows(rows, metric) {
        Ok(d) => d,
        Err(e) => {
            report.notes.push(e.to_string());
            return report;
        }
    };
    report.n_chicks = data.chicks().len();
    report.n_obs = data.n_obs();
    if report.n_chicks < 2 || data.bins().len() < 2 {
        report
            .notes
            .push(format!("{} chicks and {} bins with data; need at least 2 of each", report.n_chicks, data.bins().len()));
        return report;
    }
    let opts = FitOptions {
        n_quad,
        ..FitOptions::default()
    };
    let fit = match fit_beta_mixed(&data, &opts) {
        Ok(f) => f,
        Err(e) => {
            report.status = format!("fit failed: {e}");
            return report;
        }
    };
    report.status = "ok".to_string();
    annotate(&fit, &mut report.notes);
    match wald_type3(&fit) {
        Ok(w) => report.wald = Some(w),
        Err(e) => report.notes.push(format!("wald test unavailable: {e}")),
    }
    match emmeans_vs_chance(&fit, chance, EmmAveraging::Link) {
        Ok(e) => report.emm = Some(e),
        Err(e) => report.notes.push(format!("marginal means unavailable: {e}")),
    }
    report.fit = Some(fit);
    report
}

fn annotate(fit: &ModelFit, notes: &mut Vec<String>) {
    if fit.clamp_events > 0 {
        notes.push(format!("{} likelihood evaluations hit the numeric floor", fit.clamp_events));
    }
    if fit.phi_at_bound {
        notes.push("precision estimate at its bound".into());
    }
    if fit.sigma_at_bound {
        notes.push("random-intercept SD at its lower bound (no detectable between-chick variation)".into());
    }
    let missing = fit.missing_bins();
    if !missing.is_empty() {
        notes.push(format!("bins without data: {missing:?}"));
    }
    if !fit.converged {
        notes.push(format!("optimizer did not converge (gradient max-norm {:.3e})", fit.grad_norm));
    }
}

fn render_text(r: &MetricReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "metric: {}  experiment: {}  chance: {:.3}", r.metric, r.experiment_id, r.chance);
    let _ = writeln!(s, "status: {}", r.status);
    if let Some(fit) = &r.fit {
        let _ = writeln!(s, "observations: {}  chicks: {}  bins: {}  quadrature nodes: {}", fit.n_obs, fit.n_chicks, fit.n_bins, fit.n_quad);
        let _ = writeln!(s, "\nfixed effects (logit scale)");
        for (i, name) in fit.coef_names.iter().enumerate() {
            let se = fit.se.as_ref().map(|v| format!("{:.4}", v[i])).unwrap_or_else(|| "NA".into());
            let _ = writeln!(s, "  {:<12} {:>9.4}  se {}", name, fit.beta[i], se);
        }
        let _ = writeln!(s, "  phi {:.4}  sigma {:.4}", fit.phi(), fit.sigma());
        let _ = writeln!(
            s,
            "  loglik {:.4}  AIC {:.4}  converged {}  gradient {:.2e}",
            fit.loglik, fit.aic, fit.converged, fit.grad_norm
        );
    }
    if let Some(w) = &r.wald {
        let _ = writeln!(s, "\nWald chi2({}) = {:.3}, p = {:.4e}", w.df, w.chi2, w.p);
    }
    if let Some(e) = &r.emm {
        let _ = writeln!(s, "\nmarginal means vs chance {:.3}", e.chance);
        for b in e.bins.iter().chain(std::iter::once(&e.overall)) {
            let label = b.bin.map(|k| format!("bin {k}")).unwrap_or_else(|| "overall".into());
            let _ = writeln!(s, "  {:<8} {:.4} (se {:.4})  z {:>8.3}  p {:.4e}", label, b.mean, b.se_mean, b.z, b.p);
        }
    }
    for n in &r.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}
