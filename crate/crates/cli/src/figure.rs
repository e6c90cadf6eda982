use std::collections::BTreeMap;
use std::fmt::Write as _;

use ari_core::betamm::EmmResult;
use ari_core::metrics::BinRow;
use ari_core::Metric;

/// Per-bin descriptive statistics behind one figure.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSummary {
    pub bin: u32,
    pub n: usize,
    pub mean: Option<f64>,
    pub sem: Option<f64>,
    pub emm: Option<f64>,
}

pub fn bin_summary(rows: &[BinRow], metric: Metric, emm: Option<&EmmResult>) -> Vec<BinSummary> {
    let mut by_bin: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let entry = by_bin.entry(r.bin).or_default();
        if let Some(v) = r.value {
            entry.push(v);
        }
    }
    by_bin
        .into_iter()
        .map(|(bin, vals)| {
            let n = vals.len();
            let mean = (n > 0).then(|| vals.iter().sum::<f64>() / n as f64);
            let sem = (n > 1).then(|| {
                let m = mean.unwrap_or(0.0);
                let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            });
            let emm = emm.and_then(|e| e.bins.iter().find(|b| b.bin == Some(bin)).map(|b| b.mean));
            BinSummary { bin, n, mean, sem, emm }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(summary: &[BinSummary], chance: f64) -> String {
    let mut s = String::from("bin,n,mean,sem,emm,chance\n");
    for b in summary {
        let _ = writeln!(s, "{},{},{},{},{},{}", b.bin, b.n, opt(b.mean), opt(b.sem), opt(b.emm), chance);
    }
    s
}

const W: f64 = 480.0;
const H: f64 = 320.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Line chart of per-bin means with SEM bars on a [0, 1] axis and a red
/// dashed line at the chance level.
pub fn render_svg(summary: &[BinSummary], metric: Metric, experiment_id: &str, chance: f64) -> String {
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let n = summary.len().max(1);
    let x = |i: usize| LEFT + pw * (i as f64 + 0.5) / n as f64;
    let y = |v: f64| TOP + ph * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<title>{experiment_id}: {metric} preference by time bin</title>"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, LEFT + pw, TOP, TOP + ph);
    let _ = writeln!(s, r#"<path d="M{x0} {y0} V{y1} H{x1}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{yy:.2}" x2="{x0}" y2="{yy:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            x0 - 4.0,
            x0 - 7.0,
            y(v) + 4.0,
            yy = y(v)
        );
    }
    for (i, b) in summary.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, x(i), y1 + 16.0, b.bin);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">time bin</text>"#, LEFT + pw / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{metric} preference</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let _ = writeln!(
        s,
        r#"<line class="chance" data-chance="{chance:.3}" x1="{x0}" y1="{cy:.2}" x2="{x1}" y2="{cy:.2}" stroke="red" stroke-dasharray="6 4"/>"#,
        cy = y(chance)
    );
    let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end" fill="red">chance {chance:.3}</text>"#, x1, y(chance) - 4.0);

    let points: Vec<String> = summary
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.mean.map(|m| format!("{:.2},{:.2}", x(i), y(m))))
        .collect();
    if points.len() > 1 {
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black"/>"#, points.join(" "));
    }
    for (i, b) in summary.iter().enumerate() {
        let Some(m) = b.mean else { continue };
        if let Some(e) = b.sem {
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                y(m - e),
                y(m + e),
                cx = x(i)
            );
        }
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="black"/>"#, x(i), y(m));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(chick: &str, bin: u32, value: Option<f64>) -> BinRow {
        BinRow {
            chick_id: chick.into(),
            experiment_id: "exp2".into(),
            bin,
            metric: Metric::Heating,
            value,
            chance: 0.5,
            in_zone_s: 10,
            bin_s: 300,
            truncated: false,
        }
    }

    #[test]
    fn summary_statistics() {
        let rows = vec![row("a", 1, Some(0.2)), row("b", 1, Some(0.6)), row("a", 2, None), row("b", 2, Some(0.9))];
        let s = bin_summary(&rows, Metric::Heating, None);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].n, 2);
        assert!((s[0].mean.unwrap() - 0.4).abs() < 1e-12);
        assert!((s[0].sem.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!((s[1].n, s[1].sem), (1, None));
        assert!(bin_summary(&rows, Metric::Face, None).is_empty());
    }

    #[test]
    fn svg_has_chance_line_and_points() {
        let rows = vec![row("a", 1, Some(0.2)), row("b", 1, Some(0.6)), row("b", 2, Some(0.9))];
        let svg = render_svg(&bin_summary(&rows, Metric::Heating, None), Metric::Heating, "exp2", 0.074_074);
        assert!(svg.contains(r#"data-chance="0.074""#));
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
