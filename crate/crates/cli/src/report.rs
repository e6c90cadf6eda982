use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde_json::Value;

use crate::manifest::{read_input, MANIFEST_FILE};
use crate::preprocess::{EXCLUSIONS_FILE, QC_FILE};
use crate::{CmdResult, Failure, ReportArgs};

fn num(v: &Value, path: &[&str]) -> Option<f64> {
    path.iter().try_fold(v, |acc, k| acc.get(*k))?.as_f64()
}

fn fits_in(dir: &Path) -> Result<Vec<Value>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.starts_with("fit_") && n.ends_with(".json"))
        .collect();
    names.sort();
    names
        .iter()
        .map(|n| serde_json::from_slice(&read_input(&dir.join(n))?).with_context(|| format!("parsing {n}")))
        .collect()
}

fn section(dir: &Path, s: &mut String) -> Result<()> {
    let manifest: Value = serde_json::from_slice(&read_input(&dir.join(MANIFEST_FILE))?)
        .with_context(|| format!("parsing {}", dir.join(MANIFEST_FILE).display()))?;
    let cmd = manifest.get("command").and_then(Value::as_str).unwrap_or("?");
    let exp = manifest.get("experiment_id").and_then(Value::as_str).unwrap_or("?");
    let _ = writeln!(s, "== {} ({cmd}, {exp})", dir.display());
    let _ = writeln!(
        s,
        "inputs: {}  input hash: {}",
        manifest.get("inputs").and_then(Value::as_array).map_or(0, Vec::len),
        manifest.get("input_hash").and_then(Value::as_str).unwrap_or("?")
    );

    let qc = dir.join(QC_FILE);
    if qc.exists() {
        let text = String::from_utf8(read_input(&qc)?)?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        if let (Some(ci), Some(ii)) = (col("clamped_s"), col("interpolated_s")) {
            let (mut clamped, mut interp) = (0u64, 0u64);
            for l in lines {
                let f: Vec<&str> = l.split(',').collect();
                clamped += f.get(ci).and_then(|v| v.parse::<u64>().ok()).unwrap_or(0);
                interp += f.get(ii).and_then(|v| v.parse::<u64>().ok()).unwrap_or(0);
            }
            let _ = writeln!(s, "interpolated seconds: {interp}  clamped seconds: {clamped}");
        }
    }

    let excl = dir.join(EXCLUSIONS_FILE);
    if excl.exists() {
        let text = String::from_utf8(read_input(&excl)?)?;
        let rows: Vec<&str> = text.lines().skip(1).filter(|l| !l.is_empty()).collect();
        let _ = writeln!(s, "exclusions: {}", rows.len());
        for r in rows {
            let _ = writeln!(s, "  {r}");
        }
    }

    for fit in fits_in(dir)? {
        let metric = fit.get("metric").and_then(Value::as_str).unwrap_or("?");
        let status = fit.get("status").and_then(Value::as_str).unwrap_or("?");
        let chance = num(&fit, &["chance"]).unwrap_or(f64::NAN);
        let _ = write!(s, "{metric:<10} chance {chance:.3}  ");
        if status != "ok" {
            let _ = writeln!(s, "{status}");
            continue;
        }
        match (num(&fit, &["wald", "chi2"]), num(&fit, &["wald", "df"]), num(&fit, &["wald", "p"])) {
            (Some(c), Some(df), Some(p)) => {
                let _ = write!(s, "chi2({df}) = {c:.3}, p = {p:.3e}  ");
            }
            _ => {
                let _ = write!(s, "chi2 NA  ");
            }
        }
        match (num(&fit, &["emm", "overall", "mean"]), num(&fit, &["emm", "overall", "z"]), num(&fit, &["emm", "overall", "p"])) {
            (Some(m), Some(z), Some(p)) => {
                let _ = write!(s, "EMM {m:.3}, z = {z:.3}, p = {p:.3e}");
            }
            _ => {
                let _ = write!(s, "EMM NA");
            }
        }
        let converged = fit.get("fit").and_then(|f| f.get("converged")).and_then(Value::as_bool);
        if converged == Some(false) {
            let _ = write!(s, "  [not converged]");
        }
        let _ = writeln!(s);
        if let Some(bins) = fit.get("emm").and_then(|e| e.get("bins")).and_then(Value::as_array) {
            for b in bins {
                let _ = writeln!(
                    s,
                    "    bin {}: {:.3} (p = {:.3e})",
                    b.get("bin").and_then(Value::as_u64).unwrap_or(0),
                    num(b, &["mean"]).unwrap_or(f64::NAN),
                    num(b, &["p"]).unwrap_or(f64::NAN)
                );
            }
        }
        for n in fit.get("notes").and_then(Value::as_array).into_iter().flatten() {
            let _ = writeln!(s, "    note: {}", n.as_str().unwrap_or(""));
        }
    }
    Ok(())
}

pub fn run(args: &ReportArgs) -> CmdResult {
    let mut s = String::new();
    for dir in &args.dirs {
        if !dir.is_dir() {
            return Err(Failure::Data(anyhow!("{} is not a directory", dir.display())));
        }
        section(dir, &mut s)?;
    }
    print!("{s}");
    if let Some(path) = &args.out {
        std::fs::write(path, &s).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
