//! Reads finished runs and puts them on one epoch grid.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use s2qn::experiment::{RunConfig, Summary, METRICS_FILE, RESOLVED_FILE, SUMMARY_FILE};

use crate::svg::{self, Series};
use crate::CliError;

pub struct Run {
    pub label: String,
    pub config: RunConfig,
    /// `(epoch, value)` in file order.
    pub points: Vec<(f64, f64)>,
}

fn artifact_err(path: &Path, msg: impl ToString) -> CliError {
    CliError::Artifact { path: path.to_path_buf(), msg: msg.to_string() }
}

fn run_dir(arg: &Path) -> Result<PathBuf, CliError> {
    if arg.is_dir() {
        return Ok(arg.to_path_buf());
    }
    if !arg.exists() {
        return Err(artifact_err(arg, "no such run directory or config"));
    }
    let cfg = RunConfig::from_path(arg)?;
    cfg.output_dir.ok_or_else(|| CliError::NoOutput(arg.to_path_buf()))
}

/// Loads one run. `metric` is the CSV column to read.
fn load(arg: &Path, metric: &str) -> Result<Run, CliError> {
    let dir = run_dir(arg)?;
    let resolved = dir.join(RESOLVED_FILE);
    let text = fs::read_to_string(&resolved).map_err(|e| artifact_err(&resolved, e))?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|e| artifact_err(&resolved, e))?;
    let summary_path = dir.join(SUMMARY_FILE);
    let summary: Summary = fs::read_to_string(&summary_path)
        .map_err(|e| artifact_err(&summary_path, e))
        .and_then(|t| serde_json::from_str(&t).map_err(|e| artifact_err(&summary_path, e)))?;

    let metrics = dir.join(METRICS_FILE);
    let mut rdr = csv::Reader::from_path(&metrics).map_err(|e| artifact_err(&metrics, e))?;
    let headers = rdr.headers().map_err(|e| artifact_err(&metrics, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| artifact_err(&metrics, format!("no {name} column")));
    let (ie, iv) = (col("epoch")?, col(metric)?);
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| artifact_err(&metrics, e))?;
        let parse = |i: usize| rec.get(i).filter(|s| !s.is_empty()).map(|s| s.parse::<f64>());
        match (parse(ie), parse(iv)) {
            (Some(Ok(e)), Some(Ok(v))) => points.push((e, v)),
            (_, None) => {}
            _ => return Err(artifact_err(&metrics, "unparsable number")),
        }
    }
    Ok(Run { label: format!("{} seed={}", summary.method, summary.seed), config, points })
}

/// Value of the last point at or before `epoch`.
fn at(points: &[(f64, f64)], epoch: f64) -> Option<f64> {
    let n = points.partition_point(|p| p.0 <= epoch);
    n.checked_sub(1).map(|i| points[i].1)
}

pub fn compare(args: &[PathBuf], out: Option<&Path>, plot: Option<&Path>) -> Result<(), CliError> {
    // relative error when every run has a reference value, loss otherwise
    let mut runs = args.iter().map(|a| load(a, "relerr")).collect::<Result<Vec<_>, _>>()?;
    let metric = if runs.iter().all(|r| !r.points.is_empty()) {
        "relerr"
    } else {
        runs = args.iter().map(|a| load(a, "loss")).collect::<Result<Vec<_>, _>>()?;
        "loss"
    };
    let first = &runs[0].config.problem;
    if let Some((i, _)) = runs.iter().enumerate().find(|(_, r)| &r.config.problem != first) {
        return Err(CliError::Mismatch(format!("{} solves a different problem than {}", args[i].display(), args[0].display())));
    }

    let mut grid: Vec<f64> = runs.iter().flat_map(|r| r.points.iter().map(|p| p.0)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["epoch".to_string()];
    header.extend(runs.iter().map(|r| r.label.clone()));
    w.write_record(&header)?;
    let mut max_gap: f64 = 0.0;
    for &e in &grid {
        let vals: Vec<Option<f64>> = runs.iter().map(|r| at(&r.points, e)).collect();
        let present: Vec<f64> = vals.iter().flatten().copied().collect();
        if present.len() == vals.len() {
            let (lo, hi) = present.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            max_gap = max_gap.max(hi - lo);
        }
        let mut rec = vec![format!("{e:e}")];
        rec.extend(vals.iter().map(|v| v.map(|x| format!("{x:e}")).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    match out {
        Some(p) => fs::write(p, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }

    if let Some(p) = plot {
        let series: Vec<Series> = runs.iter().map(|r| Series { label: &r.label, points: &r.points }).collect();
        fs::write(p, svg::line_plot(&series, metric))?;
    }
    eprintln!("metric={metric} runs={} points={} max_gap={max_gap:e}", runs.len(), grid.len());
    Ok(())
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}
