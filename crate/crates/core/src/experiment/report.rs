//! Cross-run comparison of saved traces.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::nofv;
use crate::solvers::trace::{format_f64, load_csv};
use crate::solvers::TraceRow;

/// A labelled trace loaded from disk.
#[derive(Clone, Debug)]
pub struct NamedTrace {
    pub label: String,
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Finding {
    pub label: String,
    /// First `k` at which this run's NOFV is below the PPGA run's, if any.
    pub first_below_ppga: Option<usize>,
    pub final_nofv: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub labels: Vec<String>,
    pub reference_phi: f64,
    pub findings: Vec<Finding>,
    /// Wide CSV text keyed by metric name (`phi`, `re`, `nofv`).
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

fn wide_table(traces: &[NamedTrace], value: impl Fn(&TraceRow) -> f64) -> String {
    let mut s = String::from("k");
    for t in traces {
        s.push(',');
        s.push_str(&t.label);
    }
    s.push('\n');
    for i in 0..traces[0].rows.len() {
        let _ = write!(s, "{}", traces[0].rows[i].k);
        for t in traces {
            s.push(',');
            s.push_str(&format_f64(value(&t.rows[i])));
        }
        s.push('\n');
    }
    s
}

/// Aligns `traces` on a common iteration grid and tabulates `phi`, `re`
/// and NOFV. `reference_phi` defaults to the lowest objective seen.
pub fn compare_report(traces: &[NamedTrace], reference_phi: Option<f64>) -> Result<CompareReport> {
    let Some(first) = traces.first() else {
        return Err(Error::shape("no traces to compare"));
    };
    if first.rows.is_empty() {
        return Err(Error::shape(format!("trace {:?} is empty", first.label)));
    }
    for t in traces {
        let same = t.rows.len() == first.rows.len() && t.rows.iter().zip(&first.rows).all(|(a, b)| a.k == b.k);
        if !same {
            return Err(Error::shape(format!(
                "trace {:?} has a different iteration grid from {:?}",
                t.label, first.label
            )));
        }
    }
    let reference_phi = reference_phi.unwrap_or_else(|| {
        traces
            .iter()
            .flat_map(|t| t.rows.iter().map(|r| r.phi))
            .fold(f64::INFINITY, f64::min)
    });
    let nofv_of = |t: &NamedTrace| -> Vec<f64> {
        let phi0 = t.rows[0].phi;
        t.rows
            .iter()
            .map(|r| nofv(r.phi, phi0, reference_phi).unwrap_or(f64::NAN))
            .collect()
    };
    let all_nofv: Vec<Vec<f64>> = traces.iter().map(nofv_of).collect();
    let ppga = traces.iter().position(|t| t.label.starts_with("ppga"));

    let findings = traces
        .iter()
        .zip(&all_nofv)
        .map(|(t, nv)| Finding {
            label: t.label.clone(),
            first_below_ppga: ppga.and_then(|p| {
                (1..nv.len())
                    .find(|&i| nv[i] < all_nofv[p][i])
                    .map(|i| t.rows[i].k)
            }),
            final_nofv: *nv.last().unwrap(),
        })
        .collect();

    let mut tables = vec![
        ("phi".to_string(), wide_table(traces, |r| r.phi)),
        ("re".to_string(), wide_table(traces, |r| r.re)),
    ];
    let mut nofv_table = String::from("k");
    for t in traces {
        nofv_table.push(',');
        nofv_table.push_str(&t.label);
    }
    nofv_table.push('\n');
    for (i, row) in first.rows.iter().enumerate() {
        let _ = write!(nofv_table, "{}", row.k);
        for nv in &all_nofv {
            nofv_table.push(',');
            nofv_table.push_str(&format_f64(nv[i]));
        }
        nofv_table.push('\n');
    }
    tables.push(("nofv".to_string(), nofv_table));

    Ok(CompareReport {
        labels: traces.iter().map(|t| t.label.clone()).collect(),
        reference_phi,
        findings,
        tables,
    })
}

/// Collects traces from `paths`. A directory is read as an experiment
/// output (every `runs/<label>/trace.csv`, plus the reference objective
/// from `diagnostics.json`); a file is read as a single trace named after
/// its parent directory.
pub fn load_traces(paths: &[PathBuf]) -> Result<(Vec<NamedTrace>, Option<f64>)> {
    let mut traces = Vec::new();
    let mut reference_phi: Option<f64> = None;
    for path in paths {
        if !path.exists() {
            return Err(Error::Config(format!("{} does not exist", path.display())));
        }
        if path.is_dir() {
            let runs = path.join("runs");
            let mut dirs: Vec<PathBuf> = fs::read_dir(&runs)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join("trace.csv").is_file())
                .collect();
            dirs.sort();
            for d in dirs {
                traces.push(NamedTrace {
                    label: label_of(&d),
                    rows: load_csv(&d.join("trace.csv"))?,
                });
            }
            if let Some(phi) = read_reference_phi(&path.join("diagnostics.json"))? {
                reference_phi = Some(reference_phi.map_or(phi, |r| r.min(phi)));
            }
        } else {
            let label = path.parent().map(label_of).unwrap_or_else(|| label_of(path));
            traces.push(NamedTrace {
                label,
                rows: load_csv(path)?,
            });
        }
    }
    Ok((traces, reference_phi))
}

fn label_of(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_reference_phi(path: &Path) -> Result<Option<f64>> {
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(v.get("reference_phi").and_then(|x| x.as_f64()))
}

/// Wide tables of the per-run image metrics (`psnr`, `nrc_largest`,
/// `nrc_smallest`) for every experiment directory in `paths`. A metric is
/// skipped unless every run has it on the same grid.
pub fn image_metric_tables(paths: &[PathBuf]) -> Result<Vec<(String, String)>> {
    let mut runs: Vec<PathBuf> = Vec::new();
    for path in paths.iter().filter(|p| p.is_dir()) {
        let mut dirs: Vec<PathBuf> = fs::read_dir(path.join("runs"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("trace.csv").is_file())
            .collect();
        dirs.sort();
        runs.extend(dirs);
    }
    let mut tables = Vec::new();
    if runs.is_empty() {
        return Ok(tables);
    }
    'metric: for metric in ["psnr", "nrc_largest", "nrc_smallest"] {
        let mut columns: Vec<Vec<(String, String)>> = Vec::new();
        for d in &runs {
            let Ok(text) = fs::read_to_string(d.join(format!("{metric}.csv"))) else {
                continue 'metric;
            };
            let col: Vec<(String, String)> = text
                .lines()
                .skip(1)
                .filter_map(|l| l.split_once(',').map(|(k, v)| (k.to_string(), v.to_string())))
                .collect();
            if let Some(first) = columns.first() {
                if first.len() != col.len() || first.iter().zip(&col).any(|(a, b)| a.0 != b.0) {
                    continue 'metric;
                }
            }
            columns.push(col);
        }
        let mut s = String::from("k");
        for d in &runs {
            s.push(',');
            s.push_str(&label_of(d));
        }
        s.push('\n');
        for i in 0..columns[0].len() {
            s.push_str(&columns[0][i].0);
            for c in &columns {
                s.push(',');
                s.push_str(&c[i].1);
            }
            s.push('\n');
        }
        tables.push((metric.to_string(), s));
    }
    Ok(tables)
}

/// Writes `<metric>.csv` tables and `findings.json` into `dir`.
pub fn write_report(report: &CompareReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, table) in &report.tables {
        fs::write(dir.join(format!("{name}.csv")), table)?;
    }
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("cannot serialise report: {e}")))?;
    fs::write(dir.join("findings.json"), json + "\n")?;
    Ok(())
}
