//! Per-iteration solver records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::solvers::momentum::Momentum;

pub const TRACE_HEADER: [&str; 7] = ["k", "phi", "eta", "tau", "eps", "re", "wall_ms"];

/// One trace row. Row `k` describes the iterate after `k` updates; row 0 is
/// the initial image. `eta` and `eps` are NaN without a reference solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub phi: f64,
    pub eta: f64,
    pub tau: f64,
    pub eps: f64,
    pub re: f64,
    pub wall_ms: Option<f64>,
}

/// Final dual variables of an FPPA-type run.
#[derive(Clone, Debug)]
pub struct Duals {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub rho1: f64,
    pub rho2: f64,
}

#[derive(Clone, Debug)]
pub struct SolverTrace {
    pub algorithm: String,
    pub momentum: Momentum,
    pub rows: Vec<TraceRow>,
    pub final_image: Image,
    /// Images at the requested checkpoint iterations, in increasing order.
    pub checkpoints: Vec<(usize, Image)>,
    /// Every iterate, when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
    /// `t_0, …, t_K` used for rows `0..=K`.
    pub t_values: Vec<f64>,
    /// Preconditioner diagonal at the end of the run.
    pub precond_diag: Vec<f64>,
    pub p_max: f64,
    pub effective_beta: f64,
    pub lipschitz: Option<f64>,
    pub duals: Option<Duals>,
}

impl SolverTrace {
    pub fn phi(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.phi).collect()
    }

    pub fn re(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.re).collect()
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("a trace has at least the initial row")
    }

    pub fn checkpoint(&self, k: usize) -> Option<&Image> {
        self.checkpoints.iter().find(|(c, _)| *c == k).map(|(_, img)| img)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Scientific notation with 17 significant digits; NaN and infinities use
/// Rust's `NaN`/`inf` spellings, which `str::parse::<f64>` reads back.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn write_rows<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            format_f64(r.phi),
            format_f64(r.eta),
            format_f64(r.tau),
            format_f64(r.eps),
            format_f64(r.re),
            r.wall_ms.map(format_f64).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R, label: &str) -> Result<Vec<TraceRow>> {
    let fmt = |message: String| Error::Format {
        path: label.to_string(),
        message,
    };
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| fmt(e.to_string()))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(fmt(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| fmt(format!("row {}: column {}: {e}", line + 1, TRACE_HEADER[i])))
        };
        let k = rec[0]
            .parse::<usize>()
            .map_err(|e| fmt(format!("row {}: k: {e}", line + 1)))?;
        rows.push(TraceRow {
            k,
            phi: num(1)?,
            eta: num(2)?,
            tau: num(3)?,
            eps: num(4)?,
            re: num(5)?,
            wall_ms: if rec[6].is_empty() { None } else { Some(num(6)?) },
        });
    }
    Ok(rows)
}

pub fn load_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let file = std::fs::File::open(path)?;
    read_rows(file, &path.display().to_string())
}
