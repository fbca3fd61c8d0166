//! CSV output. Column order is fixed; floats use 17 significant digits.

use std::io::Write;

use crate::epscko::SearchTrace;
use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 9] = [
    "solver",
    "scheme",
    "d",
    "seed",
    "iteration",
    "best_value",
    "worst_elite",
    "wall_ms",
    "injected",
];

pub const SUMMARY_HEADER: [&str; 7] = ["solver", "scheme", "d", "seed", "value", "stderr", "n_traj"];

/// Formats a float with 17 significant digits; infinities as `inf`/`-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Discretization column: a factor, or `continuous`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Factor(usize),
    Continuous,
}

impl std::fmt::Display for Resolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Resolution::Factor(d) => write!(f, "{d}"),
            Resolution::Continuous => f.write_str("continuous"),
        }
    }
}

/// Identifies one experiment cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub solver: String,
    pub scheme: String,
    pub d: Resolution,
    pub seed: u64,
}

/// Final value of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: CellKey,
    pub value: f64,
    pub stderr: f64,
    pub n_traj: usize,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    timing: bool,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W, timing: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(TRACE_HEADER).map_err(csv_err)?;
        Ok(TraceWriter { inner, timing })
    }

    pub fn write_trace(&mut self, key: &CellKey, trace: &SearchTrace) -> Result<()> {
        for row in &trace.rows {
            let wall = if self.timing { row.wall_ms } else { 0 };
            self.inner
                .write_record([
                    key.solver.clone(),
                    key.scheme.clone(),
                    key.d.to_string(),
                    key.seed.to_string(),
                    row.iteration.to_string(),
                    fmt_f64(row.best_value),
                    fmt_f64(row.worst_elite),
                    wall.to_string(),
                    u8::from(row.injected).to_string(),
                ])
                .map_err(csv_err)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub struct SummaryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SummaryWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(SUMMARY_HEADER).map_err(csv_err)?;
        Ok(SummaryWriter { inner })
    }

    pub fn write(&mut self, row: &SummaryRow) -> Result<()> {
        self.inner
            .write_record([
                row.key.solver.clone(),
                row.key.scheme.clone(),
                row.key.d.to_string(),
                row.key.seed.to_string(),
                fmt_f64(row.value),
                fmt_f64(row.stderr),
                row.n_traj.to_string(),
            ])
            .map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}
