//! Per-step diagnostics as CSV, one row per time level including `t = 0`.
//! Values are written with 17 significant digits so every `f64` re-parses
//! to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::integrator::TrajectoryRecord;

pub const TIMESERIES_HEADER: &str = "t,h_norm,v_norm_sq,da_norm_sq,dissipation,constraint_err,mu_n";

/// One parsed CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeseriesRow {
    pub t: f64,
    pub h_norm: f64,
    pub v_norm_sq: f64,
    pub da_norm_sq: f64,
    pub dissipation: f64,
    pub constraint_err: f64,
    pub mu_n: f64,
}

impl TimeseriesRow {
    fn values(&self) -> [f64; 7] {
        [
            self.t,
            self.h_norm,
            self.v_norm_sq,
            self.da_norm_sq,
            self.dissipation,
            self.constraint_err,
            self.mu_n,
        ]
    }
}

pub fn timeseries_rows(traj: &TrajectoryRecord) -> Vec<TimeseriesRow> {
    traj.times
        .iter()
        .zip(&traj.diag)
        .zip(&traj.mu_series)
        .map(|((&t, d), &mu_n)| TimeseriesRow {
            t,
            h_norm: d.norms.h,
            v_norm_sq: d.norms.v_sq,
            da_norm_sq: d.norms.da_sq,
            dissipation: d.dissipation,
            constraint_err: d.constraint_err,
            mu_n,
        })
        .collect()
}

pub fn write_timeseries(traj: &TrajectoryRecord, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{TIMESERIES_HEADER}").map_err(io)?;
    for row in timeseries_rows(traj) {
        let line: Vec<String> = row.values().iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_timeseries(path: &Path) -> Result<Vec<TimeseriesRow>> {
    let io = |e| Error::io(path, e);
    let mut lines = BufReader::new(File::open(path).map_err(io)?).lines();
    let header = lines.next().transpose().map_err(io)?.unwrap_or_default();
    if header != TIMESERIES_HEADER {
        return Err(Error::Format(format!(
            "{}: unrecognized time series header `{header}`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        let bad = || Error::Format(format!("{}: malformed row {}", path.display(), i + 1));
        let v = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let [t, h_norm, v_norm_sq, da_norm_sq, dissipation, constraint_err, mu_n] = v[..] else {
            return Err(bad());
        };
        rows.push(TimeseriesRow {
            t,
            h_norm,
            v_norm_sq,
            da_norm_sq,
            dissipation,
            constraint_err,
            mu_n,
        });
    }
    Ok(rows)
}
