//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! reading a file back reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use visclimit::hopf_cole::{KsParams, KsState};
use visclimit::{DiagnosticsRecord, Grid1D, State};

pub const STATE_HEADER: [&str; 3] = ["x", "u", "v"];
pub const DIAGNOSTICS_HEADER: [&str; 10] = [
    "t",
    "entropy_total",
    "dissipation_v",
    "dissipation_u",
    "mass_u",
    "mass_v_excess",
    "min_v",
    "sup_abs_ux",
    "h2_u",
    "h2_v",
];
pub const KS_HEADER: [&str; 4] = ["t", "x", "c", "u"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: String) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        message,
    }
}

fn write_rows<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl Iterator<Item = [f64; N]>,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.map(fmt)).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_rows<const N: usize>(path: &Path, header: [&str; N]) -> Result<Vec<[f64; N]>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = r.headers().map_err(csv_err(path))?.clone();
    if found.iter().ne(header) {
        return Err(format_err(
            path,
            format!(
                "expected columns {}, found {}",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let mut row = [0.0; N];
        for (slot, field) in row.iter_mut().zip(rec.iter()) {
            *slot = field.parse().map_err(|_| {
                format_err(path, format!("row {}: `{field}` is not a number", i + 2))
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn emit_state_csv(state: &State, grid: &Grid1D, path: &Path) -> Result<(), IoError> {
    write_rows(
        path,
        STATE_HEADER,
        (0..state.len()).map(|i| [grid.x(i), state.u[i], state.v[i]]),
    )
}

/// Columns of a state CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTable {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn read_state_csv(path: &Path) -> Result<StateTable, IoError> {
    let rows = read_rows(path, STATE_HEADER)?;
    Ok(StateTable {
        x: rows.iter().map(|r| r[0]).collect(),
        u: rows.iter().map(|r| r[1]).collect(),
        v: rows.iter().map(|r| r[2]).collect(),
    })
}

pub fn emit_diagnostics_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<(), IoError> {
    write_rows(
        path,
        DIAGNOSTICS_HEADER,
        records.iter().map(|d| {
            [
                d.t,
                d.entropy_total,
                d.dissipation_v,
                d.dissipation_u,
                d.mass_u,
                d.mass_v_excess,
                d.min_v,
                d.sup_abs_ux,
                d.h2_u,
                d.h2_v,
            ]
        }),
    )
}

pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>, IoError> {
    Ok(read_rows(path, DIAGNOSTICS_HEADER)?
        .into_iter()
        .map(|r| DiagnosticsRecord {
            t: r[0],
            entropy_total: r[1],
            dissipation_v: r[2],
            dissipation_u: r[3],
            mass_u: r[4],
            mass_v_excess: r[5],
            min_v: r[6],
            sup_abs_ux: r[7],
            h2_u: r[8],
            h2_v: r[9],
        })
        .collect())
}

pub fn emit_ks_csv(trajectory: &[KsState], grid: &Grid1D, path: &Path) -> Result<(), IoError> {
    write_rows(
        path,
        KS_HEADER,
        trajectory
            .iter()
            .flat_map(|s| (0..s.c.len()).map(move |i| [s.t, grid.x(i), s.c[i], s.u[i]])),
    )
}

/// Reads a long-format Keller-Segel trajectory: rows grouped by ascending
/// `t`, each group listing the same uniformly spaced nodes in ascending `x`.
pub fn read_ks_csv(path: &Path, params: KsParams) -> Result<(Grid1D, Vec<KsState>), IoError> {
    let rows = read_rows(path, KS_HEADER)?;
    let mut groups: Vec<Vec<[f64; 4]>> = Vec::new();
    for row in rows {
        match groups.last_mut() {
            Some(g) if g[0][0] == row[0] => g.push(row),
            Some(g) if row[0] < g[0][0] => {
                return Err(format_err(
                    path,
                    format!("time {} after {}", row[0], g[0][0]),
                ))
            }
            _ => groups.push(vec![row]),
        }
    }
    let first = groups
        .first()
        .ok_or_else(|| format_err(path, "no rows".into()))?;
    let xs: Vec<f64> = first.iter().map(|r| r[1]).collect();
    if groups
        .iter()
        .any(|g| g.iter().map(|r| r[1]).ne(xs.iter().copied()))
    {
        return Err(format_err(
            path,
            "time levels do not share the same nodes".into(),
        ));
    }
    let n_cells = xs.len().saturating_sub(1);
    let grid =
        Grid1D::new(xs[0], xs[n_cells], n_cells).map_err(|e| format_err(path, e.to_string()))?;
    let dx = grid.dx();
    if let Some((i, x)) = xs
        .iter()
        .enumerate()
        .find(|(i, x)| (*x - grid.x(*i)).abs() > 1e-9 * dx)
    {
        return Err(format_err(
            path,
            format!("node {i} at x = {x} is not uniformly spaced"),
        ));
    }
    let trajectory = groups
        .into_iter()
        .map(|g| KsState {
            t: g[0][0],
            c: g.iter().map(|r| r[2]).collect(),
            u: g.iter().map(|r| r[3]).collect(),
            params,
        })
        .collect();
    Ok((grid, trajectory))
}

pub fn emit_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let io_err = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Convergence report as JSON.
pub fn emit_report_json(report: &visclimit::ConvergenceReport, path: &Path) -> Result<(), IoError> {
    emit_json(report, path)
}

pub fn write_text(text: &str, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}
