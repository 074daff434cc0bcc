//! CSV reading and writing.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses back
//! to the identical `f64`. Index lists are semicolon-joined and 0-based.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, SihtError};
use crate::solver::SolveResult;
use crate::types::{LossKind, ProblemInstance, TrajectoryRecord};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn join_indices(idx: &[usize]) -> String {
    let mut out = String::new();
    for (k, i) in idx.iter().enumerate() {
        if k > 0 {
            out.push(';');
        }
        let _ = write!(out, "{i}");
    }
    out
}

fn io_err(path: &Path, source: std::io::Error) -> SihtError {
    SihtError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut out = String::from("k,f,support,grad_norm_sq_restricted,batch\n");
    for row in &record.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.k,
            fmt_f64(row.objective),
            join_indices(&row.support),
            fmt_f64(row.grad_norm_sq_restricted),
            join_indices(&row.batch)
        );
    }
    out
}

pub fn summary_csv(results: &[SolveResult]) -> String {
    let mut out = String::from("seed,final_f,iterations,stop_reason,support\n");
    for r in results {
        let t = &r.trajectory;
        let last = t.rows.last().map(|row| row.objective).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.seed,
            fmt_f64(last),
            t.iterations(),
            r.stop_reason.name(),
            join_indices(r.final_iterate.support().indices())
        );
    }
    out
}

/// Rows of reals, one line per row, comma-separated.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn vector_csv(v: &[f64]) -> String {
    let mut out = String::new();
    for x in v {
        out.push_str(&fmt_f64(*x));
        out.push('\n');
    }
    out
}

fn parse_rows(path: &Path, text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| SihtError::Parse {
                    path: path.display().to_string(),
                    line: ln + 1,
                    message: format!("`{}`: {e}", tok.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows = parse_rows(path, &read_text(path)?)?;
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n == 0 {
        return Err(SihtError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "no data".into(),
        });
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(SihtError::Parse {
            path: path.display().to_string(),
            line: bad + 1,
            message: format!("expected {n} columns, found {}", rows[bad].len()),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let rows = parse_rows(path, &read_text(path)?)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [v] => Ok(*v),
            _ => Err(SihtError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: "expected one value per line".into(),
            }),
        })
        .collect()
}

pub const DESIGN_FILE: &str = "V.csv";
pub const TARGETS_FILE: &str = "y.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Writes `V.csv` and `y.csv` (and `ground_truth.csv` if given) into `dir`.
pub fn write_instance(dir: &Path, inst: &ProblemInstance, x_star: Option<&[f64]>) -> Result<()> {
    write_text(&dir.join(DESIGN_FILE), &matrix_csv(inst.design()))?;
    write_text(&dir.join(TARGETS_FILE), &vector_csv(inst.targets()))?;
    if let Some(x) = x_star {
        write_text(&dir.join(GROUND_TRUTH_FILE), &vector_csv(x))?;
    }
    Ok(())
}

pub fn read_instance(dir: &Path, loss: LossKind) -> Result<ProblemInstance> {
    let design = read_matrix(&dir.join(DESIGN_FILE))?;
    let targets = read_vector(&dir.join(TARGETS_FILE))?;
    ProblemInstance::new(design, targets, loss)
}
