//! CSV formats, atomic writes and file hashing.

use std::fs;
use std::io::Write;
use std::path::Path;

use ganland_core::jfn::JbtResult;
use ganland_core::metrics::{ConvergenceRow, MarginalCurve};
use ganland_core::train::TraceRow;
use ganland_core::Tensor;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_atomic(path, &csv_bytes(&header, rows))
}

fn point_header(dim: usize) -> Vec<String> {
    (0..dim).map(|j| format!("x{j}")).collect()
}

/// `x0,...,x{d-1}`, one point per row.
pub fn write_samples(path: &Path, points: &Tensor) -> Result<()> {
    let rows = points.iter_rows().map(|r| r.iter().map(|&v| fmt_f64(v)).collect());
    write_atomic(path, &csv_bytes(&point_header(points.cols()), rows))
}

pub fn read_samples(path: &Path) -> Result<Tensor> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    let dim = header.len();
    if dim == 0 || header != point_header(dim) {
        return Err(CliError::format(path, format!("expected header x0..x{}, got {header:?}", dim.max(1) - 1)));
    }
    let mut data = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CliError::format(path, format!("row {}: not a number: {field:?}", i + 1)))?;
            data.push(v);
        }
    }
    let n = data.len() / dim;
    Tensor::from_vec(n, dim, data).map_err(|e| CliError::format(path, e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::format(path, format!("{other:?}")),
        }
    } else {
        CliError::format(path, e.to_string())
    }
}

/// `step,disc_loss,gen_loss,precision,recall`.
pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let rows = trace.iter().map(|t| {
        vec![t.step.to_string(), fmt_f64(t.disc_loss), fmt_f64(t.gen_loss), fmt_f64(t.precision), fmt_f64(t.recall)]
    });
    write_csv(path, &["step", "disc_loss", "gen_loss", "precision", "recall"], rows)
}

/// `x0,x1,...,jfn,kept` in latent order.
pub fn write_jbt(path: &Path, r: &JbtResult) -> Result<()> {
    let mut header = point_header(r.outputs.cols());
    header.push("jfn".into());
    header.push("kept".into());
    let rows = (0..r.outputs.rows()).map(|i| {
        let mut row: Vec<String> = r.outputs.row(i).iter().map(|&v| fmt_f64(v)).collect();
        row.push(fmt_f64(r.jfn_values[i]));
        row.push(u8::from(r.kept_mask[i]).to_string());
        row
    });
    write_atomic(path, &csv_bytes(&header, rows))
}

/// `ratio,marginal_precision,cumulative_precision`.
pub fn write_curve(path: &Path, c: &MarginalCurve) -> Result<()> {
    let rows = (0..c.len()).map(|i| {
        vec![fmt_f64(c.kept_ratios[i]), fmt_f64(c.marginal_precision[i]), fmt_f64(c.cumulative_precision[i])]
    });
    write_csv(path, &["ratio", "marginal_precision", "cumulative_precision"], rows)
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            r.k.to_string(),
            r.seeds.to_string(),
            fmt_f64(r.mean_precision),
            fmt_f64(r.mean_recall),
            fmt_f64(r.target),
            fmt_f64(r.abs_error),
        ]
    });
    write_csv(path, &["n", "k", "seeds", "mean_precision", "mean_recall", "target", "abs_error"], rows)
}

/// Generic table with preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    write_csv(path, header, rows)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}
