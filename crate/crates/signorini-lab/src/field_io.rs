//! Grid field dumps: one CSV row per node with lattice index, coordinates,
//! node class, and value. Values are written with 17 significant digits so
//! a read-back is bit-exact; readers verify the file matches the grid.

use std::path::Path;

use signorini_core::grid::{Grid, ScalarField};

use crate::error::LabError;

/// Fixed 17-significant-digit scientific form; round-trips every f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_field(path: &Path, grid: &Grid, field: &ScalarField) -> Result<(), LabError> {
    let spec = grid.spec;
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let header: &[&str] = if spec.n == 2 {
            &["i", "j", "x1", "x2", "class", "value"]
        } else {
            &["i", "j", "k", "x1", "x2", "x3", "class", "value"]
        };
        w.write_record(header).map_err(csv_err)?;
        for idx in 0..spec.node_count() {
            let ijk = spec.ijk(idx);
            let x = spec.position(idx);
            let mut rec: Vec<String> = Vec::with_capacity(2 * spec.n + 2);
            for &i in ijk.iter().take(spec.n) {
                rec.push(i.to_string());
            }
            for &xi in x.iter().take(spec.n) {
                rec.push(fmt_float(xi));
            }
            rec.push(grid.class(idx).as_str().to_string());
            rec.push(fmt_float(field.at(idx)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
    }
    crate::runner::write_atomic(path, &out)
}

pub fn read_field(path: &Path, grid: &Grid) -> Result<ScalarField, LabError> {
    let spec = grid.spec;
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::invalid(format!("field file {}: {e}", path.display())))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut field = ScalarField::constant(spec, f64::NAN);
    let mut seen = vec![false; spec.node_count()];
    let want = 2 * spec.n + 2;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != want {
            return Err(LabError::invalid(format!(
                "field row {line}: {} columns, grid wants {want}",
                rec.len()
            )));
        }
        let mut ijk = [0usize; 3];
        for (a, slot) in ijk.iter_mut().enumerate().take(spec.n) {
            *slot = rec[a]
                .parse::<usize>()
                .map_err(|e| LabError::invalid(format!("field row {line}: {e}")))?;
            if *slot >= spec.size {
                return Err(LabError::invalid(format!(
                    "field row {line}: index out of range"
                )));
            }
        }
        let idx = spec.flat(ijk);
        let x = spec.position(idx);
        for a in 0..spec.n {
            let xi: f64 = rec[spec.n + a]
                .parse()
                .map_err(|e| LabError::invalid(format!("field row {line}: {e}")))?;
            if (xi - x[a]).abs() > 1e-12 {
                return Err(LabError::invalid(format!(
                    "field row {line}: coordinate {xi} does not lie on this grid"
                )));
            }
        }
        let class = &rec[2 * spec.n];
        if class != grid.class(idx).as_str() {
            return Err(LabError::invalid(format!(
                "field row {line}: node class `{class}` does not match the grid"
            )));
        }
        let v: f64 = rec[2 * spec.n + 1]
            .parse()
            .map_err(|e| LabError::invalid(format!("field row {line}: {e}")))?;
        field.set(idx, v);
        seen[idx] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(LabError::invalid(
            "field file does not cover every grid node",
        ));
    }
    Ok(field)
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::new("io", e.to_string())
}
