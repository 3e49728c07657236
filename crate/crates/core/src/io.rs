//! Solution CSV (`x,u,region`) and `key=value` report files.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, Mesh, Region};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SolutionRow {
    pub x: f64,
    pub u: f64,
    pub region: String,
}

/// Writes one row per cell with 17 significant digits.
pub fn write_solution_csv(out: impl Write, mesh: &Mesh, u: &GridFunction) -> Result<()> {
    if u.len() != mesh.len() {
        return Err(Error::Csv(format!(
            "{} values for {} cells",
            u.len(),
            mesh.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(["x", "u", "region"]).map_err(csv_err)?;
    for (c, v) in mesh.cells().iter().zip(u.values()) {
        w.write_record([
            format!("{:.16e}", c.center),
            format!("{v:.16e}"),
            c.region.name().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses solution rows; every value must be finite and every region
/// `interior` or `exterior`.
pub fn parse_solution_csv(input: impl Read) -> Result<Vec<SolutionRow>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = r.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "u", "region"] {
        return Err(Error::Csv(format!(
            "expected header x,u,region, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (k, rec) in r.deserialize::<SolutionRow>().enumerate() {
        let row = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if !(row.x.is_finite() && row.u.is_finite()) {
            return Err(Error::Csv(format!("row {}: non-finite value", k + 1)));
        }
        if row.region != Region::Interior.name() && row.region != Region::Exterior.name() {
            return Err(Error::Csv(format!(
                "row {}: unknown region {:?}",
                k + 1,
                row.region
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a solution and checks it against the cells of `mesh`.
pub fn read_solution_csv(input: impl Read, mesh: &Mesh) -> Result<GridFunction> {
    let rows = parse_solution_csv(input)?;
    if rows.len() != mesh.len() {
        return Err(Error::Csv(format!(
            "{} rows for {} cells",
            rows.len(),
            mesh.len()
        )));
    }
    for (k, (row, c)) in rows.iter().zip(mesh.cells()).enumerate() {
        if (row.x - c.center).abs() > 1e-12 * c.center.abs().max(1.0)
            || row.region != c.region.name()
        {
            return Err(Error::Csv(format!(
                "row {}: ({}, {}) does not match cell center {} ({})",
                k + 1,
                row.x,
                row.region,
                c.center,
                c.region.name()
            )));
        }
    }
    GridFunction::new(rows.into_iter().map(|r| r.u).collect())
}

pub fn write_key_values<K: AsRef<str>>(mut out: impl Write, pairs: &[(K, String)]) -> Result<()> {
    for (k, v) in pairs {
        writeln!(out, "{}={v}", k.as_ref())?;
    }
    Ok(())
}
