//! Report serialization.
//!
//! JSON reports carry `"schema": "shapegrad-report/1"`. CSV files have a fixed
//! header, RFC 4180 quoting and floats with 17 significant digits; an empty cell
//! means the value is undefined (e.g. the order column of the first row).
//!
//! | file          | columns |
//! |---------------|---------|
//! | `fd.csv`      | `s, j_plus, j_minus, central, forward, central_error, forward_error, central_order, forward_order, status, flag` |
//! | `taylor.csv`  | `s, remainder, order, flag` |
//! | `dj.csv`      | `term, value` |
//! | `checks.csv`  | `name, value, bound, threshold, passed` |

use serde::Serialize;

use crate::error::{Error, Result};
use crate::shape::DjBreakdown;
use crate::validation::{Bound, Check, FdCriteria, FdTable, TaylorTable};

pub const SCHEMA: &str = "shapegrad-report/1";

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn fd_csv(table: &FdTable, criteria: &FdCriteria) -> Result<String> {
    let status = table.row_status(criteria);
    csv_text(
        &[
            "s",
            "j_plus",
            "j_minus",
            "central",
            "forward",
            "central_error",
            "forward_error",
            "central_order",
            "forward_order",
            "status",
            "flag",
        ],
        table.rows.iter().zip(status).map(|(r, ok)| {
            vec![
                float(r.s),
                opt(r.j_plus),
                opt(r.j_minus),
                opt(r.central),
                opt(r.forward),
                opt(r.central_error),
                opt(r.forward_error),
                opt(r.central_order),
                opt(r.forward_order),
                if ok { "pass" } else { "fail" }.to_string(),
                r.flag.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn taylor_csv(table: &TaylorTable) -> Result<String> {
    csv_text(
        &["s", "remainder", "order", "flag"],
        table.rows.iter().map(|r| vec![float(r.s), opt(r.remainder), opt(r.order), r.flag.clone().unwrap_or_default()]),
    )
}

pub fn dj_csv(dj: &DjBreakdown) -> Result<String> {
    let terms = [
        ("s0", dj.s0),
        ("s1", dj.s1),
        ("s2", dj.s2),
        ("boundary_s0", dj.boundary_s0),
        ("boundary_s1", dj.boundary_s1),
        ("dt_pairing", dj.dt_pairing),
        ("initial_residual", dj.initial_residual),
        ("total", dj.total()),
    ];
    csv_text(&["term", "value"], terms.iter().map(|(n, v)| vec![n.to_string(), float(*v)]))
}

pub fn checks_csv(checks: &[Check]) -> Result<String> {
    csv_text(
        &["name", "value", "bound", "threshold", "passed"],
        checks.iter().map(|c| {
            vec![
                c.name.clone(),
                opt(c.value),
                match c.bound {
                    Bound::AtMost => "at_most",
                    Bound::AtLeast => "at_least",
                }
                .to_string(),
                float(c.threshold),
                c.passed.to_string(),
            ]
        }),
    )
}

/// Pretty JSON with a trailing newline; non-finite floats become `null`.
pub fn json_text(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    s.push('\n');
    Ok(s)
}

/// `dJ` breakdown with its total, in report form.
pub fn dj_json(dj: &DjBreakdown) -> serde_json::Value {
    let mut v = serde_json::to_value(dj).expect("plain struct");
    v["total"] = dj.total().into();
    v
}
