//! Result rows and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::gcc::Status;

pub const HEADER: [&str; 11] = [
    "geometry",
    "mode",
    "v",
    "a",
    "eps",
    "delta",
    "T",
    "t0_estimate",
    "status",
    "worst_ray",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub geometry: String,
    pub mode: String,
    pub v: f64,
    pub a: f64,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub t: Option<f64>,
    /// Finite estimates only; unbounded or missing values stay empty.
    pub t0_estimate: Option<f64>,
    pub status: Option<Status>,
    pub worst_ray: Option<String>,
    pub wall_ms: Option<u64>,
}

fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

fn parse_cell(field: &str, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Io(format!("bad {field} cell `{s}`")))
}

impl ResultRow {
    fn record(&self) -> [String; 11] {
        [
            self.geometry.clone(),
            self.mode.clone(),
            cell(Some(self.v)),
            cell(Some(self.a)),
            cell(self.eps),
            cell(self.delta),
            cell(self.t),
            cell(self.t0_estimate),
            self.status
                .map(|s| s.name().to_string())
                .unwrap_or_default(),
            self.worst_ray.clone().unwrap_or_default(),
            self.wall_ms.map(|m| m.to_string()).unwrap_or_default(),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> Result<Self> {
        if r.len() != HEADER.len() {
            return Err(Error::Io(format!(
                "expected {} fields, got {}",
                HEADER.len(),
                r.len()
            )));
        }
        let opt_str = |s: &str| {
            if s.is_empty() {
                None
            } else {
                Some(s.to_string())
            }
        };
        let status = match &r[8] {
            "" => None,
            s => Some(Status::from_name(s).ok_or_else(|| Error::Io(format!("bad status `{s}`")))?),
        };
        Ok(ResultRow {
            geometry: r[0].to_string(),
            mode: r[1].to_string(),
            v: parse_cell("v", &r[2])?.unwrap_or(f64::NAN),
            a: parse_cell("a", &r[3])?.unwrap_or(f64::NAN),
            eps: parse_cell("eps", &r[4])?,
            delta: parse_cell("delta", &r[5])?,
            t: parse_cell("T", &r[6])?,
            t0_estimate: parse_cell("t0_estimate", &r[7])?,
            status,
            worst_ray: opt_str(&r[9]),
            wall_ms: match &r[10] {
                "" => None,
                s => Some(
                    s.parse()
                        .map_err(|_| Error::Io(format!("bad wall_ms `{s}`")))?,
                ),
            },
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_rows<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(HEADER).map_err(csv_err)?;
    for r in rows {
        wr.write_record(r.record()).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn rows_to_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Io(format!("unexpected header {:?}", header)));
    }
    rd.records()
        .map(|rec| ResultRow::from_record(&rec.map_err(csv_err)?))
        .collect()
}

/// Writes a CSV with an arbitrary header; cells are preformatted.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for r in rows {
        wr.write_record(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Formats a float for a table cell; non-finite values become empty.
pub fn num(x: f64) -> String {
    cell(Some(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opt_f64() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![
            Just(None),
            any::<f64>()
                .prop_filter("finite", |x| x.is_finite())
                .prop_map(Some)
        ]
    }

    fn status() -> impl Strategy<Value = Option<Status>> {
        prop_oneof![
            Just(None),
            Just(Some(Status::Finite)),
            Just(Some(Status::ExceededHorizon)),
            Just(Some(Status::Indeterminate))
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            v in -1e6f64..1e6, a in 0.0f64..7.0, eps in opt_f64(), delta in opt_f64(), t in opt_f64(),
            t0 in opt_f64(), st in status(), ray in proptest::option::of("[a-z_]{1,8}\\([0-9.;e-]{0,30}\\)"),
            wall in proptest::option::of(any::<u64>()),
        ) {
            let row = ResultRow {
                geometry: "disk".into(), mode: "interior".into(), v, a, eps, delta, t,
                t0_estimate: t0, status: st, worst_ray: ray, wall_ms: wall,
            };
            let text = rows_to_string(std::slice::from_ref(&row)).unwrap();
            let back = read_rows(text.as_bytes()).unwrap();
            prop_assert_eq!(back, vec![row]);
        }
    }

    #[test]
    fn non_finite_cells_are_empty() {
        let row = ResultRow {
            geometry: "interval".into(),
            mode: "interior".into(),
            v: 0.5,
            a: 0.25,
            eps: None,
            delta: Some(0.0),
            t: None,
            t0_estimate: Some(f64::INFINITY),
            status: Some(Status::ExceededHorizon),
            worst_ray: None,
            wall_ms: None,
        };
        let text = rows_to_string(&[row]).unwrap();
        assert!(!text.contains("NaN") && !text.contains("inf"));
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "interval,interior,0.5,0.25,,0,,,exceeded_horizon,,"
        );
    }
}
