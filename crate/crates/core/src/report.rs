//! Line-oriented JSON reports.
//!
//! A report is one JSON object with two keys, `meta` and `records`. The writer
//! puts `meta` on its own line and each record on its own line so reports diff
//! cleanly and can be grepped:
//!
//! ```text
//! {
//! "meta": {"seed":42,...},
//! "records": [
//! {"n":100,"mse":0.01},
//! {"n":200,"mse":0.004}
//! ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed back exactly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub meta: Value,
    pub records: Vec<Value>,
}

impl Report {
    pub fn new(meta: Value) -> Self {
        Self {
            meta,
            records: Vec::new(),
        }
    }

    pub fn push<T: Serialize>(&mut self, record: &T) -> Result<()> {
        self.records.push(serde_json::to_value(record)?);
        Ok(())
    }

    /// The exact text of the `records` section as written to disk.
    pub fn records_text(&self) -> Result<String> {
        let mut out = String::from("[\n");
        for (i, r) in self.records.iter().enumerate() {
            out.push_str(&serde_json::to_string(r)?);
            if i + 1 < self.records.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push(']');
        Ok(out)
    }

    pub fn to_text(&self) -> Result<String> {
        Ok(format!(
            "{{\n\"meta\": {},\n\"records\": {}\n}}\n",
            serde_json::to_string(&self.meta)?,
            self.records_text()?
        ))
    }
}

pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = report.to_text()?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use serde_json::json;

    #[test]
    fn empty_records_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let r = Report::new(json!({"seed": 1}));
        write_report(&r, &p).unwrap();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(v["records"], json!([]));
        assert_eq!(read_report(&p).unwrap(), r);
    }

    #[test]
    fn single_record_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let mut r = Report::default();
        r.records.push(json!({"n": 100, "mse": 0.01}));
        write_report(&r, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("{\"mse\":0.01,\"n\":100}"));
        let back = read_report(&p).unwrap();
        assert_eq!(back.records[0]["n"], json!(100));
        assert_eq!(back.records[0]["mse"].as_f64(), Some(0.01));
    }

    #[test]
    fn thousand_random_records_round_trip() {
        let mut g = rng::stream(5);
        let mut r = Report::new(json!({"seed": 5, "mode": "rate"}));
        for i in 0..1000 {
            let a: f64 = g.random::<f64>() * 10f64.powi(g.random_range(-300..300));
            let b: f64 = -g.random::<f64>();
            r.records.push(json!({"i": i, "a": a, "b": b, "ok": g.random::<bool>()}));
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_report(&r, &p).unwrap();
        let back = read_report(&p).unwrap();
        assert_eq!(back, r);
        for (x, y) in back.records.iter().zip(&r.records) {
            assert_eq!(x["a"].as_f64().unwrap().to_bits(), y["a"].as_f64().unwrap().to_bits());
        }
    }

    #[test]
    fn write_to_missing_dir_is_io_error() {
        let r = Report::default();
        assert!(matches!(
            write_report(&r, "/no/such/dir/r.json"),
            Err(Error::Io { .. })
        ));
    }
}
