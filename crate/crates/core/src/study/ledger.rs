use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::ModelKind;

/// One coefficient of one estimator in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: u64,
    pub estimator: ModelKind,
    pub index: usize,
    pub coefficient: String,
    pub estimate: Option<f64>,
    pub se_white: Option<f64>,
    pub se_ddw: Option<f64>,
    pub converged: bool,
    pub note: String,
}

pub fn write_ledger<W: Write>(rows: &[ReplicateRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ledger<R: Read>(reader: R) -> Result<Vec<ReplicateRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ReplicateRow>, _>>()?;
    Ok(rows)
}

/// Appends rows to a ledger file, writing the header only when it is new.
pub fn append_ledger(path: &Path, rows: &[ReplicateRow]) -> Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(r: u64, est: Option<f64>) -> ReplicateRow {
        ReplicateRow {
            replicate: r,
            estimator: ModelKind::Hmm2,
            index: 1,
            coefficient: "binary".into(),
            estimate: est,
            se_white: est.map(|e| e / 10.0),
            se_ddw: None,
            converged: est.is_some(),
            note: if est.is_some() { String::new() } else { "all starts failed".into() },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![row(0, Some(0.1 + 0.2)), row(1, None), row(2, Some(-1e-17))];
        let mut buf = Vec::new();
        write_ledger(&rows, &mut buf).unwrap();
        assert_eq!(read_ledger(buf.as_slice()).unwrap(), rows);
    }
}
