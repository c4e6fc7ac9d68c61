use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::morphometry::metrics_catalog;

const FIXED: [&str; 4] = ["id", "outcome", "age", "sex"];

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub id: String,
    pub outcome: u8,
    /// Years.
    pub age: f64,
    pub sex: u8,
    pub metrics: Vec<Option<f64>>,
}

/// One row per participant: binary outcome, age, sex and named metrics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalysisTable {
    pub metric_names: Vec<String>,
    pub rows: Vec<AnalysisRow>,
}

impl AnalysisTable {
    pub fn new(metric_names: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &metric_names {
            if FIXED.contains(&n.as_str()) || !seen.insert(n.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate or reserved metric column {n:?}"
                )));
            }
        }
        Ok(Self {
            metric_names,
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, row: AnalysisRow) -> Result<()> {
        if row.metrics.len() != self.metric_names.len() {
            return Err(Error::invalid(format!(
                "row {} has {} metrics, table has {}",
                row.id,
                row.metrics.len(),
                self.metric_names.len()
            )));
        }
        if row.outcome > 1 || row.sex > 1 {
            return Err(Error::invalid(format!(
                "row {}: outcome and sex must be 0 or 1",
                row.id
            )));
        }
        if !(row.age > 0.0) || !row.age.is_finite() {
            return Err(Error::invalid(format!(
                "row {}: age must be positive",
                row.id
            )));
        }
        if row.metrics.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {}: non-finite metric", row.id)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.metric_names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r.metrics[k]).collect())
    }

    /// Metric columns that are not part of the morphometry catalog.
    pub fn unknown_metrics(&self) -> Vec<&str> {
        let known: HashSet<String> = metrics_catalog().into_iter().map(|e| e.name).collect();
        self.metric_names
            .iter()
            .filter(|n| !known.contains(n.as_str()))
            .map(String::as_str)
            .collect()
    }

    /// Columns `id,outcome,age,sex,<metrics...>`; empty cells are missing.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if headers.len() < 4 || headers[..4] != FIXED {
            return Err(Error::Malformed(format!(
                "analysis table must start with columns {}",
                FIXED.join(",")
            )));
        }
        let mut table = Self::new(headers[4..].to_vec())?;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row_no = line + 2;
            let parse = |i: usize| -> Result<Option<f64>> {
                let s = rec.get(i).unwrap_or("").trim();
                if s.is_empty() || s.eq_ignore_ascii_case("na") {
                    return Ok(None);
                }
                s.parse::<f64>().map(Some).map_err(|_| {
                    Error::Malformed(format!(
                        "row {row_no}, column {}: {s:?} is not a number",
                        headers[i]
                    ))
                })
            };
            let required = |i: usize| -> Result<f64> {
                parse(i)?.ok_or_else(|| {
                    Error::Malformed(format!("row {row_no}: {} is required", headers[i]))
                })
            };
            let binary = |i: usize| -> Result<u8> {
                match required(i)? {
                    v if v == 0.0 => Ok(0),
                    v if v == 1.0 => Ok(1),
                    v => Err(Error::Malformed(format!(
                        "row {row_no}: {} must be 0 or 1, got {v}",
                        headers[i]
                    ))),
                }
            };
            let row = AnalysisRow {
                id: rec.get(0).unwrap_or("").trim().to_string(),
                outcome: binary(1)?,
                age: required(2)?,
                sex: binary(3)?,
                metrics: (4..headers.len()).map(parse).collect::<Result<_>>()?,
            };
            table
                .push(row)
                .map_err(|e| Error::Malformed(format!("row {row_no}: {e}")))?;
        }
        Ok(table)
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header: Vec<&str> = FIXED.to_vec();
        header.extend(self.metric_names.iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.id.clone(),
                r.outcome.to_string(),
                r.age.to_string(),
                r.sex.to_string(),
            ];
            rec.extend(
                r.metrics
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = AnalysisTable::new(vec!["a".into(), "b".into()]).unwrap();
        t.push(AnalysisRow {
            id: "p1".into(),
            outcome: 1,
            age: 61.5,
            sex: 0,
            metrics: vec![Some(0.1), None],
        })
        .unwrap();
        t.push(AnalysisRow {
            id: "p2".into(),
            outcome: 0,
            age: 40.0,
            sex: 1,
            metrics: vec![Some(-3.0), Some(2.0)],
        })
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(AnalysisTable::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn rejects_bad_rows() {
        let bad = "id,outcome,age,sex,m\np,2,50,0,1\n";
        assert!(AnalysisTable::read_csv(bad.as_bytes()).is_err());
        let bad = "id,outcome,age,sex,m\np,1,-5,0,1\n";
        assert!(AnalysisTable::read_csv(bad.as_bytes()).is_err());
        let bad = "id,age,outcome,sex\n";
        assert!(AnalysisTable::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn unknown_metric_names() {
        let t = AnalysisTable::new(vec!["arc_length_mean".into(), "foo".into()]).unwrap();
        assert_eq!(t.unknown_metrics(), vec!["foo"]);
    }
}
