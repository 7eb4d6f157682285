use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population standard deviation (divides by n).
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub system: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub std: f64,
    /// "", "*" or "+".
    pub sig: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub system: String,
    pub fraction: f64,
    pub mean_f1: f64,
    pub std: f64,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

pub fn write_table_csv(path: &Path, rows: &[TableRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["system", "P", "R", "F1", "std", "sig"]).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.system.clone(),
            format!("{:.4}", r.precision),
            format!("{:.4}", r.recall),
            format!("{:.4}", r.f1),
            format!("{:.4}", r.std),
            r.sig.clone(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["system", "fraction", "mean_f1", "std"]).map_err(csv_err(path))?;
    for p in points {
        w.write_record([
            p.system.clone(),
            format!("{}", p.fraction),
            format!("{:.6}", p.mean_f1),
            format!("{:.6}", p.std),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_matches_two_pass_definition() {
        assert_eq!(population_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]), 2.0);
        assert_eq!(population_std(&[0.7]), 0.0);
    }

    #[test]
    fn table_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_table_csv(
            &p,
            &[TableRow {
                system: "Baseline".into(),
                precision: 0.5,
                recall: 0.25,
                f1: 1.0 / 3.0,
                std: 0.01,
                sig: "".into(),
            }],
        )
        .unwrap();
        let s = std::fs::read_to_string(&p).unwrap();
        assert_eq!(s, "system,P,R,F1,std,sig\nBaseline,0.5000,0.2500,0.3333,0.0100,\n");
    }
}
