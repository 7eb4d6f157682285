use std::path::Path;

use ndarray::Array2;

use super::features::{FeatureSet, WordFeatureMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

/// Writes `sentence_id, word_index, mask, f0..f{d-1}` with one row per word.
/// Floats carry 9 significant digits.
pub fn write_feature_csv<T: Scalar>(path: &Path, matrices: &[WordFeatureMatrix<T>]) -> Result<()> {
    let dim = matrices.first().map_or(0, WordFeatureMatrix::dim);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["sentence_id".to_owned(), "word_index".into(), "mask".into()];
    header.extend((0..dim).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for m in matrices {
        if m.dim() != dim {
            return Err(Error::shape(&[dim], &[m.dim()], "feature csv column count"));
        }
        for (i, row) in m.rows.rows().into_iter().enumerate() {
            let mut rec = vec![m.sentence_id.clone(), i.to_string(), u8::from(m.mask[i]).to_string()];
            rec.extend(row.iter().map(|v| format!("{:.8e}", v.as_f64())));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a feature CSV back, grouping consecutive rows by sentence id.
pub fn read_feature_csv<T: Scalar>(path: &Path, feature: FeatureSet) -> Result<Vec<WordFeatureMatrix<T>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let dim = r.headers().map_err(|e| csv_err(path, e))?.len().saturating_sub(3);
    let bad = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out: Vec<WordFeatureMatrix<T>> = Vec::new();
    let mut cur: Option<(String, Vec<bool>, Vec<T>)> = None;
    let flush = |cur: Option<(String, Vec<bool>, Vec<T>)>, out: &mut Vec<WordFeatureMatrix<T>>| {
        if let Some((id, mask, flat)) = cur {
            let rows = Array2::from_shape_vec((mask.len(), dim), flat).expect("row width checked");
            out.push(WordFeatureMatrix {
                sentence_id: id,
                feature,
                rows,
                mask,
            });
        }
    };
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != dim + 3 {
            return Err(bad(line, format!("expected {} columns, found {}", dim + 3, rec.len())));
        }
        let id = &rec[0];
        let word: usize = rec[1].parse().map_err(|e| bad(line, format!("word_index: {e}")))?;
        let mask = match &rec[2] {
            "1" => true,
            "0" => false,
            m => return Err(bad(line, format!("mask must be 0 or 1, got {m:?}"))),
        };
        if cur.as_ref().map_or(true, |(cid, _, _)| cid != id) {
            flush(cur.take(), &mut out);
            cur = Some((id.to_owned(), Vec::new(), Vec::new()));
        }
        let (_, masks, flat) = cur.as_mut().unwrap();
        if word != masks.len() {
            return Err(bad(line, format!("word_index {word} out of order for sentence {id}")));
        }
        masks.push(mask);
        for j in 0..dim {
            let v: f64 = rec[3 + j].parse().map_err(|e| bad(line, format!("column f{j}: {e}")))?;
            if !v.is_finite() {
                return Err(bad(line, format!("column f{j} is not finite")));
            }
            flat.push(T::of(v));
        }
    }
    flush(cur, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::signal::Band;

    #[test]
    fn csv_roundtrip_is_exact_for_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let ms = vec![
            WordFeatureMatrix {
                sentence_id: "a".into(),
                feature: FeatureSet::Eeg(Band::Theta),
                rows: array![[0.1f32, 1.0e-7], [0.0, 0.0]],
                mask: vec![true, false],
            },
            WordFeatureMatrix {
                sentence_id: "b".into(),
                feature: FeatureSet::Eeg(Band::Theta),
                rows: array![[123456.78f32, -3.3333333]],
                mask: vec![true],
            },
        ];
        write_feature_csv(&path, &ms).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sentence_id,word_index,mask,f0,f1\n"));
        let back: Vec<WordFeatureMatrix<f32>> = read_feature_csv(&path, FeatureSet::Eeg(Band::Theta)).unwrap();
        assert_eq!(back, ms);
    }
}
