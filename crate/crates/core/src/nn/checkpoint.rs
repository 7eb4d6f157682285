use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::param::Param;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"NTCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Header {
    params: Vec<Entry>,
}

/// Layout: "NTCK", u32 version, u32 header length, JSON header with names and
/// shapes, then every value as little-endian f32 in declaration order.
pub fn save_checkpoint<T: Scalar>(path: &Path, params: &[&Param<T>]) -> Result<()> {
    let header = Header {
        params: params
            .iter()
            .map(|p| Entry {
                name: p.name.clone(),
                shape: [p.value.nrows(), p.value.ncols()],
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(12 + json.len() + 4 * params.iter().map(|p| p.len()).sum::<usize>());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for p in params {
        for v in p.value.iter() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Loads values into `params`, which must match the stored names and shapes.
pub fn load_checkpoint<T: Scalar>(path: &Path, params: &mut [&mut Param<T>]) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(bad("not a checkpoint (bad magic bytes)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header: Header = serde_json::from_slice(bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header".into()))?)?;
    if header.params.len() != params.len() {
        return Err(bad(format!(
            "checkpoint has {} parameters, model has {}",
            header.params.len(),
            params.len()
        )));
    }
    let mut off = 12 + hlen;
    for (entry, p) in header.params.iter().zip(params.iter_mut()) {
        let shape = [p.value.nrows(), p.value.ncols()];
        if entry.name != p.name || entry.shape != shape {
            return Err(bad(format!(
                "parameter {} {:?} does not match model parameter {} {:?}",
                entry.name, entry.shape, p.name, shape
            )));
        }
        let n = shape[0] * shape[1];
        let data = bytes.get(off..off + 4 * n).ok_or_else(|| bad("truncated data".into()))?;
        let values = data
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect();
        p.value = Array2::from_shape_vec((shape[0], shape[1]), values).expect("length checked");
        off += 4 * n;
    }
    if off != bytes.len() {
        return Err(bad("trailing bytes after parameter data".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn roundtrip_and_shape_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ntck");
        let a = Param::new("a", array![[1.0f32, 2.5], [-3.0, 4.0]]);
        let b = Param::new("b", array![[0.125f32]]);
        save_checkpoint(&path, &[&a, &b]).unwrap();

        let mut a2 = Param::<f32>::zeros("a", 2, 2);
        let mut b2 = Param::<f32>::zeros("b", 1, 1);
        load_checkpoint(&path, &mut [&mut a2, &mut b2]).unwrap();
        assert_eq!(a2.value, a.value);
        assert_eq!(b2.value, b.value);

        let mut wrong = Param::<f32>::zeros("a", 1, 4);
        assert!(load_checkpoint(&path, &mut [&mut wrong, &mut b2]).is_err());
    }
}
