//! Final-state dump: `b"DSE1"`, then `N` and `d` as little-endian `u64`,
//! then the `N x d` parameters row by row as little-endian `f64`.

use std::path::Path;

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"DSE1";

pub fn encode(xs: &[Vec<f64>]) -> Result<Vec<u8>> {
    let d = xs.first().map_or(0, Vec::len);
    if xs.iter().any(|x| x.len() != d) {
        return Err(HarnessError::Io("checkpoint rows differ in length".into()));
    }
    let mut out = Vec::with_capacity(20 + 8 * xs.len() * d);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for v in xs.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let bad = |msg: &str| HarnessError::Io(format!("malformed checkpoint: {msg}"));
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(bad("missing DSE1 header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (n, d) = (word(4) as usize, word(12) as usize);
    let body = &bytes[20..];
    if n.checked_mul(d).and_then(|k| k.checked_mul(8)) != Some(body.len()) {
        return Err(bad("length does not match N x d"));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(if d == 0 {
        vec![Vec::new(); n]
    } else {
        values.chunks(d).map(<[f64]>::to_vec).collect()
    })
}

pub fn read(path: &Path) -> Result<Vec<Vec<f64>>> {
    decode(&std::fs::read(path).map_err(|e| HarnessError::io(path, e))?)
}
