//! Binary field snapshots.
//!
//! Layout, little-endian: the bytes `EPDF`, a `u32` format version, `u32` K,
//! `u32` J, `f64` α, `f64` t, then the K·J values of the first component and
//! the K·J values of the second, each row-major with k fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FieldPair, GridSpec, ScalarField};

pub const MAGIC: &[u8; 4] = b"EPDF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: FieldPair,
    pub t: f64,
}

pub fn encode(u: &FieldPair, t: f64) -> Vec<u8> {
    let g = u.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    out.extend_from_slice(&g.alpha().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for c in [&u.c1, &u.c2] {
        for v in c.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Snapshot, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic".into());
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let (k, j) = (u32_at(bytes, 8) as usize, u32_at(bytes, 12) as usize);
    let (alpha, t) = (f64_at(bytes, 16), f64_at(bytes, 24));
    let g = GridSpec::new(k, j, alpha).map_err(|e| e.to_string())?;
    let expected = HEADER_LEN + 16 * g.len();
    if bytes.len() != expected {
        return Err(format!("expected {expected} bytes for {g}, found {}", bytes.len()));
    }
    let read = |start: usize| -> std::result::Result<ScalarField, String> {
        let values = (0..g.len()).map(|i| f64_at(bytes, start + 8 * i)).collect();
        ScalarField::from_values(g, values).map_err(|e| e.to_string())
    };
    let c1 = read(HEADER_LEN)?;
    let c2 = read(HEADER_LEN + 8 * g.len())?;
    Ok(Snapshot {
        field: FieldPair::new(c1, c2).map_err(|e| e.to_string())?,
        t,
    })
}

pub fn write_snapshot(u: &FieldPair, t: f64, path: &Path) -> Result<()> {
    fs::write(path, encode(u, t)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Snapshot {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FieldPair {
        let g = GridSpec::new(4, 3, 0.25).unwrap();
        FieldPair::new(
            ScalarField::from_index_fn(g, |k, j| k as f64 + 0.1 * j as f64),
            ScalarField::from_index_fn(g, |k, j| -(k as f64) * 1e-300 + j as f64),
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let b = encode(&sample(), 1.5);
        assert_eq!(&b[..4], b"EPDF");
        assert_eq!(u32_at(&b, 4), 1);
        assert_eq!(u32_at(&b, 8), 4);
        assert_eq!(u32_at(&b, 12), 3);
        assert_eq!(f64_at(&b, 16), 0.25);
        assert_eq!(f64_at(&b, 24), 1.5);
        assert_eq!(b.len(), 32 + 2 * 12 * 8);
        assert_eq!(f64_at(&b, 32 + 8), 1.0);
        assert_eq!(f64_at(&b, 32 + 8 * 4), 0.1);
    }

    #[test]
    fn round_trip_and_corruption() {
        let u = sample();
        let mut b = encode(&u, -0.75);
        let s = decode(&b).unwrap();
        assert_eq!(s.field, u);
        assert_eq!(s.t, -0.75);
        assert!(decode(&b[..b.len() - 1]).is_err());
        b[0] = b'X';
        assert!(decode(&b).is_err());
    }
}
