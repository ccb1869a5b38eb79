use std::path::Path;

use super::{write_atomic, FormatError};
use crate::numeric::{Matrix, ParamStore};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MATT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialises parameter values in store order.
pub fn write_checkpoint(params: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * params.num_values());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params.params() {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
        for v in p.value.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ParamStore, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err("not a checkpoint file".into());
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let count = c.u32()?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|e| format!("parameter name: {e}"))?
            .to_string();
        let (rows, cols) = (c.u32()? as usize, c.u32()? as usize);
        let n = rows.checked_mul(cols).ok_or("parameter too large")?;
        let data = c
            .take(n.checked_mul(8).ok_or("parameter too large")?)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let value = Matrix::from_vec(rows, cols, data).map_err(|e| e.to_string())?;
        params.insert(name, value).map_err(|e| e.to_string())?;
    }
    if c.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - c.pos));
    }
    Ok(params)
}

pub fn save_checkpoint(path: &Path, params: &ParamStore) -> Result<(), FormatError> {
    write_atomic(path, &write_checkpoint(params))
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    read_checkpoint(&bytes).map_err(|reason| FormatError::malformed(path, reason))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut p = ParamStore::new();
        p.insert("w", Matrix::from_vec(2, 1, vec![1.5, -0.0]).unwrap()).unwrap();
        p.insert("b", Matrix::zeros(1, 1)).unwrap();
        p
    }

    #[test]
    fn layout_and_round_trip() {
        let bytes = write_checkpoint(&store());
        assert_eq!(&bytes[..12], b"MATT\x01\0\0\0\x02\0\0\0");
        assert_eq!(&bytes[12..15], b"\x01\0w");
        assert_eq!(bytes.len(), 12 + (2 + 1 + 8 + 16) + (2 + 1 + 8 + 8));
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(write_checkpoint(&back), bytes);
        assert_eq!(back.get("w").unwrap().value.as_slice(), &[1.5, -0.0]);
    }

    #[test]
    fn truncation_and_trailing_bytes_are_rejected() {
        let bytes = write_checkpoint(&store());
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(read_checkpoint(&longer).is_err());
        assert!(read_checkpoint(b"MELF").is_err());
    }
}
