//! SMB1 binary embedding format, all integers and floats little-endian:
//!
//! ```text
//! "SMB1"  u32 m  u32 d  u64 n
//! n x ( u32 id_len, id_len bytes of UTF-8 id, m*d f32 row-major by generator )
//! ```

use std::collections::HashSet;
use std::path::Path;

use super::output::write_atomic;
use crate::error::{Error, Result};
use crate::model::EmbeddingRecord;
use crate::scalar::Scalar;

pub const SMB1_MAGIC: &[u8; 4] = b"SMB1";

pub fn write_smb1<T: Scalar>(path: &Path, records: &[EmbeddingRecord<T>]) -> Result<()> {
    let first =
        records.first().ok_or_else(|| Error::Format { path: path.to_owned(), reason: "no records to write".into() })?;
    let (m, d) = (first.m(), first.dim());
    let too_big = |what: &str| Error::Format { path: path.to_owned(), reason: format!("{what} does not fit in u32") };
    let mut buf = Vec::with_capacity(20 + records.len() * (8 + 4 * m * d));
    buf.extend_from_slice(SMB1_MAGIC);
    buf.extend_from_slice(&u32::try_from(m).map_err(|_| too_big("m"))?.to_le_bytes());
    buf.extend_from_slice(&u32::try_from(d).map_err(|_| too_big("d"))?.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        if r.m() != m || r.dim() != d {
            return Err(Error::inconsistent(r.id(), format!("shape {}x{}, expected {m}x{d}", r.m(), r.dim())));
        }
        let id = r.id().as_bytes();
        buf.extend_from_slice(&u32::try_from(id.len()).map_err(|_| too_big("id length"))?.to_le_bytes());
        buf.extend_from_slice(id);
        for v in r.vectors() {
            for x in v {
                let value = x.to_f32().unwrap_or(f32::NAN);
                buf.extend_from_slice(&value.to_le_bytes());
            }
        }
    }
    write_atomic(path, &buf)
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Format {
            path: self.path.to_owned(),
            reason: format!("truncated at byte {}", self.pos),
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_smb1<T: Scalar>(path: &Path) -> Result<Vec<EmbeddingRecord<T>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = |reason: String| Error::Format { path: path.to_owned(), reason };
    let mut cur = Cursor { path, bytes: &bytes, pos: 0 };
    if cur.take(4)? != SMB1_MAGIC {
        return Err(format("bad magic, expected SMB1".into()));
    }
    let m = cur.u32()? as usize;
    let d = cur.u32()? as usize;
    let n = cur.u64()?;
    if m < 3 {
        return Err(Error::EnsembleTooSmall { m });
    }
    if d == 0 {
        return Err(format("embedding dimension is 0".into()));
    }
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..n {
        let id_len = cur.u32()? as usize;
        let id = std::str::from_utf8(cur.take(id_len)?).map_err(|e| format(format!("sample id is not UTF-8: {e}")))?;
        let raw = cur.take(4 * m * d)?;
        let vectors = raw
            .chunks_exact(4 * d)
            .map(|row| {
                row.chunks_exact(4).map(|b| T::of(f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)).collect()
            })
            .collect();
        if !seen.insert(id.to_owned()) {
            return Err(Error::DuplicateId(id.to_owned()));
        }
        records.push(EmbeddingRecord::new(id, vectors, None)?);
    }
    if cur.pos != bytes.len() {
        return Err(format(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(records)
}
