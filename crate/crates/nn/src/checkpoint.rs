//! Little-endian tensor container.
//!
//! ```text
//! magic   8 bytes  "OPTLABW\0"
//! version u32      1
//! count   u32
//! count x {
//!   name_len u32, name utf-8 bytes,
//!   ndim u32, dims u64 x ndim,
//!   data f64 x product(dims)
//! }
//! ```

use std::fs;
use std::path::Path;

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"OPTLABW\0";
pub const VERSION: u32 = 1;

pub fn encode(tensors: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| NnError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let ndim = r.u32()? as usize;
        let shape: Vec<usize> = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<_>>()?;
        let n = shape.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
        let n = n.ok_or_else(|| NnError::Checkpoint(format!("tensor `{name}` too large")))?;
        let bytes = r.take(n.checked_mul(8).ok_or_else(|| NnError::Checkpoint("size overflow".into()))?)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if r.pos != buf.len() {
        return Err(NnError::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(out)
}

pub fn write_tensors(path: &Path, tensors: &[(String, Tensor)]) -> Result<()> {
    fs::write(path, encode(tensors)).map_err(|source| NnError::Io { path: path.to_path_buf(), source })
}

pub fn read_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    decode(&fs::read(path).map_err(|source| NnError::Io { path: path.to_path_buf(), source })?)
}
