//! Bit-exact binary checkpoints of named tensors.
//!
//! Layout (little-endian, no padding):
//!
//! ```text
//! magic   8 bytes  "ESEFNCKP"
//! version u32      1
//! count   u32      number of tensors
//! then per tensor:
//!   name_len u16, name bytes (UTF-8),
//!   rank u8, dims u32 x rank,
//!   payload f64 x product(dims)
//! ```
//!
//! Values round-trip exactly: the payload is the raw IEEE-754 bits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"ESEFNCKP";
pub const VERSION: u32 = 1;

/// One named tensor as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

/// Writes `params` to `path` in a fixed order (the caller's order).
pub fn save_checkpoint(params: &[(String, Tensor)], path: &Path) -> Result<()> {
    if params.len() > u32::MAX as usize {
        return Err(Error::Input("too many tensors for a checkpoint".to_string()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, tensor) in params {
        let name_bytes = name.as_bytes();
        if name_bytes.len() > u16::MAX as usize {
            return Err(Error::Input(format!("tensor name '{name}' is too long")));
        }
        w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&[tensor.rank() as u8])?;
        for &d in tensor.dims() {
            if d > u32::MAX as usize {
                return Err(Error::Input(format!("tensor '{name}' extent {d} overflows u32")));
            }
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in tensor.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let at = self.offset;
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::Format {
                offset: at,
                detail: format!("truncated while reading {what}"),
            }),
            Err(e) => Err(Error::Io(e)),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let mut b = [0u8; 2];
        self.read_exact(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b, what)?;
        Ok(b[0])
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }
}

/// Reads every tensor from a checkpoint, validating the full format. No
/// value is returned unless the whole file parses.
pub fn load_checkpoint(path: &Path) -> Result<Vec<CheckpointEntry>> {
    let mut r = Cursor {
        inner: BufReader::new(File::open(path)?),
        offset: 0,
    };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            detail: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let version_at = r.offset;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: version_at,
            detail: format!("unsupported version {version}, expected {VERSION}"),
        });
    }
    let count = r.u32("tensor count")?;

    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name_at = r.offset;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes, "tensor name")?;
        let name = String::from_utf8(name_bytes).map_err(|_| Error::Format {
            offset: name_at,
            detail: "tensor name is not UTF-8".to_string(),
        })?;
        let rank_at = r.offset;
        let rank = r.u8("rank")? as usize;
        if rank == 0 || rank > crate::tensor::MAX_RANK {
            return Err(Error::Format {
                offset: rank_at,
                detail: format!("tensor '{name}' has invalid rank {rank}"),
            });
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let at = r.offset;
            let d = r.u32("extent")? as usize;
            if d == 0 {
                return Err(Error::Format {
                    offset: at,
                    detail: format!("tensor '{name}' has a zero extent"),
                });
            }
            dims.push(d);
        }
        let len: usize = dims.iter().product();
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            let at = r.offset;
            let v = r.f64("payload value")?;
            if !v.is_finite() {
                return Err(Error::Format {
                    offset: at,
                    detail: format!("tensor '{name}' holds a non-finite value"),
                });
            }
            values.push(v);
        }
        entries.push(CheckpointEntry { name, dims, values });
    }

    let mut probe = [0u8; 1];
    let at = r.offset;
    match r.inner.read(&mut probe) {
        Ok(0) => Ok(entries),
        Ok(_) => Err(Error::Format {
            offset: at,
            detail: "trailing bytes after the last tensor".to_string(),
        }),
        Err(e) => Err(Error::Io(e)),
    }
}
