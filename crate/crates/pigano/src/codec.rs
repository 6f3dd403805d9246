//! Checksummed little-endian binary payloads.
//!
//! Layout: 8-byte magic, `u32` format version, `u32` payload kind, payload,
//! then a CRC-32 of everything before it. Arrays carry an explicit `u64`
//! element count.

use std::fs;
use std::path::Path;

use crate::error::{format_err, io_err, Error, Result};

pub const MAGIC: [u8; 8] = *b"PIGANO\0\x01";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Kind {
    Record = 1,
    Params = 2,
}

pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(kind: Kind) -> Self {
        let mut buf = Vec::with_capacity(4096);
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(kind as u32).to_le_bytes());
        Self { buf }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }
}

/// Cursor over a verified payload.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

/// Checks magic, checksum and version; `on_checksum` builds the error for a
/// corrupt or truncated file.
pub fn open<'a>(bytes: &'a [u8], path: &'a Path, kind: Kind, on_checksum: impl FnOnce() -> Error) -> Result<Reader<'a>> {
    if bytes.len() >= MAGIC.len() && bytes[..MAGIC.len()] != MAGIC {
        return Err(format_err(path, "not a pigano binary file"));
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(on_checksum());
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    if crc32fast::hash(body) != stored {
        return Err(on_checksum());
    }
    let version = u32::from_le_bytes(body[8..12].try_into().expect("four bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let found = u32::from_le_bytes(body[12..16].try_into().expect("four bytes"));
    if found != kind as u32 {
        return Err(format_err(path, format!("payload kind {found}, expected {}", kind as u32)));
    }
    Ok(Reader {
        data: body,
        pos: HEADER_LEN,
        path,
    })
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        match end {
            Some(end) => {
                let s = &self.data[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format_err(self.path, "payload shorter than its declared lengths")),
        }
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    pub fn count(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| format_err(self.path, "length overflows"))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count()?;
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| format_err(self.path, "length overflows"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.count()?;
        let bytes = self.take(n)?.to_vec();
        String::from_utf8(bytes).map_err(|_| format_err(self.path, "invalid UTF-8 string"))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(format_err(self.path, "trailing bytes after payload"));
        }
        Ok(())
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}
