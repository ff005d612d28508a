//! Little-endian framing shared by the binary artifact formats.

use std::fs;
use std::path::Path;

use crate::error::{DgpicError, Result};

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 4);
        for &v in vs {
            self.bytes(&(v as f32).to_le_bytes());
        }
    }

    /// Appends the CRC32 of everything written so far and returns the bytes.
    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    /// Checks the magic, the trailing CRC and the version, leaving the cursor
    /// on the first byte after the version field.
    pub fn open(raw: &'a [u8], path: &'a Path, magic: &[u8; 4], version: u32) -> Result<Self> {
        if raw.len() < 12 || &raw[..4] != magic {
            return Err(DgpicError::format(path, format!("not a {} file", String::from_utf8_lossy(magic))));
        }
        let body = &raw[..raw.len() - 4];
        let stored = u32::from_le_bytes(raw[raw.len() - 4..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(DgpicError::Corrupt { path: path.to_path_buf(), stored, computed });
        }
        let mut r = Reader { data: body, at: 4, path };
        let found = r.u32()?;
        if found != version {
            return Err(DgpicError::Version { path: path.into(), found: found.to_string(), expected: version.to_string() });
        }
        Ok(r)
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| DgpicError::format(self.path, format!("truncated at byte {}", self.at)))?;
        let s = &self.data[self.at..end];
        self.at = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.err("length overflow"))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect())
    }

    pub fn len_u32(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn err(&self, msg: impl Into<String>) -> DgpicError {
        DgpicError::format(self.path, msg)
    }

    /// Fails unless every byte before the checksum was consumed.
    pub fn end(&self) -> Result<()> {
        if self.at != self.data.len() {
            return Err(self.err(format!("{} trailing bytes", self.data.len() - self.at)));
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path, what: &str) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DgpicError::Missing { what: what.into(), path: path.to_path_buf() },
        _ => DgpicError::io(path, e),
    })
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DgpicError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| DgpicError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| DgpicError::io(path, e))
}
