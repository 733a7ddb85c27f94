//! Length-prefixed field encoding shared by letters, envelopes, wire payloads
//! and the on-disk account records.
//!
//! Short fields carry an unsigned 16-bit big-endian length; envelope-sized
//! blobs carry a 32-bit one. Readers are strict: `finish` rejects trailing
//! bytes.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated input: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("{0} trailing bytes after last field")]
    TrailingBytes(usize),
    #[error("field of {len} bytes exceeds the {max}-byte limit")]
    FieldTooLong { len: usize, max: usize },
    #[error("field is not valid UTF-8")]
    InvalidUtf8,
}

pub fn put_u8(out: &mut Vec<u8>, v: u8) {
    out.push(v);
}

pub fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

/// Writes a field with a 16-bit length prefix.
pub fn put_short(out: &mut Vec<u8>, field: &[u8]) -> Result<(), CodecError> {
    let len = u16::try_from(field.len()).map_err(|_| CodecError::FieldTooLong {
        len: field.len(),
        max: u16::MAX as usize,
    })?;
    put_u16(out, len);
    out.extend_from_slice(field);
    Ok(())
}

/// Writes a field with a 32-bit length prefix.
pub fn put_long(out: &mut Vec<u8>, field: &[u8]) -> Result<(), CodecError> {
    let len = u32::try_from(field.len()).map_err(|_| CodecError::FieldTooLong {
        len: field.len(),
        max: u32::MAX as usize,
    })?;
    put_u32(out, len);
    out.extend_from_slice(field);
    Ok(())
}

#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated {
                needed: n - self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, CodecError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(self.take(8)?);
        Ok(u64::from_be_bytes(raw))
    }

    pub fn short(&mut self) -> Result<&'a [u8], CodecError> {
        let len = self.u16()? as usize;
        self.take(len)
    }

    pub fn long(&mut self) -> Result<&'a [u8], CodecError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn short_str(&mut self) -> Result<&'a str, CodecError> {
        std::str::from_utf8(self.short()?).map_err(|_| CodecError::InvalidUtf8)
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}
