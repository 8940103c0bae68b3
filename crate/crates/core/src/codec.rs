//! Canonical binary encoding.
//!
//! Layout rules:
//!
//! * unsigned integers are fixed-width little-endian (`u8`, `u32`, `u64`);
//! * a [`Hash`] is its 32 raw bytes;
//! * a list is a `u32` element count followed by the elements;
//! * an enum is a one-byte discriminant followed by its payload;
//! * a struct is its fields in declaration order.
//!
//! There is exactly one encoding per value, so byte equality is value
//! equality. Digests of core types are `SHA-256(type tag || encoding)`.

use thiserror::Error;

use crate::hash::Hash;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("unexpected end of input at byte {0}")]
    Eof(usize),
    #[error("invalid discriminant {value} for {what}")]
    BadTag { what: &'static str, value: u8 },
    #[error("{0} trailing bytes after value")]
    Trailing(usize),
}

pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::with_capacity(64) }
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn hash(&mut self, h: &Hash) -> &mut Self {
        self.buf.extend_from_slice(&h.0);
        self
    }

    pub fn list<T: Canonical>(&mut self, items: &[T]) -> &mut Self {
        self.u32(items.len() as u32);
        for it in items {
            it.encode(self);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

impl Default for Writer {
    fn default() -> Self {
        Self::new()
    }
}

pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.bytes.len() - self.pos < n {
            return Err(CodecError::Eof(self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        let mut b = [0u8; 4];
        b.copy_from_slice(self.take(4)?);
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        let mut b = [0u8; 8];
        b.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(b))
    }

    pub fn hash(&mut self) -> Result<Hash, CodecError> {
        let mut b = [0u8; 32];
        b.copy_from_slice(self.take(32)?);
        Ok(Hash(b))
    }

    pub fn list<T: Canonical>(&mut self) -> Result<Vec<T>, CodecError> {
        let n = self.u32()? as usize;
        // Each element takes at least one byte; reject absurd counts early.
        if n > self.bytes.len() - self.pos {
            return Err(CodecError::Eof(self.pos));
        }
        (0..n).map(|_| T::decode(self)).collect()
    }

    pub fn done(&self) -> Result<(), CodecError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::Trailing(n)),
        }
    }
}

/// A type with a canonical encoding and a domain tag for hashing.
pub trait Canonical: Sized {
    const TAG: u8;

    fn encode(&self, w: &mut Writer);
    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode(&mut r)?;
        r.done()?;
        Ok(v)
    }

    fn digest(&self) -> Hash {
        Hash::tagged(Self::TAG, &self.to_bytes())
    }
}

impl<T: Canonical> Canonical for std::sync::Arc<T> {
    const TAG: u8 = T::TAG;

    fn encode(&self, w: &mut Writer) {
        (**self).encode(w)
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        T::decode(r).map(std::sync::Arc::new)
    }
}
