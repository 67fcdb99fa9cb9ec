//! The `DCW1` container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    4 bytes  "DCW1"
//! version  u32      currently 1
//! count    u32      number of sections
//! count x {
//!     tag      4 bytes ASCII
//!     length   u64
//!     payload  `length` bytes
//! }
//! ```
//!
//! Nothing may follow the last section. Payload formats are owned by
//! [`crate::artifact`].

use std::io::{Read, Write};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"DCW1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a DCW1 file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    Version(u32),
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("trailing bytes after the last section")]
    Trailing,
    #[error("missing section {0}")]
    Missing(String),
    #[error("malformed section {tag}: {msg}")]
    Malformed { tag: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub tag: [u8; 4],
    pub payload: Vec<u8>,
}

impl Section {
    pub fn tag_str(&self) -> String {
        String::from_utf8_lossy(&self.tag).into_owned()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Container {
    pub sections: Vec<Section>,
}

impl Container {
    pub fn push(&mut self, tag: &[u8; 4], payload: Vec<u8>) {
        self.sections.push(Section { tag: *tag, payload });
    }

    pub fn get(&self, tag: &[u8; 4]) -> Result<&[u8], ContainerError> {
        self.sections
            .iter()
            .find(|s| &s.tag == tag)
            .map(|s| s.payload.as_slice())
            .ok_or_else(|| ContainerError::Missing(String::from_utf8_lossy(tag).into_owned()))
    }

    pub fn has(&self, tag: &[u8; 4]) -> bool {
        self.sections.iter().any(|s| &s.tag == tag)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for s in &self.sections {
            out.extend_from_slice(&s.tag);
            out.extend_from_slice(&(s.payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&s.payload);
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), ContainerError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        let mut r = ByteReader::new(bytes, "header");
        let magic: [u8; 4] = r.array().map_err(|_| ContainerError::Truncated("header"))?;
        if magic != MAGIC {
            return Err(ContainerError::BadMagic(magic));
        }
        let version = r.u32().map_err(|_| ContainerError::Truncated("header"))?;
        if version != VERSION {
            return Err(ContainerError::Version(version));
        }
        let count = r.u32().map_err(|_| ContainerError::Truncated("header"))?;
        let mut sections = Vec::new();
        for _ in 0..count {
            let tag: [u8; 4] = r.array().map_err(|_| ContainerError::Truncated("section header"))?;
            let len = r.u64().map_err(|_| ContainerError::Truncated("section header"))?;
            let len = usize::try_from(len).map_err(|_| ContainerError::Truncated("section payload"))?;
            let payload = r.bytes(len).map_err(|_| ContainerError::Truncated("section payload"))?.to_vec();
            sections.push(Section { tag, payload });
        }
        if !r.is_empty() {
            return Err(ContainerError::Trailing);
        }
        Ok(Self { sections })
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, ContainerError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

/// Little-endian payload writer.
#[derive(Debug, Default)]
pub struct ByteWriter(pub Vec<u8>);

impl ByteWriter {
    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.0.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    /// `u32` byte length then UTF-8.
    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
        self
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

/// Little-endian payload reader; errors name the section being read.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    tag: &'static str,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], tag: &'static str) -> Self {
        Self { buf, tag }
    }

    fn err(&self, msg: &str) -> ContainerError {
        ContainerError::Malformed { tag: self.tag.to_string(), msg: msg.to_string() }
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        if self.buf.len() < n {
            return Err(self.err("unexpected end of payload"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], ContainerError> {
        Ok(self.bytes(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8, ContainerError> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ContainerError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64, ContainerError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn usize(&mut self) -> Result<usize, ContainerError> {
        Ok(self.u32()? as usize)
    }

    pub fn str(&mut self) -> Result<String, ContainerError> {
        let n = self.usize()?;
        let b = self.bytes(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.err("invalid UTF-8"))
    }

    pub fn finish(&self) -> Result<(), ContainerError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(self.err("trailing bytes"))
        }
    }

    pub fn malformed(&self, msg: &str) -> ContainerError {
        self.err(msg)
    }
}
