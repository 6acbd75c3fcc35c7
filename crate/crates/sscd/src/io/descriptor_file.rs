//! Binary descriptor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset 0   magic   8 bytes  "SSCDDESC"
//! offset 8   version u16      1
//! offset 10  flags   u16      bit0 normalized, bit1 biased-query,
//!                             bit2 biased-reference
//! offset 12  count   u64
//! offset 20  dim     u32
//! offset 24  ids     count x (u16 byte-length + UTF-8 bytes)
//! ...        data    count x dim x f32, row-major
//! ```
//!
//! The file length must match the header arithmetic exactly. Values are
//! stored in 32 bits; in-memory computation is 64-bit, so a save/load round
//! trip is lossless at f32 precision and a load/save round trip is
//! byte-identical.

use std::fs;
use std::path::Path;

use crate::descriptor::{DescriptorSet, Matrix};
use crate::error::{Error, Result};
use crate::scorenorm::{BiasedDescriptorSet, BiasedRole};

pub const MAGIC: &[u8; 8] = b"SSCDDESC";
pub const FLAG_NORMALIZED: u16 = 1;
pub const FLAG_BIASED_QUERY: u16 = 1 << 1;
pub const FLAG_BIASED_REFERENCE: u16 = 1 << 2;
const VERSION: u16 = 1;
const KNOWN_FLAGS: u16 = FLAG_NORMALIZED | FLAG_BIASED_QUERY | FLAG_BIASED_REFERENCE;

/// A loaded set plus its biased-role flag, when present.
#[derive(Debug, Clone)]
pub struct LoadedDescriptors {
    pub set: DescriptorSet,
    pub role: Option<BiasedRole>,
}

impl LoadedDescriptors {
    pub fn into_biased(self) -> Option<BiasedDescriptorSet> {
        self.role
            .map(|role| BiasedDescriptorSet::from_parts(self.set, role))
    }
}

pub fn save_descriptors<P: AsRef<Path>>(path: P, set: &DescriptorSet) -> Result<()> {
    let flags = if set.is_normalized() {
        FLAG_NORMALIZED
    } else {
        0
    };
    write_file(path.as_ref(), set, flags)
}

pub fn save_biased<P: AsRef<Path>>(path: P, set: &BiasedDescriptorSet) -> Result<()> {
    let flags = match set.role() {
        BiasedRole::Query => FLAG_BIASED_QUERY,
        BiasedRole::Reference => FLAG_BIASED_REFERENCE,
    };
    write_file(path.as_ref(), set.set(), flags)
}

fn write_file(path: &Path, set: &DescriptorSet, flags: u16) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + set.count() * (set.dim() * 4 + 8));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&flags.to_le_bytes());
    buf.extend_from_slice(&(set.count() as u64).to_le_bytes());
    buf.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for id in set.ids() {
        let bytes = id.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::InvalidParameter {
                name: "id",
                reason: format!("id longer than 65535 bytes: {:.32}...", id),
            });
        }
        buf.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(bytes);
    }
    for v in set.data().iter() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Cursor<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.fail(format!(
                "unexpected end of file reading {what} ({n} bytes needed, {} left)",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn load_descriptors<P: AsRef<Path>>(path: P) -> Result<LoadedDescriptors> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path: path.display().to_string(),
    };

    let magic = cur.take(8, "magic")?;
    if magic != MAGIC {
        cur.pos = 0;
        return Err(cur.fail(format!("bad magic {magic:02x?}, expected {MAGIC:02x?}")));
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        cur.pos = 8;
        return Err(cur.fail(format!("unsupported version {version}, expected {VERSION}")));
    }
    let flags = cur.u16("flags")?;
    if flags & !KNOWN_FLAGS != 0 {
        cur.pos = 10;
        return Err(cur.fail(format!("unknown flag bits in {flags:#06x}")));
    }
    if flags & FLAG_BIASED_QUERY != 0 && flags & FLAG_BIASED_REFERENCE != 0 {
        cur.pos = 10;
        return Err(cur.fail("both biased-query and biased-reference flags set"));
    }
    let count = cur.u64("count")? as usize;
    let dim = cur.u32("dim")? as usize;

    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let len = cur.u16(&format!("id {i} length"))? as usize;
        let start = cur.pos;
        let raw = cur.take(len, &format!("id {i}"))?;
        let id = std::str::from_utf8(raw)
            .map_err(|e| Error::Format {
                path: path.display().to_string(),
                offset: (start + e.valid_up_to()) as u64,
                message: format!("id {i} is not valid UTF-8"),
            })?
            .to_string();
        ids.push(id);
    }

    let data_bytes = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| cur.fail("count x dim overflows"))?;
    if bytes.len() != cur.pos + data_bytes {
        return Err(cur.fail(format!(
            "file length {} does not match header arithmetic (expected {})",
            bytes.len(),
            cur.pos + data_bytes
        )));
    }

    let mut data = Matrix::zeros((count, dim));
    for (flat, v) in data.iter_mut().enumerate() {
        let start = cur.pos;
        let raw = cur.take(4, "descriptor value")?;
        let value = f32::from_le_bytes(raw.try_into().unwrap());
        if !value.is_finite() {
            return Err(Error::Format {
                path: path.display().to_string(),
                offset: start as u64,
                message: format!("non-finite value at element {flat}"),
            });
        }
        *v = value as f64;
    }

    let normalized = flags & FLAG_NORMALIZED != 0;
    let set = DescriptorSet::with_flag(ids, data, normalized, crate::descriptor::set::NORM_TOL_F32)
        .map_err(|e| match e {
            Error::NotNormalized { row, norm } => Error::Format {
                path: path.display().to_string(),
                offset: 0,
                message: format!(
                    "normalized flag set but row {row} has norm {norm} (beyond f32 tolerance)"
                ),
            },
            other => other,
        })?;

    let role = if flags & FLAG_BIASED_QUERY != 0 {
        Some(BiasedRole::Query)
    } else if flags & FLAG_BIASED_REFERENCE != 0 {
        Some(BiasedRole::Reference)
    } else {
        None
    };

    Ok(LoadedDescriptors { set, role })
}
