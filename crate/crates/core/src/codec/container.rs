//! Byte layout of compressed files (all integers little-endian).
//!
//! ```text
//! "SHIC" | version u8 | codec u8 | width u16 | height u16 | q-1 u8 | body
//! RJIP      : r u8 | q × u16 frequencies | payload len u32 | payload
//! RJIP-A    : r u8 | λ u16 | σ-scale u16 | payload len u32 | payload
//! TREE-ISO  : p u16 | tree bit count u32 | tree bits | value count u32 | payload
//! TREE-ANISO: p u16 | λ u16 | tree bit count u32 | tree bits | value count u32 | payload
//! ```
//!
//! λ and σ-scale are stored as `value × 256`, `p` as `value × 4096`. Tree
//! bits are packed MSB first and padded to a whole byte. The tree payload
//! runs to the end of the file.

use crate::entropy::FrequencyTable;
use crate::error::{ContainerError, Result};

pub const MAGIC: [u8; 4] = *b"SHIC";
pub const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodecId {
    Rjip = 0,
    RjipA = 1,
    TreeIso = 2,
    TreeAniso = 3,
}

impl CodecId {
    pub fn from_u8(id: u8) -> Result<Self, ContainerError> {
        Ok(match id {
            0 => CodecId::Rjip,
            1 => CodecId::RjipA,
            2 => CodecId::TreeIso,
            3 => CodecId::TreeAniso,
            _ => return Err(ContainerError::UnknownCodec(id)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecId::Rjip => "rjip",
            CodecId::RjipA => "rjip-a",
            CodecId::TreeIso => "tree-iso",
            CodecId::TreeAniso => "tree-aniso",
        }
    }
}

impl std::fmt::Display for CodecId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `x × 256` rounded, saturated to the u16 range (minimum 1).
pub fn to_fixed8(x: f64) -> u16 {
    (x * 256.0).round().clamp(1.0, u16::MAX as f64) as u16
}

pub fn from_fixed8(v: u16) -> f64 {
    v as f64 / 256.0
}

/// `x × 4096` rounded, saturated to the u16 range.
pub fn to_fixed12(x: f64) -> u16 {
    (x * 4096.0).round().clamp(0.0, u16::MAX as f64) as u16
}

pub fn from_fixed12(v: u16) -> f64 {
    v as f64 / 4096.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub codec: CodecId,
    pub width: u16,
    pub height: u16,
    pub q: u16,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    Rjip {
        r: u8,
        table: FrequencyTable,
        payload: Vec<u8>,
    },
    RjipA {
        r: u8,
        lambda: u16,
        sigma_scale: u16,
        payload: Vec<u8>,
    },
    Tree {
        p: u16,
        /// Present exactly for the anisotropic tree codec.
        lambda: Option<u16>,
        tree_bits: Vec<bool>,
        value_count: u32,
        payload: Vec<u8>,
    },
}

/// A parsed or ready-to-write compressed file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedFile {
    pub header: Header,
    pub body: Body,
}

impl CompressedFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(h.codec as u8);
        out.extend_from_slice(&h.width.to_le_bytes());
        out.extend_from_slice(&h.height.to_le_bytes());
        out.push((h.q - 1) as u8);
        match &self.body {
            Body::Rjip { r, table, payload } => {
                out.push(*r);
                for &c in table.counts() {
                    out.extend_from_slice(&(c as u16).to_le_bytes());
                }
                out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
                out.extend_from_slice(payload);
            }
            Body::RjipA {
                r,
                lambda,
                sigma_scale,
                payload,
            } => {
                out.push(*r);
                out.extend_from_slice(&lambda.to_le_bytes());
                out.extend_from_slice(&sigma_scale.to_le_bytes());
                out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
                out.extend_from_slice(payload);
            }
            Body::Tree {
                p,
                lambda,
                tree_bits,
                value_count,
                payload,
            } => {
                out.extend_from_slice(&p.to_le_bytes());
                if let Some(l) = lambda {
                    out.extend_from_slice(&l.to_le_bytes());
                }
                out.extend_from_slice(&(tree_bits.len() as u32).to_le_bytes());
                out.extend_from_slice(&pack_bits(tree_bits));
                out.extend_from_slice(&value_count.to_le_bytes());
                out.extend_from_slice(payload);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        let mut rd = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = rd.take(4, "magic")?.try_into().expect("four bytes");
        if magic != MAGIC {
            return Err(ContainerError::BadMagic(magic));
        }
        let version = rd.u8("version")?;
        if version != VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let codec = CodecId::from_u8(rd.u8("codec")?)?;
        let width = rd.u16("width")?;
        let height = rd.u16("height")?;
        if width == 0 || height == 0 {
            return Err(ContainerError::Invalid(format!("image size {width}x{height}")));
        }
        let q = rd.u8("q")? as u16 + 1;
        if q < 2 {
            return Err(ContainerError::Invalid("q must be at least 2".into()));
        }
        let header = Header {
            codec,
            width,
            height,
            q,
        };
        let body = match codec {
            CodecId::Rjip => {
                let r = rd.nonzero_r()?;
                let mut counts = Vec::with_capacity(q as usize);
                for _ in 0..q {
                    counts.push(rd.u16("frequency table")? as u32);
                }
                let table = FrequencyTable::from_counts(counts).map_err(|e| ContainerError::Invalid(e.to_string()))?;
                let len = rd.u32("payload length")? as usize;
                let payload = rd.take(len, "payload")?.to_vec();
                Body::Rjip { r, table, payload }
            }
            CodecId::RjipA => {
                let r = rd.nonzero_r()?;
                let lambda = rd.u16("lambda")?;
                let sigma_scale = rd.u16("sigma scale")?;
                if lambda == 0 || sigma_scale == 0 {
                    return Err(ContainerError::Invalid("zero kernel parameter".into()));
                }
                let len = rd.u32("payload length")? as usize;
                let payload = rd.take(len, "payload")?.to_vec();
                Body::RjipA {
                    r,
                    lambda,
                    sigma_scale,
                    payload,
                }
            }
            CodecId::TreeIso | CodecId::TreeAniso => {
                let p = rd.u16("p")?;
                let lambda = if codec == CodecId::TreeAniso {
                    let l = rd.u16("lambda")?;
                    if l == 0 {
                        return Err(ContainerError::Invalid("zero lambda".into()));
                    }
                    Some(l)
                } else {
                    None
                };
                let nbits = rd.u32("tree bit count")? as usize;
                let packed = rd.take(nbits.div_ceil(8), "tree bits")?;
                let tree_bits = unpack_bits(packed, nbits);
                let value_count = rd.u32("value count")?;
                let payload = rd.rest().to_vec();
                Body::Tree {
                    p,
                    lambda,
                    tree_bits,
                    value_count,
                    payload,
                }
            }
        };
        Ok(CompressedFile { header, body })
    }
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], count: usize) -> Vec<bool> {
    (0..count).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).ok_or(ContainerError::Truncated(what))?;
        let s = self.bytes.get(self.pos..end).ok_or(ContainerError::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ContainerError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, ContainerError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("two bytes")))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("four bytes")))
    }

    fn nonzero_r(&mut self) -> Result<u8, ContainerError> {
        match self.u8("grid spacing")? {
            0 => Err(ContainerError::Invalid("grid spacing 0".into())),
            r => Ok(r),
        }
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::build_table;

    fn header(codec: CodecId) -> Header {
        Header {
            codec,
            width: 300,
            height: 7,
            q: 16,
        }
    }

    #[test]
    fn roundtrip_every_codec() {
        let files = [
            CompressedFile {
                header: header(CodecId::Rjip),
                body: Body::Rjip {
                    r: 4,
                    table: build_table(&[1, 2, 2], 16).unwrap(),
                    payload: vec![1, 2, 3],
                },
            },
            CompressedFile {
                header: header(CodecId::RjipA),
                body: Body::RjipA {
                    r: 3,
                    lambda: to_fixed8(7.25),
                    sigma_scale: to_fixed8(1.5),
                    payload: vec![9; 10],
                },
            },
            CompressedFile {
                header: header(CodecId::TreeIso),
                body: Body::Tree {
                    p: to_fixed12(0.75),
                    lambda: None,
                    tree_bits: vec![true, false, true, false, false, false, false, false, true],
                    value_count: 12,
                    payload: vec![4, 5],
                },
            },
            CompressedFile {
                header: header(CodecId::TreeAniso),
                body: Body::Tree {
                    p: 100,
                    lambda: Some(2000),
                    tree_bits: vec![false],
                    value_count: 4,
                    payload: vec![],
                },
            },
        ];
        for f in files {
            let bytes = f.to_bytes();
            assert_eq!(CompressedFile::from_bytes(&bytes).unwrap(), f);
        }
    }

    #[test]
    fn header_layout() {
        let f = CompressedFile {
            header: header(CodecId::RjipA),
            body: Body::RjipA {
                r: 3,
                lambda: 0x0102,
                sigma_scale: 0x0304,
                payload: vec![0xaa],
            },
        };
        let b = f.to_bytes();
        assert_eq!(&b[..4], b"SHIC");
        assert_eq!(b[4], 1);
        assert_eq!(b[5], 1);
        assert_eq!(&b[6..8], &300u16.to_le_bytes());
        assert_eq!(&b[8..10], &7u16.to_le_bytes());
        assert_eq!(b[10], 15);
        assert_eq!(b[11], 3);
        assert_eq!(&b[12..16], &[0x02, 0x01, 0x04, 0x03]);
        assert_eq!(&b[16..20], &1u32.to_le_bytes());
        assert_eq!(b[20], 0xaa);
        assert_eq!(b.len(), 21);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            CompressedFile::from_bytes(b"PNG!\x01\x00"),
            Err(ContainerError::BadMagic(_))
        ));
        assert!(matches!(
            CompressedFile::from_bytes(b"SHIC\x02\x00"),
            Err(ContainerError::UnsupportedVersion(2))
        ));
        assert!(matches!(
            CompressedFile::from_bytes(b"SHIC\x01\x09"),
            Err(ContainerError::UnknownCodec(9))
        ));
        assert!(matches!(
            CompressedFile::from_bytes(b"SHIC\x01\x00\x01"),
            Err(ContainerError::Truncated(_))
        ));
    }

    #[test]
    fn fixed_point() {
        assert_eq!(to_fixed8(1.5), 384);
        assert_eq!(from_fixed8(384), 1.5);
        assert_eq!(to_fixed12(0.25), 1024);
        assert_eq!(from_fixed12(to_fixed12(1.3)), (1.3f64 * 4096.0).round() / 4096.0);
    }

    #[test]
    fn bit_packing() {
        let bits = vec![true, false, false, true, true, true, false, false, true, false];
        let packed = pack_bits(&bits);
        assert_eq!(packed, vec![0b1001_1100, 0b1000_0000]);
        assert_eq!(unpack_bits(&packed, bits.len()), bits);
    }
}
