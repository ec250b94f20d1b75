//! PGM reading (P5 binary, P2 ASCII) and writing (P5), maxval 255 only.

use std::fs;
use std::path::Path;

use crate::error::{PgmError, Result};
use crate::image::GrayImage;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Parse a P5 or P2 PGM with maxval 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'5' | b'2') {
        return Err(PgmError::BadMagic);
    }
    let binary = bytes[1] == b'5';
    let mut cur = Cursor { data: bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader("zero dimension".into()));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    let n = width * height;
    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
            Some(_) => return Err(PgmError::MalformedHeader("missing raster separator".into())),
            None => return Err(PgmError::Truncated { expected: n, found: 0 }),
        }
        let payload = &bytes[cur.pos..];
        if payload.len() < n {
            return Err(PgmError::Truncated {
                expected: n,
                found: payload.len(),
            });
        }
        data.extend(payload[..n].iter().map(|&b| b as f64));
    } else {
        for found in 0..n {
            match cur.number("sample") {
                Ok(v) if v > 255 => return Err(PgmError::SampleOutOfRange(v)),
                Ok(v) => data.push(v as f64),
                Err(_) => return Err(PgmError::Truncated { expected: n, found }),
            }
        }
    }
    Ok(GrayImage::from_vec(width, height, data).expect("sample count checked"))
}

/// Serialise as binary P5. Samples are rounded to nearest and clamped.
pub fn save_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.to_bytes());
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    Ok(load_pgm(&bytes)?)
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    fs::write(path, save_pgm(image))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{make_disk, DiskShape};

    #[test]
    fn binary_two_pixels() {
        let mut bytes = b"P5 2 1 255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.as_slice(), &[0.0, 255.0]);
    }

    #[test]
    fn ascii_single_pixel() {
        let img = load_pgm(b"P2 1 1 255\n128\n").unwrap();
        assert_eq!(img.as_slice(), &[128.0]);
    }

    #[test]
    fn comments_are_skipped() {
        let img = load_pgm(b"P2\n# made by hand\n2 1\n# max\n255\n3 4").unwrap();
        assert_eq!(img.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn maxval_other_than_255_is_rejected() {
        let mut bytes = b"P5 2 1 300\n".to_vec();
        bytes.extend([0u8, 1, 0, 1]);
        assert_eq!(load_pgm(&bytes), Err(PgmError::UnsupportedMaxval(300)));
    }

    #[test]
    fn distinct_parse_errors() {
        assert_eq!(load_pgm(b"P6 1 1 255\n\0"), Err(PgmError::BadMagic));
        assert!(matches!(load_pgm(b"P5 2 255\n"), Err(PgmError::MalformedHeader(_))));
        assert_eq!(
            load_pgm(b"P5 2 2 255\n\x01\x02"),
            Err(PgmError::Truncated { expected: 4, found: 2 })
        );
        assert_eq!(
            load_pgm(b"P2 2 1 255\n7"),
            Err(PgmError::Truncated { expected: 2, found: 1 })
        );
    }

    #[test]
    fn save_single_pixel() {
        let img = GrayImage::from_vec(1, 1, vec![128.0]).unwrap();
        let bytes = save_pgm(&img);
        assert_eq!(bytes.last(), Some(&0x80));
        assert!(bytes.starts_with(b"P5\n1 1\n255\n"));
    }

    #[test]
    fn save_rounds_to_nearest() {
        let img = GrayImage::from_vec(1, 1, vec![127.6]).unwrap();
        assert_eq!(load_pgm(&save_pgm(&img)).unwrap().as_slice(), &[128.0]);
    }

    #[test]
    fn disk_roundtrip_is_byte_identical() {
        let img = make_disk(&DiskShape {
            size: 400,
            radius: 100.0,
            inside: 0.0,
            outside: 255.0,
        })
        .unwrap();
        let bytes = save_pgm(&img);
        let back = load_pgm(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(save_pgm(&back), bytes);
    }
}
