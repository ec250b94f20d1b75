//! Compressed file format and the four codecs built on it.

pub mod container;
pub mod rjip;
pub mod search;
pub mod tree;

pub use container::{Body, CodecId, CompressedFile, Header};
pub use rjip::{
    rjip_a_encode_fixed, rjip_encode_fixed, search_params, search_params_with, RjipAConfig, RjipMode, SearchOutcome,
};
pub use search::golden_section;
pub use tree::{
    deserialize_tree, leaf_corners, select_q, serialize_tree, subdivide_encode, subdivide_encode_with,
    subdivide_for_ratio, SubdivisionTree, TreeConfig, TreeEncoding, TreeMode,
};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::metrics::mse;

/// A finished encoding together with what the decoder will reconstruct.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub file: CompressedFile,
    pub bytes: Vec<u8>,
    /// Identical to `decode(&bytes)`.
    pub reconstruction: GrayImage,
    /// MSE of `reconstruction` against the input.
    pub mse: f64,
}

impl Encoded {
    /// `width × height / file size`.
    pub fn ratio(&self) -> f64 {
        compression_ratio(
            self.reconstruction.width(),
            self.reconstruction.height(),
            self.bytes.len(),
        )
    }
}

/// Raw 8-bit size over compressed size.
pub fn compression_ratio(width: usize, height: usize, file_bytes: usize) -> f64 {
    (width * height) as f64 / file_bytes.max(1) as f64
}

pub(crate) fn check_dimensions(image: &GrayImage) -> Result<()> {
    let (w, h) = (image.width(), image.height());
    if w < 2 || h < 2 || w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(Error::InvalidParameter(format!(
            "image size {w}x{h} outside the supported 2..=65535 range"
        )));
    }
    Ok(())
}

pub(crate) fn finish(image: &GrayImage, file: CompressedFile, reconstruction: GrayImage) -> Result<Encoded> {
    let bytes = file.to_bytes();
    let mse = mse(image, &reconstruction)?;
    Ok(Encoded {
        file,
        bytes,
        reconstruction,
        mse,
    })
}

/// Decode any compressed file; the codec is read from the header.
pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let file = CompressedFile::from_bytes(bytes)?;
    decode_file(&file)
}

pub fn decode_file(file: &CompressedFile) -> Result<GrayImage> {
    match file.header.codec {
        CodecId::Rjip => rjip::rjip_decode_parts(&file.header, &file.body),
        CodecId::RjipA => rjip::rjip_a_decode_parts(&file.header, &file.body),
        CodecId::TreeIso | CodecId::TreeAniso => tree::subdivide_decode_parts(&file.header, &file.body),
    }
}
