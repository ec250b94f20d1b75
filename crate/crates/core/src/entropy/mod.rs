//! Entropy coding: a static-model range coder for residual streams and an
//! adaptive binary coder for bit streams and level fields.

pub mod binary;
pub mod levels;
pub mod range;

pub use binary::{bit_decode, bit_encode, AdaptiveBitModel, BitDecoder, BitEncoder};
pub use levels::{decode_levels, encode_levels};
pub use range::{build_table, range_decode, range_encode, FrequencyTable};
