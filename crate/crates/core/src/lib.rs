//! Greyscale image compression with Shepard inpainting.

pub mod codec;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod homdiff;
pub mod image;
pub mod mask;
pub mod metrics;
pub mod ops;
pub mod pgm;
pub mod shepard;
pub mod tonal;
