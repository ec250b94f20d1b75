use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while parsing a PGM file.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PgmError {
    #[error("not a PGM file: expected magic P5 or P2")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PGM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("truncated PGM payload: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("PGM sample {0} exceeds maxval")]
    SampleOutOfRange(u32),
}

/// Errors raised while reading a compressed container.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContainerError {
    #[error("magic mismatch: expected \"SHIC\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown codec id {0}")]
    UnknownCodec(u8),
    #[error("truncated container: {0}")]
    Truncated(&'static str),
    #[error("malformed subdivision tree: {0}")]
    MalformedTree(String),
    #[error("invalid container field: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("mask is empty")]
    EmptyMask,
    #[error("mask position ({0}, {1}) is outside the image")]
    MaskOutOfBounds(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
