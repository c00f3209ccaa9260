use std::io;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty box: sidelength {0} is not positive")]
    EmptyBox(f64),

    #[error("box does not meet the unit cube")]
    OutsideDomain,

    #[error("bad magic: expected MGR1")]
    BadMagic,

    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("trailing data: expected {expected} bytes, found {found}")]
    TrailingData { expected: usize, found: usize },

    #[error("mass out of range at cell {index}: {value}")]
    MassOutOfRange { index: usize, value: f64 },

    #[error("unsupported dimension {0}, expected 1 or 2")]
    Dimension(usize),

    #[error("resolution {level} out of range for dimension {dim} (max {max})")]
    Resolution { dim: usize, level: u32, max: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty scale list")]
    EmptyScales,

    #[error("epsilon outside admissible window: {eps} not in ({lo}, {hi})")]
    EpsilonWindow { eps: f64, lo: f64, hi: f64 },

    #[error("set too trivial at this resolution: no seed cube")]
    NoSeed,

    #[error("no admissible start level: {0}")]
    NoStartLevel(String),

    #[error("region escapes domain")]
    RegionEscapes,

    #[error("map rejected: {0}")]
    MapRejected(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
