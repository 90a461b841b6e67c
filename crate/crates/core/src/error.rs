use thiserror::Error;

/// Errors produced by mask generation, analysis and the application drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mask spec: {0}")]
    InvalidSpec(String),

    #[error("initial density {0} outside (0, 0.5]")]
    DensityOutOfRange(f64),

    #[error("index {index} out of range for {len} pixels")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("coordinate does not fit the grid: {0}")]
    InvalidCoord(String),

    #[error("deposit precondition violated at pixel {index}: pixel is already {state}")]
    DepositPrecondition { index: usize, state: &'static str },

    #[error("no ON pixels to select a cluster from")]
    EmptyOnSet,

    #[error("no OFF pixels to select a void from")]
    EmptyOffSet,

    #[error("redistribution did not converge within {0} iterations")]
    RedistributionCap(usize),

    #[error("{depth}-bit finalization needs at least {needed} pixels, mask has {pixels}")]
    BitDepth { depth: u32, needed: usize, pixels: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported extent: {0}")]
    UnsupportedExtent(String),

    #[error("unknown integrand `{0}`")]
    UnknownIntegrand(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("malformed image: {0}")]
    Image(String),
}

impl Error {
    /// Stable snake_case identifier of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid_spec",
            Error::DensityOutOfRange(_) => "density_out_of_range",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidCoord(_) => "invalid_coord",
            Error::DepositPrecondition { .. } => "deposit_precondition",
            Error::EmptyOnSet => "empty_on_set",
            Error::EmptyOffSet => "empty_off_set",
            Error::RedistributionCap(_) => "redistribution_cap",
            Error::BitDepth { .. } => "bit_depth",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::UnsupportedExtent(_) => "unsupported_extent",
            Error::UnknownIntegrand(_) => "unknown_integrand",
            Error::OutOfRange(_) => "out_of_range",
            Error::Image(_) => "image",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
