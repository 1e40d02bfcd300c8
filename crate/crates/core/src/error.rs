use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("domain does not fit inside the grid with a margin of {margin} cells")]
    DomainDoesNotFit { margin: usize },

    #[error("rasterized domain is disconnected ({components} components at h = {h})")]
    DisconnectedRaster { components: usize, h: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("erosion at depth t = {t} leaves an empty set")]
    ErosionEmpty { t: f64 },

    #[error("point ({x}, {y}) is not within one cell of the boundary")]
    PointNotOnBoundary { x: f64, y: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("solver did not converge after {iterations} iterations (last gap/residual {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("pair refused: classification is {classification}, expected {expected}")]
    RefusedPair {
        classification: String,
        expected: String,
    },

    #[error("pair is violated: no positive margin exists")]
    PairViolated,

    #[error("resolution violation: {0}")]
    Resolution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag used in run manifests.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid-grid",
            Error::InvalidMask(_) => "invalid-mask",
            Error::DomainDoesNotFit { .. } => "domain-does-not-fit",
            Error::DisconnectedRaster { .. } => "disconnected-raster",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::ErosionEmpty { .. } => "erosion-empty",
            Error::PointNotOnBoundary { .. } => "point-not-on-boundary",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::NonFinite(_) => "non-finite",
            Error::NotConverged { .. } => "not-converged",
            Error::RefusedPair { .. } => "refused-pair",
            Error::PairViolated => "pair-violated",
            Error::Resolution(_) => "resolution-violation",
            Error::Config(_) => "config-parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
