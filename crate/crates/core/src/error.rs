use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("region `{name}` does not fit the lattice: {reason}")]
    InvalidRegion { name: String, reason: String },

    #[error("regions overlap at site {site}")]
    OverlappingRegions { site: usize },

    #[error("operation requires {expected}, got {found}")]
    WrongTopology { expected: String, found: String },

    #[error("symmetry group is trivial")]
    TrivialGroup,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
