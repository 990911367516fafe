use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("degenerate vector field: {0}")]
    DegenerateField(&'static str),
    #[error("coincident positions")]
    Coincident,
    #[error("neighbor {0} is not a critical neighbor")]
    NotCritical(usize),
    #[error("heading error bound {0} rad is >= π/2")]
    HeadingBoundTooLarge(f64),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
