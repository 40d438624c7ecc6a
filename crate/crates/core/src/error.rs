use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("inverted element {element} (line {line}): Jacobian determinant {det:e} <= 0")]
    InvertedElement { element: usize, line: usize, det: f64 },

    #[error("kernel evaluated on its singular locus at separation ({dx:e}, {dy:e})")]
    Domain { dx: f64, dy: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("bridging failure: point ({x}, {y}) lies outside every parent element (nearest element {nearest})")]
    Bridging { x: f64, y: f64, nearest: usize },

    #[error("alignment violation: child element {element} straddles a singular line of the kernel")]
    Alignment { element: usize },

    #[error("parent Gauss point {gauss} of element {element}: {source}")]
    AtGaussPoint {
        element: usize,
        gauss: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// The innermost error, stripping Gauss-point context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtGaussPoint { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
