use std::fmt;

use thiserror::Error;

/// Grid coordinates of a site, used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    pub coords: [usize; 2],
    pub ndim: usize,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ndim == 1 {
            write!(f, "({})", self.coords[0])
        } else {
            write!(f, "({},{})", self.coords[0], self.coords[1])
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate spectrum: entries {first} and {second} share the nonzero value {value}")]
    DegenerateSpectrum {
        first: usize,
        second: usize,
        value: f64,
    },

    #[error("site {site} is not special unitary (|U^dag U - I| = {unitarity:.3e}, |det U - 1| = {det:.3e})")]
    NonUnitary {
        site: Site,
        unitarity: f64,
        det: f64,
    },

    #[error("site {site} is not a unit vector (|m| - 1 = {deviation:.3e})")]
    NonUnitVector { site: Site, deviation: f64 },

    #[error("unsupported grid dimension: expected {expected}, found {found}")]
    UnsupportedDimension { expected: usize, found: usize },

    #[error(
        "field not smooth at site {site} along axis {axis}: link distance {distance:.3e} exceeds bound {bound}; derivatives are untrustworthy"
    )]
    Smoothness {
        site: Site,
        axis: usize,
        distance: f64,
        bound: f64,
    },

    #[error("adiabaticity violated between path steps {step} and {next}: |overlap| = {overlap:.3e} < 0.5")]
    Adiabaticity {
        step: usize,
        next: usize,
        overlap: f64,
    },

    #[error("connection at site {site} has imaginary part {imag:.3e} above tolerance")]
    NonRealConnection { site: Site, imag: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("field kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::Smoothness { .. }
            | Error::Adiabaticity { .. }
            | Error::NonRealConnection { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
