//! Error type shared by all modules of the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library.
///
/// Each variant corresponds to one failure class of the public operations;
/// the payload carries a human-readable description of the offending input.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// A sensor is not strictly monotone on the requested bracket.
    NonInvertible(String),
    /// A target value lies outside the image of the inversion bracket.
    OutOfRange(String),
    /// The likelihood is singular (e.g. zero measurement-noise variance).
    SingularLikelihood(String),
    /// A stabilized computation still left the representable range.
    Overflow(String),
    /// A moment computation hit a distribution with zero variance.
    DegenerateDistribution(String),
    /// The information matrix is singular or too ill-conditioned to invert.
    SingularInformation(String),
    /// A pointwise evaluation failed; the message names the sample.
    Evaluation(String),
    /// A Monte Carlo run exceeded its failure budget.
    Harness(String),
    /// Reading or writing a dataset or model file failed.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonInvertible(msg) => write!(f, "non-invertible sensor: {msg}"),
            Error::OutOfRange(msg) => write!(f, "out of range: {msg}"),
            Error::SingularLikelihood(msg) => write!(f, "singular likelihood: {msg}"),
            Error::Overflow(msg) => write!(f, "overflow: {msg}"),
            Error::DegenerateDistribution(msg) => write!(f, "degenerate distribution: {msg}"),
            Error::SingularInformation(msg) => write!(f, "singular information: {msg}"),
            Error::Evaluation(msg) => write!(f, "evaluation error: {msg}"),
            Error::Harness(msg) => write!(f, "harness error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
