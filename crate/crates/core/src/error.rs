use thiserror::Error;

use crate::geometry::DomainKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Incidence with |d·n| at or below the tangency tolerance; the caller
    /// has to switch the ray to gliding mode.
    #[error("glancing incidence (|d·n| = {0:e})")]
    Glancing(f64),
    #[error("{0:?} has no boundary")]
    NoBoundary(DomainKind),
    #[error("bounce overflow: more than {0} bounces before the horizon")]
    BounceOverflow(usize),
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported for {kind:?}: {what}")]
    Unsupported { kind: DomainKind, what: String },
    #[error("formula undefined: {0}")]
    FormulaUndefined(String),
    #[error("no closed-form bound: {0}")]
    NoClosedForm(String),
    #[error("obstruction fails: {0}")]
    ObstructionFails(String),
    #[error("CFL violation: dt = {dt} > dx = {dx}")]
    Cfl { dt: f64, dx: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
