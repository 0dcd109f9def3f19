use thiserror::Error;

use crate::Rational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("resolution {have} is too small, need at least {need}")]
    ResolutionTooSmall { have: u32, need: u32 },
    #[error("resolution {0} is outside the supported range 1..={max}", max = crate::cube::MAX_RESOLUTION)]
    BadResolution(u32),
    #[error("refinement to resolution {need} exceeds the configured cap {cap}")]
    ResolutionCap { need: u32, cap: u32 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("sets overlap but must be disjoint: {0}")]
    Overlap(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("instance too large to enumerate: {size} > cap {cap}")]
    TooLarge { size: u64, cap: u64 },
    #[error("family exhausted: {0}")]
    FamilyExhausted(String),
    #[error("measure carriers cannot be separated: {0}")]
    NotSingular(String),
    #[error("measure has a point part; decompose it first")]
    DecompositionRequired,
    #[error("budget violated: {what} = {value} is not below {bound}")]
    Budget { what: String, value: Box<Rational>, bound: Box<Rational> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal contract violation: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
