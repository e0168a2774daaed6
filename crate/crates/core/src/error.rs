use thiserror::Error;

/// Errors raised by the numerical laboratory.
///
/// Inequality checks report the offending configuration in the message so a
/// failing run can be reproduced from its log line alone.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not unimodular: det = {det}")]
    NonUnimodular { det: f64 },

    #[error("lattice basis is numerically degenerate (condition number {condition:e})")]
    Degenerate { condition: f64 },

    #[error("flow parameter {0} exceeds the overflow guard")]
    Overflow(f64),

    #[error("cutoff {cutoff} predicts {predicted} saddle connections (limit {limit})")]
    CutoffTooLarge {
        cutoff: f64,
        predicted: f64,
        limit: f64,
    },

    #[error("basis holonomy nearly vanishes in some direction (min |hol| = {min_denominator:e})")]
    DegenerateLattice { min_denominator: f64 },

    #[error("points are outside a common chart: coordinate distance {distance} > {radius}")]
    ChartViolation { distance: f64, radius: f64 },

    #[error("sub-divergence violated: sample {sample}, t = {t}, ratio {ratio} > bound {bound}")]
    ViolationFound {
        sample: usize,
        t: f64,
        ratio: f64,
        bound: f64,
    },

    #[error("assertion failed: {0}")]
    AssertionFailure(String),

    #[error("only {usable} usable points above the noise floor (need {required})")]
    InsufficientSignal { usable: usize, required: usize },

    #[error("parameter out of range: {0}")]
    RangeError(String),

    #[error("variance bound violated at T = {t}: {variance} > {bound}")]
    BoundViolation { t: f64, variance: f64, bound: f64 },

    #[error("degenerate scale set: {0}")]
    DegenerateScales(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
