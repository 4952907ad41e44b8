use thiserror::Error;

use crate::fock::BareLabel;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid truncation: each mode needs at least {min} quanta, got ({n_a}, {n_m})")]
    InvalidTruncation { n_a: usize, n_m: usize, min: usize },

    #[error("label {0} lies outside the truncated basis")]
    LabelOutOfRange(BareLabel),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("near-degenerate denominator {denominator:e} between {from} and {to}")]
    NearDegenerate { from: BareLabel, to: BareLabel, denominator: f64 },

    #[error("{from} and {to} are connected at lower order ({order})")]
    LowerOrderConnection { from: BareLabel, to: BareLabel, order: usize },

    #[error("pair {0} / {1} has no resonance condition in the qubit frequency")]
    NoResonance(BareLabel, BareLabel),

    #[error("no interior gap minimum in bracket [{lo}, {hi}]")]
    NoMinimumInBracket { lo: f64, hi: f64 },

    #[error("more than one gap minimum in bracket [{lo}, {hi}]")]
    MultipleMinima { lo: f64, hi: f64 },

    #[error("ambiguous branch tracking at omega_q = {omega_q}: pair weight {weight}")]
    AmbiguousBranch { omega_q: f64, weight: f64 },

    #[error("spectrum is degenerate (relative gap {0:e})")]
    DegenerateSpectrum(f64),

    #[error("closed form has a pole: {0}")]
    Pole(&'static str),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("positivity violated: minimum eigenvalue {min_eigenvalue:e} at t = {time}")]
    PositivityViolated { time: f64, min_eigenvalue: f64 },

    #[error("trace drift {drift:e} at t = {time}")]
    TraceDrift { time: f64, drift: f64 },

    #[error("target unreachable: effective coupling of step {step} vanishes")]
    UnreachableTarget { step: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;
