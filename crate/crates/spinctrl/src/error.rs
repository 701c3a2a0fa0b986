use thiserror::Error;

/// Errors produced by the pulse-design library.
#[derive(Debug, Error)]
pub enum Error {
    /// The lift state sits on the singular set; no regular bang duration
    /// is defined there.
    #[error("singular-set input")]
    SingularSetInput,

    /// The requested selective pulse would need an amplitude above the
    /// control bound.
    #[error("no admissible singular pulse: delta1 = {delta1} exceeds delta0 = {delta0}")]
    NoAdmissibleSingularPulse { delta1: f64, delta0: f64 },

    #[error("rotation angle {0} outside (0, 2*pi)")]
    AngleOutOfRange(f64),

    #[error("degenerate family: n = {n} must exceed k = {k}")]
    DegenerateFamily { n: u32, k: u32 },

    #[error("offsets must satisfy 0 < delta1 < delta2 (got delta1 = {delta1}, delta2 = {delta2})")]
    OffsetOrder { delta1: f64, delta2: f64 },

    #[error("guide curve is imaginary: 2*k*pi = {two_k_pi} does not exceed phi = {phi}")]
    ImaginaryGuide { two_k_pi: f64, phi: f64 },

    #[error("root-finder failed to converge: {0}")]
    SolverFailed(String),

    #[error("invalid control field: {0}")]
    InvalidField(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value during optimization: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
