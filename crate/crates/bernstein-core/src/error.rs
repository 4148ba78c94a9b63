//! Crate-wide error type.
//!
//! Every fallible operation in the crate reports through [`Error`]; the
//! variants mirror the failure modes of the numerical layers (domain and
//! ordering violations, truncation-policy refusals, construction guards,
//! simulation blowups, and config parsing).

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the supported range of an evaluator.
    #[error("{name} = {value} outside supported domain [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A kernel was asked for a non-increasing time pair.
    #[error("time ordering violated: need s < t, got s = {s}, t = {t}")]
    Ordering { s: f64, t: f64 },

    /// The requested gap is below the truncation policy's spectral minimum.
    /// On the interval the image-sum kernel covers this regime.
    #[error(
        "gap {gap} below policy minimum {min_gap}; use the image-sum kernel (interval only)"
    )]
    PolicyGap { gap: f64, min_gap: f64 },

    /// The truncation policy cannot certify its tail tolerance.
    #[error("spectral tail bound {bound:e} exceeds requested tolerance {tol:e}")]
    TailBound { bound: f64, tol: f64 },

    /// An operation restricted to one geometry was called with another.
    #[error("operation `{op}` does not support this geometry")]
    UnsupportedGeometry { op: &'static str },

    /// A projected datum produced a non-finite value.
    #[error("datum evaluated to a non-finite value at x = {x}")]
    InvalidDatum { x: f64 },

    /// A function required to be strictly positive dipped below its guard.
    #[error("{what} fell to {min:e} at (x, t) = ({x}, {t}); positivity guard is {guard:e}")]
    NonPositive {
        what: &'static str,
        min: f64,
        x: f64,
        t: f64,
        guard: f64,
    },

    /// The endpoint-measure mass was unusable for normalization.
    #[error("endpoint measure mass {mass:e} cannot be normalized")]
    Normalization { mass: f64 },

    /// A kernel denominator underflowed.
    #[error("{what} underflowed (value {value:e})")]
    Underflow { what: &'static str, value: f64 },

    /// A simulated state became non-finite.
    #[error("simulation produced a non-finite state at step {step}")]
    Blowup { step: usize },

    /// A weight or estimator needed path data that was not recorded.
    #[error("path is missing required data: {0}")]
    PathData(&'static str),

    /// A tabulated transition kernel failed to integrate to ~1.
    #[error("kernel mass {mass} after quadrature is degenerate (< 0.999)")]
    KernelMass { mass: f64 },

    /// Root bracketing failed (must not occur within the supported range).
    #[error("failed to isolate Bessel root number {index}")]
    RootIsolation { index: usize },

    /// A model configuration failed to parse.
    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },
}
