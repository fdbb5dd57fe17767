//! Crate-wide error type.

/// Errors produced by lattice construction, field operations, the flow
/// integrator, diagnostics probes, and configuration parsing.
#[derive(Debug, thiserror::Error)]
pub enum SwError {
    /// Invalid configuration value (bad dimension, nonpositive length, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// Fields that must share a lattice (or fiber dimension) do not.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Operation undefined for the given inputs (e.g. chirality split in odd
    /// dimension).
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    /// Argument outside the operation's domain (tau <= 0, radius too large,
    /// non-divisor rescaling ratio, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A diagnostic precondition failed (e.g. stored history does not cover
    /// the requested time slab).
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The integrator produced a non-finite field value.
    #[error("blow-up at t = {t}: non-finite field values")]
    BlowUp { t: f64 },
    /// Malformed snapshot file (bad magic, version, or payload size).
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SwError>;
