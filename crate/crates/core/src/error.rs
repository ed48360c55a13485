//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Construction parameter outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Evaluation time outside the metric profile's domain.
    #[error("t = {t} outside metric domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    /// Strict hyperbolicity requires ell < 0.
    #[error("hyperbolicity lost: ell = {ell} (requires ell < 0)")]
    Hyperbolicity { ell: f64 },

    /// Degenerate state (ell = 0, v <= u, K >= 0, ...).
    #[error("degenerate state: {0}")]
    Degenerate(String),

    /// A cell left the configured invariant box during time stepping.
    #[error(
        "invariant region violated at t = {t}, cell {index}: (ell, m) = ({ell}, {m}) \
         outside [-{r_outer}, -{r_inner}] x (-1, 1)"
    )]
    InvariantRegion {
        t: f64,
        index: usize,
        ell: f64,
        m: f64,
        r_inner: f64,
        r_outer: f64,
    },

    /// Requested step exceeds the CFL-stable step.
    #[error("step dt = {dt} exceeds stable limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    /// Non-finite value or failed numerical procedure.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Two fields/trajectories that must share a grid or time stamps do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Fundamental forms fail the Gauss-Codazzi compatibility check.
    #[error("incompatible fundamental forms: max commutator residual {max_residual:.6e} exceeds threshold {threshold:.6e}")]
    Compatibility { max_residual: f64, threshold: f64 },

    /// The designated smooth run fails its entropy-residual certification.
    #[error("smoothness certification failed: max |entropy residual| = {residual:.6e} exceeds {threshold:.6e}")]
    NotSmooth { residual: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
