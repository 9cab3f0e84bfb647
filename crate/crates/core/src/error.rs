//! Error type shared by all solver modules.

use thiserror::Error;

/// Errors surfaced by geometry construction, kernel evaluation, norms and
/// the fixed-point solvers. Values are reported as `f64` regardless of the
/// working scalar type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("grid size {0} not supported: need an even N >= 16")]
    GridSize(usize),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{kind} has dimension {expected}, got {got}")]
    Dimension {
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("evolving families need a circle or sphere base, got {0}")]
    EvolvingBase(&'static str),

    #[error("time order violated: need s < t, got s = {s}, t = {t}")]
    TimeOrder { s: f64, t: f64 },

    #[error("time {t} at or past extinction (radius vanishes at t = {extinction})")]
    Extinction { t: f64, extinction: f64 },

    #[error("horizon {horizon} not inside the validity window (0, {limit})")]
    Horizon { horizon: f64, limit: f64 },

    #[error("ball radius {r} outside (0, {limit}) for this geometry")]
    BallRadius { r: f64, limit: f64 },

    #[error("graph validity lost: base offset reaches {min_offset} (must stay positive)")]
    GraphValidity { min_offset: f64 },

    #[error(
        "Lipschitz smallness hypothesis violated: |u|_C01 = {norm} exceeds the \
         quadratic-bound threshold {threshold}"
    )]
    Smallness { norm: f64, threshold: f64 },

    #[error("derivative order {order} unsupported for kernel {operator}")]
    DerivativeOrder { operator: &'static str, order: usize },

    #[error(
        "series truncation insufficient at time gap {gap}: first omitted term {estimate} \
         above {budget}; raise the mode cap or the small-time switch threshold"
    )]
    Truncation {
        gap: f64,
        estimate: f64,
        budget: f64,
    },

    #[error("time grid too coarse: need at least {needed} nodes inside ({lo}, {hi})")]
    TimeGridTooCoarse { lo: f64, hi: f64, needed: usize },

    #[error("field does not cover requested time {t} (grid ends at {end})")]
    TimeCoverage { t: f64, end: f64 },

    #[error("fields live on different grids ({left} vs {right} points)")]
    GridMismatch { left: usize, right: usize },

    #[error(
        "Picard iteration did not converge within {max_iterations} iterations; \
         contraction ratios {ratios:?}"
    )]
    NonConvergence {
        max_iterations: usize,
        ratios: Vec<f64>,
    },

    #[error(
        "iterate left the contraction ball at step {iteration}: |u|_XT = {norm} > delta = \
         {delta}; the self-map hypothesis fails for this configuration"
    )]
    BallExit {
        iteration: usize,
        norm: f64,
        delta: f64,
    },

    #[error("initial data too large: |u0|_C01 = {norm} > epsilon = {epsilon}")]
    InitialDataSize { norm: f64, epsilon: f64 },

    #[error("graph validity lost at t = {t} during the run")]
    ValidityLostAt { t: f64 },

    #[error("{0}")]
    Unsupported(&'static str),
}

pub type Result<V> = std::result::Result<V, Error>;
