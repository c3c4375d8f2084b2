use thiserror::Error;

/// Failures raised by the geometry, functional and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pole singularity: {0}")]
    PoleSingularity(String),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("irregular curve: minimum speed {min_speed:e} at node {node}")]
    IrregularCurve { min_speed: f64, node: usize },

    #[error("curve passes within {distance:e} of the pole")]
    PoleProximity { distance: f64 },

    #[error("surface oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("tangent field is not based on the expected great circle: {0}")]
    InvalidBase(String),

    #[error("right-hand side has kernel component {max_coefficient:e}")]
    ProjectionViolation { max_coefficient: f64 },

    #[error(
        "corrector diverged after {iterations} iterations (residual {residual:e}); \
         try staging epsilon in steps of at most 0.05"
    )]
    CorrectorDivergence { residual: f64, iterations: usize },

    #[error("shooting failed after {iterations} iterations (closure defect {defect:e})")]
    ShootingFailure { defect: f64, iterations: usize },

    #[error("integration step {dt:e} exceeds the stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("no critical point found: {0}")]
    SearchFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
