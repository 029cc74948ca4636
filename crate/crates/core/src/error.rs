use thiserror::Error;

/// Errors raised anywhere in the geometry pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Model(String),

    #[error("point {point:?} lies outside the {chart} chart domain")]
    Domain { chart: &'static str, point: [f64; 3] },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("immersion is not regular at node ({i}, {j}): det g = {det:e}")]
    Regularity { i: usize, j: usize, det: f64 },

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("no Willmore-critical Hopf torus with H != 0 exists for kappa = {kappa}, tau = {tau} (needs 0 < kappa < 2 tau^2)")]
    NoCriticalTorus { kappa: f64, tau: f64 },

    #[error("line search failed {attempts} times at step {step}")]
    StepCollapse {
        step: usize,
        attempts: usize,
        /// Trajectory up to the failure.
        trajectory: Box<crate::willmore::FlowState>,
    },

    #[error("unknown check id `{0}`")]
    UnknownCheck(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
