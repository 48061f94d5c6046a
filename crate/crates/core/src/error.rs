use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite state produced: {0:?}")]
    NonFiniteState(Vec<f64>),

    #[error("component {index} became negative ({value:e})")]
    NegativeState { index: usize, value: f64 },

    #[error("integration step rejected: component {index} = {value:e} below tolerance")]
    StepRejected { index: usize, value: f64 },

    #[error("inconsistent focal decomposition: {0}")]
    InconsistentDecomposition(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("boundary dynamics left the bounding box (|x| = {norm:e} > {bound:e})")]
    UnboundedBoundaryDynamics { norm: f64, bound: f64 },

    #[error("cocycle matrix has non-finite entries at {0:?}")]
    NonFiniteMatrix(Vec<f64>),

    #[error("fundamental solution collapsed to the zero matrix after {steps} steps")]
    DegenerateProduct { steps: u64 },

    #[error("points do not form a periodic orbit (cycle residual {residual:e})")]
    NotPeriodic { residual: f64 },

    #[error("parameter `{name}` = {value} out of range: {reason}")]
    ParamOutOfRange {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("no interior prey equilibrium: fecundity level {level} is not attained")]
    NoInteriorPreyEquilibrium { level: f64 },

    #[error("no boundary equilibrium: {0}")]
    NoBoundaryEquilibrium(String),

    #[error("unknown model `{name}` (valid: {valid})")]
    UnknownModel { name: String, valid: String },

    #[error("unknown parameter `{name}` for model `{model}`")]
    UnknownParameter { model: String, name: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
