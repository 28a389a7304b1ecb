use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state is outside the nonnegative cone: component {component} = {value}")]
    OutsideCone { component: usize, value: f64 },

    /// An evaluation produced a NaN or infinity.
    #[error("non-finite value in component {component} while evaluating {what}")]
    NonFinite { what: &'static str, component: usize },

    #[error("matrix has non-finite entries")]
    NonFiniteMatrix,

    #[error("no axial fixed point on axis {axis}")]
    NoAxialFixedPoint { axis: usize },

    #[error("box too small on axis {axis}: axial fixed point q = {q} is not below r = {r}")]
    BoxTooSmall { axis: usize, q: f64, r: f64 },

    #[error("point is not a fixed point (residual {residual:e})")]
    NotAFixedPoint { residual: f64 },

    #[error("extra boundary fixed points: {count} planar fixed point(s) present")]
    ExtraBoundaryFixedPoints { count: usize },

    #[error("axial fixed points missing for axes {axes:?}")]
    MissingAxialFixedPoints { axes: Vec<usize> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
