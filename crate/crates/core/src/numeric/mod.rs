//! Dense numeric core: matrices, differentiable primitives, parameters,
//! optimizers and gradient checking. Everything runs in double precision.

mod gradcheck;
mod init;
mod matrix;
pub mod ops;
mod optim;
mod params;

pub use gradcheck::{
    finite_difference_check, relative_error, GradCheckReport, ParamCheck, FULL_CHECK_LIMIT,
    SUBSAMPLE_SIZE,
};
pub use init::{xavier_uniform, xavier_uniform_with};
pub use matrix::{dot, Matrix};
pub use optim::{Algorithm, Optimizer, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use params::{Param, ParamStore};

#[derive(Debug, thiserror::Error)]
pub enum NumericError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("diverged: {0}")]
    Diverged(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
}
