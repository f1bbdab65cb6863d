//! Dense numerical kernels shared by every solver: matrix exponential, the
//! smooth acyclicity functional with its gradient, positive-definite and
//! general linear solves, and a bound-constrained quasi-Newton minimizer.

mod expm;
mod linalg;
mod minimize;

pub use expm::matrix_exponential;
pub use linalg::{chol_solve, cholesky, lu_solve, spd_solve};
pub use minimize::{bound_minimize, no_lower_bounds, BoundMinimizeConfig, BoundMinimizeResult};

use crate::error::Result;
use crate::mat::Mat;
use crate::scalar::Scalar;

/// Value and gradient of the acyclicity functional.
#[derive(Clone, Debug)]
pub struct AcyclicityEval<T> {
    /// `tr(e^{W∘W}) - d`; zero exactly when `W` is a DAG.
    pub value: T,
    /// `(e^{W∘W})ᵀ ∘ 2W`.
    pub gradient: Mat<T>,
}

/// Smooth acyclicity measure of a weighted adjacency matrix.
pub fn acyclicity<T: Scalar>(w: &Mat<T>) -> Result<AcyclicityEval<T>> {
    let e = matrix_exponential(&w.hadamard(w))?;
    let value = e.trace() - T::cast(w.rows() as f64);
    let gradient = e.transpose().hadamard(&w.scale(T::cast(2.0)));
    Ok(AcyclicityEval { value, gradient })
}
