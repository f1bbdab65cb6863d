use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Scalar;

/// Norm threshold below which the truncated series is evaluated directly.
const THETA: f64 = 0.5;
const MAX_TERMS: usize = 60;

/// Matrix exponential by scaling-and-squaring around a truncated power series.
///
/// For nilpotent input the series terminates and the result is exact up to
/// round-off, which keeps the acyclicity functional at exactly zero on DAGs.
pub fn matrix_exponential<T: Scalar>(m: &Mat<T>) -> Result<Mat<T>> {
    if !m.is_square() {
        return Err(Error::Dim(format!(
            "matrix exponential needs a square input, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.all_finite() {
        return Err(Error::Numeric(
            "matrix exponential input has non-finite entries".into(),
        ));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }

    let norm = m.norm_inf().lossy_f64();
    let squarings = if norm > THETA {
        (norm / THETA).log2().ceil() as u32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::Numeric(format!(
            "matrix exponential overflow: input norm {norm:e}"
        )));
    }
    let scaled = m.scale(T::cast(0.5).powi(squarings as i32));

    let mut acc = Mat::identity(n);
    let mut term = Mat::identity(n);
    for k in 1..=MAX_TERMS {
        term = term.matmul(&scaled).scale(T::cast(1.0 / k as f64));
        acc = acc.add(&term);
        if term.max_abs() <= T::epsilon() * acc.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        acc = acc.matmul(&acc);
    }
    if !acc.all_finite() {
        return Err(Error::Numeric(
            "matrix exponential overflowed the scalar range".into(),
        ));
    }
    Ok(acc)
}
