use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Scalar;

/// Cholesky factor `L` (lower triangular) with `A = L·Lᵀ`.
///
/// Reads the lower triangle only. A non-positive pivot means the input is not
/// positive definite and is reported with its index.
pub fn cholesky<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>> {
    if !a.is_square() {
        return Err(Error::Dim(format!(
            "Cholesky needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum = sum - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > T::zero()) || !sum.is_finite() {
                    return Err(Error::Numeric(format!(
                        "matrix not positive definite: pivot {i} is {sum}"
                    )));
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `P·X = B` for symmetric positive definite `P` via Cholesky.
pub fn spd_solve<T: Scalar>(p: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    if p.rows() != b.rows() {
        return Err(Error::Dim(format!(
            "spd_solve: {}x{} system with {} right-hand-side rows",
            p.rows(),
            p.cols(),
            b.rows()
        )));
    }
    let l = cholesky(p)?;
    Ok(chol_solve(&l, b))
}

/// Solves with a precomputed Cholesky factor.
pub fn chol_solve<T: Scalar>(l: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let n = l.rows();
    let m = b.cols();
    // Forward: L·Y = B.
    let mut y = b.clone();
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            if lik == T::zero() {
                continue;
            }
            for j in 0..m {
                let v = y[(k, j)] * lik;
                y[(i, j)] = y[(i, j)] - v;
            }
        }
        let d = l[(i, i)];
        for j in 0..m {
            y[(i, j)] = y[(i, j)] / d;
        }
    }
    // Backward: Lᵀ·X = Y.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[(k, i)];
            if lki == T::zero() {
                continue;
            }
            for j in 0..m {
                let v = y[(k, j)] * lki;
                y[(i, j)] = y[(i, j)] - v;
            }
        }
        let d = l[(i, i)];
        for j in 0..m {
            y[(i, j)] = y[(i, j)] / d;
        }
    }
    y
}

/// Solves `A·X = B` for general square `A` by LU with partial pivoting.
pub fn lu_solve<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    if !a.is_square() {
        return Err(Error::Dim("lu_solve needs a square matrix".into()));
    }
    if a.rows() != b.rows() {
        return Err(Error::Dim("lu_solve right-hand side row mismatch".into()));
    }
    let n = a.rows();
    let m = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut pivot = col;
        let mut best = lu[(col, col)].abs();
        for r in (col + 1)..n {
            let v = lu[(r, col)].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if !(best > T::epsilon() * T::cast(n as f64)) {
            return Err(Error::Numeric(format!(
                "singular matrix: pivot column {col}"
            )));
        }
        if pivot != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot, j)];
                lu[(pivot, j)] = tmp;
            }
            for j in 0..m {
                let tmp = x[(col, j)];
                x[(col, j)] = x[(pivot, j)];
                x[(pivot, j)] = tmp;
            }
        }
        let d = lu[(col, col)];
        for r in (col + 1)..n {
            let f = lu[(r, col)] / d;
            if f == T::zero() {
                continue;
            }
            lu[(r, col)] = f;
            for j in (col + 1)..n {
                let v = lu[(col, j)] * f;
                lu[(r, j)] = lu[(r, j)] - v;
            }
            for j in 0..m {
                let v = x[(col, j)] * f;
                x[(r, j)] = x[(r, j)] - v;
            }
        }
    }
    // Back substitution on the upper factor.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let u = lu[(i, k)];
            if u == T::zero() {
                continue;
            }
            for j in 0..m {
                let v = x[(k, j)] * u;
                x[(i, j)] = x[(i, j)] - v;
            }
        }
        let d = lu[(i, i)];
        for j in 0..m {
            x[(i, j)] = x[(i, j)] / d;
        }
    }
    Ok(x)
}
