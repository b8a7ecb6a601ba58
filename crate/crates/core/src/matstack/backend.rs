//! Conversions to and from `faer`, which supplies the SVD and eigenvalue
//! kernels. nalgebra 0.35's SVD with singular vectors returns inaccurate
//! factors for a small fraction of rank-deficient inputs, and every
//! rank-revealing step here works on rank-deficient matrices.

use faer::Mat;
use nalgebra::{Complex, DMatrix};

use super::Matrix;
use crate::error::{Error, Result};

fn to_faer(m: &Matrix) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn failed(what: &str) -> Error {
    Error::Degenerate(format!("{what} did not converge"))
}

/// `(U, sigma, V)` with `U` thin (`rows × min`) and `V` covering the whole
/// domain (`cols × cols`); singular values nonincreasing.
pub(super) fn svd_full_domain(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let fm = to_faer(m);
    let (rows, cols) = m.shape();
    let dec = if rows >= cols {
        fm.thin_svd()
    } else {
        fm.svd()
    }
    .map_err(|_| failed("singular value decomposition"))?;
    let k = rows.min(cols);
    let s: Vec<f64> = (0..k).map(|i| dec.S()[i]).collect();
    let u = from_faer(dec.U().subcols(0, k));
    let v = from_faer(dec.V());
    Ok((u, s, v))
}

pub(super) fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    to_faer(m)
        .singular_values()
        .map_err(|_| failed("singular value decomposition"))
}

pub(crate) fn complex_singular_values(m: &DMatrix<Complex<f64>>) -> Result<Vec<f64>> {
    let fm = Mat::<faer::c64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    fm.singular_values()
        .map_err(|_| failed("singular value decomposition"))
}

pub(crate) fn eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>> {
    if m.is_empty() {
        return Ok(vec![]);
    }
    to_faer(m)
        .eigenvalues()
        .map_err(|_| failed("eigenvalue decomposition"))
}
