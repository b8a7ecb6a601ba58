//! Dense real-matrix kernel: block-structured builders, rank-revealing
//! decompositions and subspace geometry.
//!
//! All routines are pure functions over `nalgebra` dense matrices.

mod backend;
mod decomp;
mod io;
pub mod serde_rows;
mod subspace;

use nalgebra::DMatrix;

pub(crate) use backend::{complex_singular_values, eigenvalues};

pub use decomp::{
    min_norm_lsq, nullspace_basis, nullspace_with_policy, numerical_rank, range_basis, range_equal,
    singular_values, svd, RankPolicy, RankReport, Svd,
};
pub use io::{read_matrix_csv, write_matrix_csv};
pub use subspace::{grassmann_error, principal_angles, SubspaceBasis};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub type Matrix = DMatrix<f64>;

/// Builds a matrix from row-major entries, rejecting NaN and infinities.
pub fn matrix_from_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Matrix> {
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = Matrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m)?;
    Ok(m)
}

pub fn ensure_finite(m: &Matrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Nested row-major representation, as used by the JSON reports.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged nested matrix".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    matrix_from_rows(rows.len(), ncols, &flat)
}

/// Horizontal concatenation `[a b]`.
pub fn hstack(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "hstack of {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    Ok(out)
}

/// Vertical concatenation `[a; b]`.
pub fn vstack(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "vstack of {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    Ok(out)
}

/// Block-Hankel matrix with `depth` block rows and `width` columns; block
/// `(i, j)` is the sample `signal(i + j)`.
pub fn block_hankel(signal: &Trajectory, depth: usize, width: usize) -> Result<Matrix> {
    if depth == 0 || width == 0 {
        return Err(Error::Invalid(
            "Hankel depth and width must be positive".into(),
        ));
    }
    let required = depth + width - 1;
    if signal.len() < required {
        return Err(Error::Length {
            required,
            available: signal.len(),
        });
    }
    let d = signal.dim();
    let data = signal.as_matrix();
    let mut h = Matrix::zeros(depth * d, width);
    for i in 0..depth {
        h.view_mut((i * d, 0), (d, width))
            .copy_from(&data.columns(i, width));
    }
    Ok(h)
}

fn check_square(a: &Matrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "state matrix is {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// `[C; CA; ...; CA^(s-1)]`.
pub fn extended_observability(a: &Matrix, c: &Matrix, s: usize) -> Result<Matrix> {
    let n = check_square(a)?;
    if c.ncols() != n {
        return Err(Error::Dimension(format!(
            "C has {} columns, A is {n}x{n}",
            c.ncols()
        )));
    }
    if s == 0 {
        return Err(Error::Invalid("window must be positive".into()));
    }
    let p = c.nrows();
    let mut o = Matrix::zeros(s * p, n);
    let mut block = c.clone();
    for i in 0..s {
        o.rows_mut(i * p, p).copy_from(&block);
        if i + 1 < s {
            block = &block * a;
        }
    }
    Ok(o)
}

/// Lower block-triangular Toeplitz matrix of Markov parameters: `D` on the
/// diagonal and `CA^(k-1)B` on the k-th block subdiagonal.
pub fn block_toeplitz(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix, s: usize) -> Result<Matrix> {
    let n = check_square(a)?;
    if b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "Toeplitz blocks A {n}x{n}, B {}x{}, C {}x{}, D {}x{}",
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    if s == 0 {
        return Err(Error::Invalid("window must be positive".into()));
    }
    let (p, m) = d.shape();
    let mut markov = Vec::with_capacity(s);
    markov.push(d.clone());
    let mut ak_b = b.clone();
    for _ in 1..s {
        markov.push(c * &ak_b);
        ak_b = a * &ak_b;
    }
    let mut t = Matrix::zeros(s * p, s * m);
    for i in 0..s {
        for j in 0..=i {
            t.view_mut((i * p, j * m), (p, m)).copy_from(&markov[i - j]);
        }
    }
    Ok(t)
}
