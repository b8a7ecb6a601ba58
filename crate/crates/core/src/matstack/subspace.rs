use std::f64::consts::FRAC_PI_2;

use super::{range_basis, singular_values, Matrix, RankPolicy};
use crate::error::{Error, Result};

/// A linear subspace represented by an orthonormal basis (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: Matrix,
}

impl SubspaceBasis {
    /// Checks orthonormality of the columns within `1e-10` entrywise.
    pub fn new(basis: Matrix) -> Result<Self> {
        let gram = basis.transpose() * &basis;
        let k = basis.ncols();
        let off = (gram - Matrix::identity(k, k)).amax();
        if off > 1e-10 {
            return Err(Error::Invalid(format!(
                "basis columns are not orthonormal (deviation {off:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormal basis for the column space of an arbitrary matrix, with
    /// rank decided by `policy`.
    pub fn span_of(m: &Matrix, policy: &RankPolicy) -> Result<Self> {
        if m.ncols() == 0 {
            return Ok(Self {
                basis: Matrix::zeros(m.nrows(), 0),
            });
        }
        range_basis(m, policy).map(|(b, _)| b)
    }

    pub(crate) fn from_orthonormal_unchecked(basis: Matrix) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn into_matrix(self) -> Matrix {
        self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projection of the columns of `m` onto the subspace.
    pub fn project(&self, m: &Matrix) -> Matrix {
        &self.basis * (self.basis.transpose() * m)
    }

    /// `‖m - P m‖_F / ‖m‖_F`, zero for a zero matrix.
    pub fn relative_residual(&self, m: &Matrix) -> f64 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (m - self.project(m)).norm() / norm
    }
}

/// Principal angles in nonincreasing order, `min(dim U, dim V)` of them.
///
/// Small angles are read from the sines (`(I - UU^T) V`) and large ones from
/// the cosines (`U^T V`), which keeps both ends accurate.
pub fn principal_angles(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<Vec<f64>> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(Error::Dimension(format!(
            "principal angles between subspaces of R^{} and R^{}",
            u.ambient_dim(),
            v.ambient_dim()
        )));
    }
    let (u, v) = if v.dim() > u.dim() { (v, u) } else { (u, v) };
    let k = v.dim();
    if k == 0 {
        return Ok(vec![]);
    }
    let ub = u.basis();
    let vb = v.basis();
    let cross = ub.transpose() * vb;
    let mut cos: Vec<f64> = singular_values(&cross)?
        .iter()
        .map(|c| c.min(1.0))
        .collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    let resid = vb - ub * &cross;
    let mut sin: Vec<f64> = singular_values(&resid)?
        .iter()
        .map(|s| s.min(1.0))
        .collect();
    sin.sort_by(f64::total_cmp);
    let mut angles: Vec<f64> = cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| if c * c >= 0.5 { s.asin() } else { c.acos() })
        .collect();
    angles.sort_by(|a, b| b.total_cmp(a));
    Ok(angles)
}

/// Geodesic distance between equal-dimension subspaces as a percentage of
/// its largest possible value `sqrt(k) * pi / 2`.
pub fn grassmann_error(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension(format!(
            "subspace dimensions {} and {} differ",
            u.dim(),
            v.dim()
        )));
    }
    let k = u.dim();
    if k == 0 {
        return Err(Error::Invalid("zero-dimensional subspaces".into()));
    }
    if 2 * k > u.ambient_dim() {
        return Err(Error::Invalid(format!(
            "normalization undefined for {k}-dimensional subspaces of R^{}",
            u.ambient_dim()
        )));
    }
    let angles = principal_angles(u, v)?;
    let dist = angles.iter().map(|t| t * t).sum::<f64>().sqrt();
    Ok(100.0 * dist / ((k as f64).sqrt() * FRAC_PI_2))
}
