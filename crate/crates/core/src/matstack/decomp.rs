use serde::{Deserialize, Serialize};

use super::{backend, hstack, Matrix, SubspaceBasis};
use crate::error::{Error, Result};

/// How singular values are split into "signal" and "negligible".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RankPolicy {
    /// Count singular values above a fixed threshold.
    Absolute { tol: f64 },
    /// Count singular values above `tol * sigma_1`.
    Relative { tol: f64 },
    /// Cut at the largest ratio `sigma_i / sigma_(i+1)` (smallest such `i`);
    /// if no ratio reaches `min_ratio` the matrix is treated as full rank.
    Gap { min_ratio: f64 },
}

impl RankPolicy {
    /// Default for exact (noise-free) pipelines.
    pub const NOISE_FREE: RankPolicy = RankPolicy::Relative { tol: 1e-8 };
    /// Default for noisy pipelines.
    pub const NOISY: RankPolicy = RankPolicy::Gap { min_ratio: 10.0 };

    /// Resolves `(rank, threshold, gap_ratio)` for a nonincreasing spectrum
    /// of a matrix whose larger dimension is `max_dim`.
    pub fn resolve(&self, sv: &[f64], max_dim: usize) -> (usize, f64, f64) {
        if sv.is_empty() {
            return (0, 0.0, f64::INFINITY);
        }
        let sigma1 = sv[0];
        let floor = sigma1 * f64::EPSILON * max_dim.max(1) as f64;
        let count_above = |tol: f64| sv.iter().take_while(|&&x| x > tol).count();
        let (rank, tol) = match *self {
            RankPolicy::Absolute { tol } => (count_above(tol), tol),
            RankPolicy::Relative { tol } => (count_above(tol * sigma1), tol * sigma1),
            RankPolicy::Gap { min_ratio } => {
                let significant = count_above(floor);
                let mut best = (0usize, 0.0f64);
                for i in 0..significant {
                    let next = sv.get(i + 1).copied().unwrap_or(0.0);
                    let ratio = if next > floor {
                        sv[i] / next
                    } else if i + 1 < sv.len() {
                        f64::INFINITY
                    } else {
                        // the last singular value has no successor to compare to
                        continue;
                    };
                    if ratio > best.1 {
                        best = (i + 1, ratio);
                    }
                }
                if best.1 >= min_ratio {
                    let r = best.0;
                    let next = sv.get(r).copied().unwrap_or(0.0).max(floor);
                    (r, (sv[r - 1] * next).sqrt())
                } else {
                    (significant, floor)
                }
            }
        };
        let gap = gap_ratio(sv, rank);
        (rank, tol, gap)
    }
}

fn gap_ratio(sv: &[f64], rank: usize) -> f64 {
    if rank == 0 || rank >= sv.len() || sv[rank] == 0.0 {
        return f64::INFINITY;
    }
    sv[rank - 1] / sv[rank]
}

/// Numerical rank and the spectrum it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub tolerance_used: f64,
    /// `sigma_rank / sigma_(rank+1)`; infinite when the tail is exactly zero
    /// or absent.
    pub gap_ratio: f64,
}

/// Singular value decomposition `M = U diag(s) V^T` with singular values in
/// nonincreasing order.
///
/// Signs are fixed so that the first entry of each left singular vector
/// exceeding `1e-12` in magnitude is positive. `v` always has `ncols(M)`
/// columns (a full orthonormal basis of the domain); `u` is thin.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

fn fix_sign(col: nalgebra::DVectorView<'_, f64>) -> f64 {
    for &x in col.iter() {
        if x.abs() > 1e-12 {
            return x.signum();
        }
    }
    1.0
}

/// Full-domain SVD with the sign convention above.
pub fn svd(m: &Matrix) -> Result<Svd> {
    if m.is_empty() {
        return Err(Error::Empty("matrix"));
    }
    let (mut u, sv, mut v) = backend::svd_full_domain(m)?;
    for j in 0..v.ncols() {
        let sign = if j < u.ncols() && sv.get(j).is_some_and(|&x| x > 0.0) {
            fix_sign(u.column(j))
        } else {
            fix_sign(v.column(j))
        };
        if sign < 0.0 {
            if j < u.ncols() {
                u.column_mut(j).neg_mut();
            }
            v.column_mut(j).neg_mut();
        }
    }
    Ok(Svd {
        u,
        singular_values: sv,
        v,
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Err(Error::Empty("matrix"));
    }
    backend::singular_values(m)
}

pub fn numerical_rank(m: &Matrix, policy: &RankPolicy) -> Result<RankReport> {
    let sv = singular_values(m)?;
    let (rank, tol, gap) = policy.resolve(&sv, m.nrows().max(m.ncols()));
    Ok(RankReport {
        singular_values: sv,
        rank,
        tolerance_used: tol,
        gap_ratio: gap,
    })
}

/// Orthonormal basis of the right nullspace, with rank counted relative to
/// the largest singular value (`sigma_i > tol * sigma_1`).
pub fn nullspace_basis(m: &Matrix, tol: f64) -> Result<SubspaceBasis> {
    nullspace_with_policy(m, &RankPolicy::Relative { tol }).map(|(b, _)| b)
}

/// Right nullspace under an arbitrary rank policy; also returns the rank
/// report of `m`.
pub fn nullspace_with_policy(
    m: &Matrix,
    policy: &RankPolicy,
) -> Result<(SubspaceBasis, RankReport)> {
    let dec = svd(m)?;
    let (rank, tol, gap) = policy.resolve(&dec.singular_values, m.nrows().max(m.ncols()));
    let cols = m.ncols();
    let mut basis = dec.v.columns(rank, cols - rank).into_owned();
    for mut col in basis.column_iter_mut() {
        if fix_sign(col.as_view()) < 0.0 {
            col.neg_mut();
        }
    }
    let report = RankReport {
        singular_values: dec.singular_values,
        rank,
        tolerance_used: tol,
        gap_ratio: gap,
    };
    Ok((SubspaceBasis::from_orthonormal_unchecked(basis), report))
}

/// Orthonormal basis of the column space, truncated at the policy rank.
/// Columns follow the sign convention of [`svd`].
pub fn range_basis(m: &Matrix, policy: &RankPolicy) -> Result<(SubspaceBasis, RankReport)> {
    if m.is_empty() {
        return Err(Error::Empty("matrix"));
    }
    // Wide data matrices (many samples) would otherwise pay for a full
    // right factor; the left factor is the right factor of the transpose.
    let (mut left, sv) = if m.nrows() < m.ncols() {
        let dec = svd(&m.transpose())?;
        (
            dec.v.columns(0, m.nrows()).into_owned(),
            dec.singular_values,
        )
    } else {
        let dec = svd(m)?;
        (dec.u, dec.singular_values)
    };
    let (rank, tol, gap) = policy.resolve(&sv, m.nrows().max(m.ncols()));
    let mut basis = left.columns_mut(0, rank).into_owned();
    for mut col in basis.column_iter_mut() {
        if fix_sign(col.as_view()) < 0.0 {
            col.neg_mut();
        }
    }
    let report = RankReport {
        singular_values: sv,
        rank,
        tolerance_used: tol,
        gap_ratio: gap,
    };
    Ok((SubspaceBasis::from_orthonormal_unchecked(basis), report))
}

/// Minimum-norm least-squares solution of `A X ≈ B`.
///
/// Tall problems are first reduced by a Householder QR, `A = QR`, which
/// leaves the set of minimisers unchanged; the (square) factor is then
/// pseudo-inverted through its SVD with cutoff `max(m, n) * eps * sigma_1`.
pub fn min_norm_lsq(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "least squares with {} equations and a right-hand side of {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(Matrix::zeros(0, b.ncols()));
    }
    if m == 0 {
        return Ok(Matrix::zeros(n, b.ncols()));
    }
    let (core, rhs) = if m > n {
        let qr = a.clone().qr();
        let mut qtb = b.clone();
        qr.q_tr_mul(&mut qtb);
        (qr.r(), qtb.rows(0, n).into_owned())
    } else {
        (a.clone(), b.clone())
    };
    let dec = svd(&core)?;
    let sigma1 = dec.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = sigma1 * f64::EPSILON * m.max(n) as f64;
    let mut x = Matrix::zeros(n, b.ncols());
    for (i, &s) in dec.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let coeff = dec.u.column(i).transpose() * &rhs / s;
            x += dec.v.column(i) * coeff;
        }
    }
    Ok(x)
}

/// `true` iff `rank(m1) = rank(m2) = rank([m1 m2])`, all ranks taken against
/// the shared threshold `tol * max(sigma_1(m1), sigma_1(m2))`.
pub fn range_equal(m1: &Matrix, m2: &Matrix, tol: f64) -> Result<bool> {
    if m1.nrows() != m2.nrows() {
        return Err(Error::Dimension(format!(
            "range comparison of {} and {} rows",
            m1.nrows(),
            m2.nrows()
        )));
    }
    let sv1 = if m1.is_empty() {
        vec![]
    } else {
        singular_values(m1)?
    };
    let sv2 = if m2.is_empty() {
        vec![]
    } else {
        singular_values(m2)?
    };
    let joint = hstack(m1, m2)?;
    let sv12 = if joint.is_empty() {
        vec![]
    } else {
        singular_values(&joint)?
    };
    let scale = sv1
        .first()
        .copied()
        .unwrap_or(0.0)
        .max(sv2.first().copied().unwrap_or(0.0));
    let thr = tol * scale;
    let count = |sv: &[f64]| sv.iter().filter(|&&x| x > thr).count();
    let (r1, r2, r12) = (count(&sv1), count(&sv2), count(&sv12));
    Ok(r1 == r2 && r2 == r12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matstack::matrix_from_rows;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn identity_full_rank() {
        let rep = numerical_rank(&Matrix::identity(4, 4), &RankPolicy::NOISE_FREE).unwrap();
        assert_eq!(rep.rank, 4);
        assert!(rep.gap_ratio.is_infinite());
    }

    #[test]
    fn perturbed_outer_product_rank_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = randn(&mut rng, 6, 2) * randn(&mut rng, 2, 6) + randn(&mut rng, 6, 6) * 1e-12;
        assert_eq!(numerical_rank(&m, &RankPolicy::NOISE_FREE).unwrap().rank, 2);
        assert_eq!(numerical_rank(&m, &RankPolicy::NOISY).unwrap().rank, 2);
    }

    #[test]
    fn gap_policy_reads_figure_like_spectrum() {
        let sv = [
            26.55, 24.58, 17.46, 16.82, 13.36, 9.80, 0.642, 0.424, 0.196, 0.181,
        ];
        let (rank, tol, gap) = RankPolicy::NOISY.resolve(&sv, 996);
        assert_eq!(rank, 6);
        assert!(tol < 9.80 && tol > 0.642);
        assert!((gap - 9.80 / 0.642).abs() < 1e-12);
    }

    #[test]
    fn gap_policy_flat_spectrum_is_full_rank() {
        let (rank, _, _) = RankPolicy::NOISY.resolve(&[5.0, 5.0, 5.0, 5.0], 4);
        assert_eq!(rank, 4);
        let (rank, _, _) = RankPolicy::NOISY.resolve(&[0.0, 0.0], 4);
        assert_eq!(rank, 0);
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(numerical_rank(&Matrix::zeros(0, 3), &RankPolicy::NOISY).is_err());
        assert!(nullspace_basis(&Matrix::zeros(0, 0), 1e-8).is_err());
    }

    #[test]
    fn nullspace_examples() {
        let m = matrix_from_rows(1, 2, &[1.0, 1.0]).unwrap();
        let ns = nullspace_basis(&m, 1e-10).unwrap();
        assert_eq!(ns.dim(), 1);
        let v = ns.basis().column(0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0] - h).abs() < 1e-12 && (v[1] + h).abs() < 1e-12);

        assert_eq!(
            nullspace_basis(&Matrix::identity(3, 3), 1e-10)
                .unwrap()
                .dim(),
            0
        );

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = randn(&mut rng, 4, 3) * randn(&mut rng, 3, 6);
        let ns = nullspace_basis(&m, 1e-10).unwrap();
        assert_eq!(ns.dim(), 3);
        assert!((&m * ns.basis()).norm() <= 1e-10);
    }

    #[test]
    fn lsq_examples() {
        let b = matrix_from_rows(3, 2, &[1., 2., 3., 4., 5., 6.]).unwrap();
        let x = min_norm_lsq(&Matrix::identity(3, 3), &b).unwrap();
        assert!((x - &b).norm() < 1e-14);

        let a = matrix_from_rows(1, 2, &[1., 1.]).unwrap();
        let x = min_norm_lsq(&a, &matrix_from_rows(1, 1, &[2.]).unwrap()).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14 && (x[(1, 0)] - 1.0).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = randn(&mut rng, 8, 3) * randn(&mut rng, 3, 5);
        let x0 = randn(&mut rng, 5, 2);
        let b = &a * &x0;
        let x = min_norm_lsq(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() <= 1e-10);
        assert!(x.norm() <= x0.norm() + 1e-12);
    }

    #[test]
    fn lsq_dimension_mismatch() {
        assert!(min_norm_lsq(&Matrix::zeros(3, 2), &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn range_equal_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m1 = randn(&mut rng, 6, 3);
        assert!(range_equal(&m1, &m1, 1e-8).unwrap());
        let j = randn(&mut rng, 3, 3);
        assert!(range_equal(&m1, &(&m1 * j), 1e-8).unwrap());
        let e1 = matrix_from_rows(2, 1, &[1., 0.]).unwrap();
        let e2 = matrix_from_rows(2, 1, &[0., 1.]).unwrap();
        assert!(!range_equal(&e1, &e2, 1e-8).unwrap());
        assert!(range_equal(&e1, &Matrix::zeros(3, 1), 1e-8).is_err());
    }

    #[test]
    fn svd_signs_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = randn(&mut rng, 5, 7);
        let d = svd(&m).unwrap();
        assert_eq!(d.v.shape(), (7, 7));
        for j in 0..d.u.ncols() {
            let first =
                d.u.column(j)
                    .iter()
                    .copied()
                    .find(|x| x.abs() > 1e-12)
                    .unwrap();
            assert!(first > 0.0);
        }
        let recon = &d.u
            * Matrix::from_diagonal(&nalgebra::DVector::from_vec(d.singular_values.clone()))
            * d.v.columns(0, 5).transpose();
        assert!((recon - &m).norm() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn nullspace_residual_bound(seed in 0u64..500, rows in 1usize..7, cols in 1usize..8, rank in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rank.min(rows).min(cols);
            let m = randn(&mut rng, rows, r) * randn(&mut rng, r, cols);
            if m.norm() == 0.0 {
                return Ok(());
            }
            let tol = 1e-8;
            let ns = nullspace_basis(&m, tol).unwrap();
            proptest::prop_assert_eq!(ns.dim(), cols - r);
            proptest::prop_assert!((&m * ns.basis()).norm() <= tol * m.norm());
        }

        #[test]
        fn svd_reconstructs_rank_deficient(seed in 0u64..2000, rows in 1usize..10, cols in 1usize..10, rank in 0usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rank.min(rows).min(cols);
            let m = randn(&mut rng, rows, r) * randn(&mut rng, r, cols);
            let d = svd(&m).unwrap();
            let k = d.singular_values.len();
            let sigma = Matrix::from_diagonal(&nalgebra::DVector::from_vec(d.singular_values.clone()));
            let recon = &d.u * sigma * d.v.columns(0, k).transpose();
            proptest::prop_assert!((recon - &m).norm() <= 1e-12 * (1.0 + m.norm()));
            let vtv = d.v.transpose() * &d.v;
            proptest::prop_assert!((vtv - Matrix::identity(cols, cols)).amax() <= 1e-12);
        }

        #[test]
        fn lsq_residual_orthogonal(seed in 0u64..500, rows in 1usize..10, cols in 1usize..8, rank in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rank.min(rows).min(cols);
            let a = randn(&mut rng, rows, r) * randn(&mut rng, r, cols);
            let b = randn(&mut rng, rows, 2);
            let x = min_norm_lsq(&a, &b).unwrap();
            let resid = &a * &x - &b;
            let scale = a.norm() * (a.norm() * x.norm() + b.norm());
            proptest::prop_assert!((a.transpose() * resid).norm() <= 1e-10 * (1.0 + scale));
            // the consistent system built from the solution is solved exactly
            let b2 = &a * &x;
            let x2 = min_norm_lsq(&a, &b2).unwrap();
            proptest::prop_assert!((&a * &x2 - &b2).norm() <= 1e-10 * (1.0 + a.norm() * x2.norm()));
        }
    }
}
