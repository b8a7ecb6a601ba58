use serde::{Deserialize, Serialize};

use super::{fault_dim_from_hankels, residual_hankel};
use crate::error::{Error, Result};
use crate::matstack::{
    extended_observability, range_basis, serde_rows, svd, Matrix, RankPolicy, SubspaceBasis,
};
use crate::sysgen::{FaultPair, StateSpace};
use crate::trajectory::Trajectory;

/// Entries below this magnitude are skipped when fixing column signs.
const SIGN_EPS: f64 = 1e-10;
/// A structural representative is accepted when its component in the
/// unwanted block has norm at most this (per unit column).
const STRUCTURE_TOL: f64 = 0.1;

/// Rank policies for the two rank decisions of the recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    /// Ranks of `R_s` and `R_(s+1)`.
    pub rank_policy: RankPolicy,
    /// Nullity of the linear constraint matrix.
    pub null_policy: RankPolicy,
}

impl RecoveryConfig {
    pub fn noise_free() -> Self {
        Self {
            rank_policy: RankPolicy::NOISE_FREE,
            null_policy: RankPolicy::NOISE_FREE,
        }
    }

    pub fn noisy() -> Self {
        Self {
            rank_policy: RankPolicy::NOISY,
            null_policy: RankPolicy::NOISY,
        }
    }
}

/// Basis of all `[F; G]` that reproduce the residual column space.
#[derive(Debug, Clone, Serialize)]
pub struct FaultBasis {
    /// Orthonormal canonical basis, state rows.
    #[serde(rename = "F_hat", with = "serde_rows")]
    pub f_hat: Matrix,
    /// Orthonormal canonical basis, output rows.
    #[serde(rename = "G_hat", with = "serde_rows")]
    pub g_hat: Matrix,
    pub n_z: usize,
    /// Stacked `[F; G]` read directly from the nullspace vectors.
    #[serde(skip)]
    pub raw: Matrix,
    /// Spectrum of the constraint matrix, used to pick `n_z`.
    pub constraint_singular_values: Vec<f64>,
    #[serde(skip)]
    pub q: SubspaceBasis,
}

impl FaultBasis {
    pub fn stacked(&self) -> Matrix {
        crate::matstack::vstack(&self.f_hat, &self.g_hat).expect("same column count")
    }

    pub fn n_x(&self) -> usize {
        self.f_hat.nrows()
    }

    /// Relative residual of projecting `[F; G]` onto the recovered range.
    pub fn projection_residual(&self, truth: &FaultPair) -> f64 {
        SubspaceBasis::new(self.stacked())
            .map(|b| b.relative_residual(&truth.stacked()))
            .unwrap_or(f64::INFINITY)
    }
}

/// Complete recovery result with the rank diagnostics it was based on.
#[derive(Debug, Clone, Serialize)]
pub struct FaultRecovery {
    #[serde(flatten)]
    pub basis: FaultBasis,
    pub n_v_estimate: usize,
    pub rank_s: usize,
    pub rank_s_plus_1: usize,
    pub threshold: f64,
    pub singular_values_s: Vec<f64>,
    pub singular_values_s_plus_1: Vec<f64>,
    pub window_s: usize,
    pub warnings: Vec<String>,
}

impl FaultRecovery {
    pub fn n_z(&self) -> usize {
        self.basis.n_z
    }
}

/// Estimates `n_v` from `R_s`, `R_(s+1)` and recovers the fault-matrix
/// basis from `R_s`.
pub fn recover_fault_matrices(
    y: &Trajectory,
    u: &Trajectory,
    sys: &StateSpace,
    s: usize,
    config: &RecoveryConfig,
) -> Result<FaultRecovery> {
    if s < sys.n_x() {
        log::warn!(
            "window {s} is shorter than the state dimension {}",
            sys.n_x()
        );
    }
    let rs = residual_hankel(y, u, sys, s)?;
    let rs1 = residual_hankel(y, u, sys, s + 1)?;
    let est = fault_dim_from_hankels(&rs, &rs1, s, &config.rank_policy)?;
    let basis = fault_basis_from_hankel(&rs, sys, s, est.rank_s, &config.null_policy)?;

    let mut warnings = Vec::new();
    if est.rank_s == rs.nrows() {
        warnings.push(format!(
            "R_{s} has full row rank {}; every fault pair of this size explains the data",
            est.rank_s
        ));
    }
    match est.zeta_estimate(sys.n_x()) {
        Some(zeta) if basis.n_z > est.n_v + zeta => warnings.push(format!(
            "n_z = {} exceeds n_v + zeta = {} + {zeta}",
            basis.n_z, est.n_v
        )),
        None => warnings.push(format!(
            "rank R_{s} = {} exceeds n_x + s n_v = {}",
            est.rank_s,
            sys.n_x() + s * est.n_v
        )),
        _ => {}
    }
    if basis.n_z < est.n_v {
        warnings.push(format!(
            "only {} solution directions for {} fault channels",
            basis.n_z, est.n_v
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FaultRecovery {
        basis,
        n_v_estimate: est.n_v,
        rank_s: est.rank_s,
        rank_s_plus_1: est.rank_s_plus_1,
        threshold: est.threshold,
        singular_values_s: est.singular_values_s,
        singular_values_s_plus_1: est.singular_values_s_plus_1,
        window_s: s,
        warnings,
    })
}

/// Solves for every `[F; G]` whose fault Toeplitz matrix lives in the
/// range of `R_s`.
///
/// With `Q` the leading `rank` left singular vectors of `R_s` split into
/// `s` blocks of `n_y` rows, the unknowns are `Z_1, ..., Z_s` (`rank` rows
/// each) and `F` (`n_x` rows), tied together by
///
/// * `Q_i Z_j = 0` for `j > i` (the Toeplitz matrix is block lower
///   triangular),
/// * `Q_i Z_j = Q_(i+1) Z_(j+1)` for `j <= i < s` (block Toeplitz
///   structure),
/// * `O_(s-1) F = Q_(2:s) Z_1` (the first block column below `G` is
///   `CF, CAF, ...`),
///
/// and `G = Q_1 Z_1`. The nullspace of the stacked constraints spans the
/// solutions.
pub fn fault_basis_from_hankel(
    r_s: &Matrix,
    sys: &StateSpace,
    s: usize,
    rank: usize,
    null_policy: &RankPolicy,
) -> Result<FaultBasis> {
    let (n, p) = (sys.n_x(), sys.n_y());
    if s < 2 {
        return Err(Error::Invalid(
            "recovery needs a window of at least 2".into(),
        ));
    }
    if r_s.nrows() != s * p {
        return Err(Error::Dimension(format!(
            "residual Hankel has {} rows, expected {s} x {p}",
            r_s.nrows()
        )));
    }
    if rank == 0 {
        return Err(Error::NoSolution(
            "the residual Hankel matrix is zero".into(),
        ));
    }
    let q = range_basis(r_s, &RankPolicy::Absolute { tol: -1.0 })?
        .0
        .into_matrix()
        .columns(0, rank)
        .into_owned();
    let m = constraint_matrix(&q, &sys.a, &sys.c, s, p)?;

    let cols = m.ncols();
    let dec = svd(&m)?;
    let mut sv = dec.singular_values.clone();
    sv.resize(cols, 0.0);
    let nullity = choose_nullity(&sv, m.nrows().max(cols), null_policy, n + p);
    if nullity == 0 {
        return Err(Error::NoSolution(
            "the constraint matrix has a trivial nullspace".into(),
        ));
    }
    let null = dec.v.columns(cols - nullity, nullity).into_owned();
    let r = rank;
    let f_raw = null.rows(s * r, n).into_owned();
    let g_raw = q.rows(0, p) * null.rows(0, r);
    let raw = crate::matstack::vstack(&f_raw, &g_raw)?;
    let stacked = canonical_basis(&raw, n)?;
    Ok(FaultBasis {
        f_hat: stacked.rows(0, n).into_owned(),
        g_hat: stacked.rows(n, p).into_owned(),
        n_z: stacked.ncols(),
        raw,
        constraint_singular_values: sv,
        q: SubspaceBasis::new(q)?,
    })
}

fn constraint_matrix(q: &Matrix, a: &Matrix, c: &Matrix, s: usize, p: usize) -> Result<Matrix> {
    let r = q.ncols();
    let n = a.nrows();
    let blocks = s * (s - 1) + (s - 1);
    let mut m = Matrix::zeros(blocks * p, s * r + n);
    let qi = |i: usize| q.view((i * p, 0), (p, r));
    let mut row = 0;
    for i in 0..s {
        for j in i + 1..s {
            m.view_mut((row, j * r), (p, r)).copy_from(&qi(i));
            row += p;
        }
    }
    for i in 0..s - 1 {
        for j in 0..=i {
            m.view_mut((row, j * r), (p, r)).copy_from(&qi(i));
            m.view_mut((row, (j + 1) * r), (p, r))
                .copy_from(&(-qi(i + 1)));
            row += p;
        }
    }
    let o = extended_observability(a, c, s - 1)?;
    m.view_mut((row, s * r), ((s - 1) * p, n)).copy_from(&o);
    m.view_mut((row, 0), ((s - 1) * p, r))
        .copy_from(&(-q.rows(p, (s - 1) * p)));
    debug_assert_eq!(row + (s - 1) * p, m.nrows());
    Ok(m)
}

/// Number of trailing singular values (of `sv`, padded to the column
/// count) that span the nullspace. The gap search is confined to
/// nullities up to `max_nullity`.
fn choose_nullity(sv: &[f64], max_dim: usize, policy: &RankPolicy, max_nullity: usize) -> usize {
    let cols = sv.len();
    let sigma1 = sv.first().copied().unwrap_or(0.0);
    let floor = sigma1 * f64::EPSILON * max_dim as f64;
    match *policy {
        RankPolicy::Gap { min_ratio } => {
            let mut best = (0usize, 0.0f64);
            for k in 1..=max_nullity.min(cols.saturating_sub(1)) {
                let (kept, dropped) = (sv[cols - k - 1], sv[cols - k]);
                let ratio = if dropped > floor {
                    kept / dropped
                } else if kept > floor {
                    f64::INFINITY
                } else {
                    continue;
                };
                if ratio > best.1 {
                    best = (k, ratio);
                }
            }
            if best.1 >= min_ratio {
                best.0
            } else {
                sv.iter().filter(|&&x| x <= floor).count()
            }
        }
        _ => {
            let (rank, _, _) = policy.resolve(sv, max_dim);
            cols - rank
        }
    }
}

/// Orthonormal basis of `range(fg)` rotated so that its columns are the
/// principal directions of the output block, in decreasing output energy.
/// Columns with no output component then carry the pure state-fault
/// directions. Each column's first entry above `1e-10` is positive.
pub fn canonical_basis(fg: &Matrix, n_x: usize) -> Result<Matrix> {
    let k = fg.ncols();
    if k == 0 {
        return Ok(fg.clone());
    }
    let (b, _) = range_basis(fg, &RankPolicy::Absolute { tol: -1.0 })?;
    let b = b.into_matrix().columns(0, k).into_owned();
    let rotated = rotate_by_block(&b, n_x, fg.nrows() - n_x)?;
    Ok(sign_normalized(rotated))
}

/// `b V` with `V` the right singular vectors of the row block `rows`.
fn rotate_by_block(b: &Matrix, start: usize, len: usize) -> Result<Matrix> {
    if len == 0 {
        return Ok(b.clone());
    }
    let block = b.rows(start, len).into_owned();
    let dec = svd(&block)?;
    Ok(b * dec.v)
}

fn sign_normalized(mut m: Matrix) -> Matrix {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        if let Some(&x) = col.iter().find(|x| x.abs() > SIGN_EPS) {
            if x < 0.0 {
                col.neg_mut();
            }
        }
    }
    m
}

/// How to pick `n_v` columns out of the recovered basis.
#[derive(Debug, Clone, PartialEq)]
pub enum Representative {
    /// Dominant right singular directions of the raw basis.
    Leading,
    /// Directions with (numerically) no output-fault component.
    SparseG,
    /// Directions with (numerically) no state-fault component.
    SparseF,
    /// The `n_v`-dimensional subspace of the recovered range closest to
    /// a reference pair.
    Aligned(FaultPair),
}

impl std::str::FromStr for Representative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leading" => Ok(Representative::Leading),
            "sparse-G" | "sparse-g" => Ok(Representative::SparseG),
            "sparse-F" | "sparse-f" => Ok(Representative::SparseF),
            other => Err(Error::Parse(format!(
                "unknown representative policy {other:?}"
            ))),
        }
    }
}

/// Picks `(F P, G P)` for a full-column-rank `P` with `n_v` columns.
/// Every such choice is behaviourally equivalent to the true pair for
/// generic `P`; the policy decides which one is reported.
pub fn select_representative(
    basis: &FaultBasis,
    n_v: usize,
    policy: &Representative,
) -> Result<FaultPair> {
    let n = basis.n_x();
    let n_z = basis.n_z;
    let n_v = match policy {
        Representative::Aligned(reference) => reference.n_v(),
        _ => n_v,
    };
    if n_v == 0 || n_v > n_z {
        return Err(Error::Invalid(format!(
            "cannot pick {n_v} fault directions from {n_z} recovered ones"
        )));
    }
    let stacked = basis.stacked();
    if n_v == n_z {
        return FaultPair::from_stacked(&stacked, n);
    }
    let chosen = match policy {
        Representative::Leading => {
            let dec = svd(&basis.raw)?;
            dec.u.columns(0, n_v).into_owned()
        }
        Representative::SparseG | Representative::SparseF => {
            let (start, len, name) = if *policy == Representative::SparseG {
                (n, stacked.nrows() - n, "G")
            } else {
                (0, n, "F")
            };
            let rotated = rotate_by_block(&stacked, start, len)?;
            let picked = rotated.columns(n_z - n_v, n_v).into_owned();
            let leak = picked.rows(start, len).norm() / (n_v as f64).sqrt();
            if leak > STRUCTURE_TOL {
                return Err(Error::Infeasible(format!(
                    "no {n_v}-dimensional direction with vanishing {name} part (residual {leak:.3})"
                )));
            }
            picked
        }
        Representative::Aligned(reference) => {
            let (refb, _) = range_basis(&reference.stacked(), &RankPolicy::NOISE_FREE)?;
            if refb.dim() != n_v {
                return Err(Error::Invalid(
                    "reference fault pair is rank deficient".into(),
                ));
            }
            let dec = svd(&(stacked.transpose() * refb.basis()))?;
            &stacked * dec.u.columns(0, n_v)
        }
    };
    FaultPair::from_stacked(&sign_normalized(chosen), n)
}
