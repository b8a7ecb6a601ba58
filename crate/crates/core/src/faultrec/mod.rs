//! Fault-dimension estimation, recovery of every fault pair `(F, G)`
//! consistent with the data, behavioural equivalence and fault
//! reconstruction.
//!
//! Everything here works on the residual `R = Y - T U`, the part of the
//! output data not explained by the nominal plant, whose column space is
//! that of `[O_s T^f_s]`.

mod behavior;
mod reconstruct;
mod recover;

pub use behavior::{behavior_contains, behavior_window, behaviorally_equivalent};
pub use reconstruct::{pearson, reconstruct_fault, remixed_correlation, FaultReconstruction};
pub use recover::{
    canonical_basis, fault_basis_from_hankel, recover_fault_matrices, select_representative,
    FaultBasis, FaultRecovery, RecoveryConfig, Representative,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstack::{block_hankel, hstack, numerical_rank, singular_values, Matrix, RankPolicy};
use crate::sysgen::{transmission_zeros, FaultPair, StateSpace};
use crate::trajectory::Trajectory;

/// Block Hankel matrix of the fault residual, `Y_s - T_s U_s`, with
/// `T - s + 1` columns.
pub fn residual_hankel(
    y: &Trajectory,
    u: &Trajectory,
    sys: &StateSpace,
    s: usize,
) -> Result<Matrix> {
    if y.len() != u.len() {
        return Err(Error::Dimension(format!(
            "output has {} samples, input {}",
            y.len(),
            u.len()
        )));
    }
    if y.dim() != sys.n_y() || u.dim() != sys.n_u() {
        return Err(Error::Dimension(format!(
            "data dimensions y {}, u {} for a system with n_y = {}, n_u = {}",
            y.dim(),
            u.dim(),
            sys.n_y(),
            sys.n_u()
        )));
    }
    if s == 0 {
        return Err(Error::Invalid("window must be positive".into()));
    }
    if y.len() < s {
        return Err(Error::Length {
            required: s,
            available: y.len(),
        });
    }
    let n = y.len() - s + 1;
    let yh = block_hankel(y, s, n)?;
    let uh = block_hankel(u, s, n)?;
    Ok(yh - sys.toeplitz(s)? * uh)
}

/// Ranks of `R_s` and `R_(s+1)` read against one shared threshold.
#[derive(Debug, Clone, Serialize)]
pub struct FaultDimEstimate {
    pub n_v: usize,
    pub rank_s: usize,
    pub rank_s_plus_1: usize,
    /// Threshold resolved from the `R_(s+1)` spectrum and applied to both.
    pub threshold: f64,
    pub singular_values_s: Vec<f64>,
    pub singular_values_s_plus_1: Vec<f64>,
    pub window_s: usize,
}

impl FaultDimEstimate {
    /// Total number of zeros implied by `rank R_s = n_x + s n_v - zeta`.
    pub fn zeta_estimate(&self, n_x: usize) -> Option<usize> {
        (n_x + self.window_s * self.n_v).checked_sub(self.rank_s)
    }
}

/// `n_v = rank R_(s+1) - rank R_s`.
pub fn estimate_fault_dim(
    y: &Trajectory,
    u: &Trajectory,
    sys: &StateSpace,
    s: usize,
    policy: &RankPolicy,
) -> Result<FaultDimEstimate> {
    let rs = residual_hankel(y, u, sys, s)?;
    let rs1 = residual_hankel(y, u, sys, s + 1)?;
    fault_dim_from_hankels(&rs, &rs1, s, policy)
}

pub(crate) fn fault_dim_from_hankels(
    rs: &Matrix,
    rs1: &Matrix,
    s: usize,
    policy: &RankPolicy,
) -> Result<FaultDimEstimate> {
    let sv_s = singular_values(rs)?;
    let sv_s1 = singular_values(rs1)?;
    let (_, threshold, _) = policy.resolve(&sv_s1, rs1.nrows().max(rs1.ncols()));
    let count = |sv: &[f64]| sv.iter().filter(|&&x| x > threshold).count();
    let rank_s = count(&sv_s);
    let rank_s_plus_1 = count(&sv_s1);
    if rank_s_plus_1 < rank_s {
        return Err(Error::RankProfile {
            rank_s,
            rank_s_plus_1,
        });
    }
    Ok(FaultDimEstimate {
        n_v: rank_s_plus_1 - rank_s,
        rank_s,
        rank_s_plus_1,
        threshold,
        singular_values_s: sv_s,
        singular_values_s_plus_1: sv_s1,
        window_s: s,
    })
}

/// Rank of `[O_s T^f_s]` with relative tolerance 1e-8.
pub fn behavior_rank(sys_a: &Matrix, sys_c: &Matrix, fault: &FaultPair, s: usize) -> Result<usize> {
    let o = crate::matstack::extended_observability(sys_a, sys_c, s)?;
    let tf = crate::matstack::block_toeplitz(sys_a, &fault.f, sys_c, &fault.g, s)?;
    Ok(numerical_rank(&hstack(&o, &tf)?, &RankPolicy::NOISE_FREE)?.rank)
}

/// Checks `rank [O_s T^f_s] = n_x + s n_v - zeta` for the channel
/// `(A, F, C, G)`, with `zeta` its total number of zeros.
pub fn verify_rank_formula(a: &Matrix, c: &Matrix, fault: &FaultPair, s: usize) -> Result<bool> {
    let zeros = transmission_zeros(a, &fault.f, c, &fault.g)?;
    let Some(l) = zeros.l_delay else {
        return Err(Error::NotLeftInvertible);
    };
    if s < l.max(1) {
        return Err(Error::Invalid(format!(
            "window {s} shorter than the inversion delay {l}"
        )));
    }
    let n_x = a.nrows();
    let expected = (n_x + s * fault.n_v()).checked_sub(zeros.zeta);
    Ok(Some(behavior_rank(a, c, fault, s)?) == expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matstack::matrix_from_rows;
    use crate::sysgen::{example_system, random_system, simulate, white_input};
    use crate::trajectory::Role;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn fault_free_residual_vanishes() {
        let (sys, fault) = example_system();
        let u = white_input(1, 300, 1).unwrap();
        let v = Trajectory::zeros(Role::Fault, 1, 300);
        let (y, _) = simulate(&sys, &fault, &DVector::zeros(3), &u, &v, None).unwrap();
        // only the state trajectory is left: R_s = O_s X
        let (_, x) = sys.response(&DVector::zeros(3), &u).unwrap();
        let r = residual_hankel(&y, &u, &sys, 5).unwrap();
        let ox = sys.observability(5).unwrap() * x.as_matrix().columns(0, 296);
        assert!((&r - ox).norm() <= 1e-10 * r.norm());

        let (y, _) = simulate(&sys, &fault, &DVector::from_element(3, 1.0), &u, &v, None).unwrap();
        let r = residual_hankel(&y, &u, &sys, 5).unwrap();
        assert!(numerical_rank(&r, &RankPolicy::NOISE_FREE).unwrap().rank <= 3);
        let est = estimate_fault_dim(&y, &u, &sys, 5, &RankPolicy::NOISE_FREE).unwrap();
        assert_eq!(est.n_v, 0);
    }

    #[test]
    fn residual_hankel_too_short() {
        let (sys, _) = example_system();
        let u = white_input(1, 3, 1).unwrap();
        let y = Trajectory::zeros(Role::Output, 2, 3);
        assert!(matches!(
            residual_hankel(&y, &u, &sys, 4),
            Err(Error::Length { .. })
        ));
    }

    #[test]
    fn random_channel_fault_dim() {
        for (seed, n_v, zc) in [(1u64, 2usize, 0usize), (2, 2, 2), (3, 1, 1)] {
            let (sys, fault) = random_system(4, 1, 3, n_v, zc, seed).unwrap();
            let t = 600;
            let u = white_input(1, t, seed + 10).unwrap();
            let v = white_input(n_v, t, seed + 20)
                .unwrap()
                .with_role(Role::Fault);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = DVector::from_fn(4, |_, _| rng.sample(StandardNormal));
            let (y, _) = simulate(&sys, &fault, &x0, &u, &v, None).unwrap();
            let est = estimate_fault_dim(&y, &u, &sys, 4, &RankPolicy::NOISE_FREE).unwrap();
            assert_eq!(est.n_v, n_v, "seed {seed}");
        }
    }

    #[test]
    fn rank_formula_cases() {
        // square invertible G with F = 0: the zeros are the eigenvalues of A
        let (sys, _) = example_system();
        let g = matrix_from_rows(2, 2, &[1.0, 0.5, -0.3, 2.0]).unwrap();
        let fault = FaultPair::new(Matrix::zeros(3, 2), g).unwrap();
        let rep = transmission_zeros(&sys.a, &fault.f, &sys.c, &fault.g).unwrap();
        assert_eq!(rep.zeta, 3);
        assert!(verify_rank_formula(&sys.a, &sys.c, &fault, 3).unwrap());
        assert_eq!(behavior_rank(&sys.a, &sys.c, &fault, 3).unwrap(), 3 * 2);

        let (sys, fault) = random_system(5, 1, 3, 1, 2, 8).unwrap();
        assert!(verify_rank_formula(&sys.a, &sys.c, &fault, 5).unwrap());

        // G = 0 with full column rank CF: one delay step per channel
        let (sys, _) = random_system(4, 1, 3, 2, 0, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Matrix::from_fn(4, 2, |_, _| rng.sample(StandardNormal));
        let fault = FaultPair::new(f, Matrix::zeros(3, 2)).unwrap();
        let rep = transmission_zeros(&sys.a, &fault.f, &sys.c, &fault.g).unwrap();
        assert!(rep.infinite_zero_count >= 2);
        assert!(verify_rank_formula(&sys.a, &sys.c, &fault, 4).unwrap());
    }

    #[test]
    fn rank_formula_rejects_non_invertible() {
        let (sys, _) = example_system();
        let fault = FaultPair::new(Matrix::zeros(3, 1), Matrix::zeros(2, 1)).unwrap();
        assert!(matches!(
            verify_rank_formula(&sys.a, &sys.c, &fault, 3),
            Err(Error::NotLeftInvertible)
        ));
    }
}
