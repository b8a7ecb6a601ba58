use faultid::faultrec::{behaviorally_equivalent, recover_fault_matrices, RecoveryConfig};
use faultid::matstack::{grassmann_error, Matrix, RankPolicy, SubspaceBasis};
use faultid::sysgen::{random_system, simulate, transmission_zeros, white_input};
use faultid::{FaultPair, Role};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_systems_meet_their_contract(seed in any::<u64>(), zeros in 0usize..4, n_v in 1usize..3) {
        let (sys, fault) = random_system(5, 1, 3, n_v, zeros, seed).unwrap();
        prop_assert!(sys.spectral_radius() < 1.0);
        prop_assert!(sys.is_minimal());
        let report = transmission_zeros(&sys.a, &fault.f, &sys.c, &fault.g).unwrap();
        prop_assert!(report.is_left_invertible());
        prop_assert_eq!(report.finite_count(), zeros);
    }

    // Noise-free data: the true pair lies in the recovered range, whose
    // dimension is n_v plus the number of zeros.
    #[test]
    fn recovered_range_contains_truth(seed in any::<u64>(), zeros in 0usize..3, n_v in 1usize..3) {
        let (sys, fault) = random_system(4, 1, 3, n_v, zeros, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let len = 300;
        let x0 = DVector::from_fn(4, |_, _| rng.sample(StandardNormal));
        let u = white_input(1, len, rng.random()).unwrap();
        let v = white_input(n_v, len, rng.random()).unwrap().with_role(Role::Fault);
        let (y, _) = simulate(&sys, &fault, &x0, &u, &v, None).unwrap();
        let rec = recover_fault_matrices(&y, &u, &sys, 6, &RecoveryConfig::noise_free()).unwrap();
        let zeta = transmission_zeros(&sys.a, &fault.f, &sys.c, &fault.g).unwrap().zeta;
        prop_assert_eq!(rec.n_v_estimate, n_v);
        prop_assert_eq!(rec.n_z(), n_v + zeta);
        prop_assert!(rec.basis.projection_residual(&fault) <= 1e-8);
    }

    // The J-ambiguity: (FJ, GJ) explains the same outputs and spans the same
    // subspace for any invertible J.
    #[test]
    fn mixing_preserves_behavior_and_span(seed in any::<u64>()) {
        let (sys, fault) = random_system(4, 1, 3, 2, 1, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = gaussian(&mut rng, 2, 2);
        prop_assume!(j.determinant().abs() > 1e-3);
        let mixed = fault.mix(&j).unwrap();
        prop_assert!(behaviorally_equivalent(&sys.a, &sys.c, &fault, &mixed, 1e-8).unwrap());
        let a = SubspaceBasis::span_of(&fault.stacked(), &RankPolicy::NOISE_FREE).unwrap();
        let b = SubspaceBasis::span_of(&mixed.stacked(), &RankPolicy::NOISE_FREE).unwrap();
        prop_assert!(grassmann_error(&a, &b).unwrap() <= 1e-6);
    }

    #[test]
    fn perturbed_pairs_are_not_equivalent(seed in any::<u64>()) {
        let (sys, fault) = random_system(4, 1, 3, 1, 0, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let other = FaultPair::new(
            &fault.f + gaussian(&mut rng, 4, 1) * 0.1,
            fault.g.clone(),
        ).unwrap();
        prop_assert!(!behaviorally_equivalent(&sys.a, &sys.c, &fault, &other, 1e-8).unwrap());
    }
}
