use faultid::faultrec::{
    reconstruct_fault, recover_fault_matrices, remixed_correlation, select_representative,
};
use faultid::harness::{
    align_fault, emit_plot_data, fault_error, run_example, run_montecarlo, ExperimentConfig,
    PlotKind, ReportRef,
};
use faultid::subid::{estimate_initial_state, pi_moesp};
use faultid::sysgen::{example_system, fault_signal, simulate, white_input, FaultKind};
use faultid::Error;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn example_matches_manual_chain() {
    let config = ExperimentConfig::example();
    let report = run_example(&config).unwrap();

    let (sys, fault) = example_system();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x0 = DVector::from_fn(3, |_, _| rng.sample(StandardNormal));
    let u = white_input(1, config.t, rng.random()).unwrap();
    let v = fault_signal(FaultKind::V1, config.t, rng.random()).unwrap();
    let _noise_seed: u64 = rng.random();
    let (y, _) = simulate(&sys, &fault, &x0, &u, &v, None).unwrap();
    assert_eq!(report.x0, x0);

    let rec = recover_fault_matrices(&y, &u, &sys, config.s, &config.recovery()).unwrap();
    let rep = select_representative(
        &rec.basis,
        rec.n_v_estimate,
        &config.representative.policy(),
    )
    .unwrap();
    assert_eq!(rec.n_z(), report.exact.recovery.n_z());
    assert_eq!(rep.stacked(), report.exact.representative.stacked());
    assert_eq!(
        fault_error(&rep, &fault).unwrap(),
        report.exact.grassmann_error
    );
    let x_tilde = estimate_initial_state(&sys, &u, &y, 3).unwrap();
    let out = reconstruct_fault(&y, &u, &sys, &rep, &x_tilde).unwrap();
    assert_eq!(
        out.replay_residual,
        report.exact.reconstruction.replay_residual
    );
    assert_eq!(
        remixed_correlation(&out.v, &v).unwrap(),
        report.exact.fault_correlation
    );

    let id = pi_moesp(&u, &y, config.ident_window(), None).unwrap();
    assert_eq!(id.system, report.identified.identification.system);
    let truth = align_fault(&sys, &id.system, &fault).unwrap();
    let rec = recover_fault_matrices(&y, &u, &id.system, config.s, &config.recovery()).unwrap();
    let rep = select_representative(
        &rec.basis,
        rec.n_v_estimate,
        &config.representative.policy(),
    )
    .unwrap();
    assert_eq!(
        fault_error(&rep, &truth).unwrap(),
        report.identified.branch.grassmann_error
    );
}

#[test]
fn example_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        out_dir: Some(dir.path().to_path_buf()),
        ..ExperimentConfig::example()
    };
    let snapshot = || {
        let mut files: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    run_example(&config).unwrap();
    let first = snapshot();
    assert!(first.len() >= 8);
    run_example(&config).unwrap();
    let second = snapshot();
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        assert!(a == b, "{name:?} differs");
    }
    assert_eq!(first.len(), second.len());
}

#[test]
fn singular_value_csv_has_twelve_rows() {
    let report = run_example(&ExperimentConfig::example()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plot_data(
        ReportRef::Example(&report),
        PlotKind::SingularValues,
        dir.path(),
    )
    .unwrap();
    for f in files {
        let text = std::fs::read_to_string(f).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,sv_Rs,sv_Rs1");
        assert_eq!(lines.len(), 13);
        assert!(lines[11].starts_with("11,,"));
        assert!(lines[12].starts_with("12,,"));
    }
    assert!(matches!(
        emit_plot_data(ReportRef::Example(&report), PlotKind::Boxplot, dir.path()),
        Err(Error::MissingSeries(_))
    ));
}

#[test]
fn montecarlo_records_every_system() {
    let config = ExperimentConfig {
        t: 500,
        systems_per_count: 2,
        ..ExperimentConfig::montecarlo()
    };
    let report = run_montecarlo(&config).unwrap();
    assert_eq!(report.records.len(), 8);
    for (i, r) in report.records.iter().enumerate() {
        assert_eq!(r.index, i);
        assert_eq!(r.zero_count, config.zero_counts[i / 2]);
        // every record is either scored or carries a failure reason
        assert!(r.grassmann_error.is_some() != r.failure.is_some());
    }
    assert_eq!(
        report.failures,
        report
            .records
            .iter()
            .filter(|r| r.failure.is_some())
            .count()
    );
    let again = run_montecarlo(&config).unwrap();
    assert_eq!(
        serde_json::to_string(&report).unwrap(),
        serde_json::to_string(&again).unwrap()
    );
}
