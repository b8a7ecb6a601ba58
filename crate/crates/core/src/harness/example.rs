use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{align_fault, fault_error, write_json, ExperimentConfig};
use crate::error::{Result, StageExt};
use crate::faultrec::{
    reconstruct_fault, recover_fault_matrices, remixed_correlation, select_representative,
    FaultReconstruction, FaultRecovery,
};
use crate::matstack::{serde_rows, write_matrix_csv};
use crate::subid::{markov_error, pi_moesp, IdentResult};
use crate::sysgen::{
    colored_noise, example_system, fault_signal, simulate, white_input, FaultKind, FaultPair,
    StateSpace,
};
use crate::trajectory::Trajectory;

/// Modelling choices the benchmark leaves open, echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct Assumptions {
    pub input_variance: f64,
    pub initial_state: &'static str,
    pub fault_signal: FaultKind,
}

/// One pass of recovery, selection and reconstruction against one plant
/// model.
#[derive(Debug, Clone, Serialize)]
pub struct BranchReport {
    pub recovery: FaultRecovery,
    pub representative: FaultPair,
    /// Normalized Grassmannian error (%) of the representative against the
    /// true pair in the model's coordinates.
    pub grassmann_error: f64,
    /// Relative residual of projecting the true pair onto the recovered
    /// range.
    pub projection_residual: f64,
    pub reconstruction: FaultReconstruction,
    /// Absolute correlation of the reconstructed and true fault after
    /// linear re-mixing, per channel.
    pub fault_correlation: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentifiedBranch {
    pub identification: IdentResult,
    /// Relative error of the first `2 window` Markov parameters.
    pub markov_error: f64,
    #[serde(flatten)]
    pub branch: BranchReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub config: ExperimentConfig,
    pub assumptions: Assumptions,
    #[serde(with = "serde_rows::vector")]
    pub x0: DVector<f64>,
    pub exact: BranchReport,
    pub identified: IdentifiedBranch,
}

/// Simulates the benchmark plant with fault `v1` and runs fault recovery
/// twice: with the true plant matrices and with the PI-MOESP estimate.
pub fn run_example(config: &ExperimentConfig) -> Result<ExampleReport> {
    config.validate()?;
    let (sys, fault) = example_system();
    let t = config.t;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x0 = DVector::from_fn(sys.n_x(), |_, _| rng.sample(StandardNormal));
    let u = white_input(sys.n_u(), t, rng.random()).stage("simulate")?;
    let v = fault_signal(FaultKind::V1, t, rng.random()).stage("simulate")?;
    let noise_seed: u64 = rng.random();
    let (clean, _) = simulate(&sys, &fault, &x0, &u, &v, None).stage("simulate")?;
    let y = match config.snr_db {
        Some(snr) => &clean + &colored_noise(&clean, snr, noise_seed).stage("simulate")?,
        None => clean,
    };

    let x0_exact =
        crate::subid::estimate_initial_state(&sys, &u, &y, sys.n_x()).stage("initial state")?;
    let exact = run_branch(config, &sys, &fault, &u, &y, &v, &x0_exact)?;

    let ident = pi_moesp(&u, &y, config.ident_window(), None).stage("identify")?;
    let markov = markov_error(&ident.system, &sys, 2 * config.ident_window());
    let truth_id = align_fault(&sys, &ident.system, &fault).stage("align")?;
    let identified = run_branch(
        config,
        &ident.system,
        &truth_id,
        &u,
        &y,
        &v,
        &ident.x_tilde_0,
    )?;

    let report = ExampleReport {
        config: config.clone(),
        assumptions: Assumptions {
            input_variance: 1.0,
            initial_state: "standard normal",
            fault_signal: FaultKind::V1,
        },
        x0,
        exact,
        identified: IdentifiedBranch {
            identification: ident,
            markov_error: markov,
            branch: identified,
        },
    };
    if let Some(dir) = &config.out_dir {
        write_example(&report, dir)?;
    }
    Ok(report)
}

fn run_branch(
    config: &ExperimentConfig,
    sys: &StateSpace,
    truth: &FaultPair,
    u: &Trajectory,
    y: &Trajectory,
    v: &Trajectory,
    x_tilde_0: &DVector<f64>,
) -> Result<BranchReport> {
    let recovery =
        recover_fault_matrices(y, u, sys, config.s, &config.recovery()).stage("recover")?;
    let representative = select_representative(
        &recovery.basis,
        recovery.n_v_estimate,
        &config.representative.policy(),
    )
    .stage("select")?;
    let grassmann_error = fault_error(&representative, truth).stage("score")?;
    let projection_residual = recovery.basis.projection_residual(truth);
    let reconstruction =
        reconstruct_fault(y, u, sys, &representative, x_tilde_0).stage("reconstruct")?;
    let fault_correlation = remixed_correlation(&reconstruction.v, v).stage("reconstruct")?;
    Ok(BranchReport {
        recovery,
        representative,
        grassmann_error,
        projection_residual,
        reconstruction,
        fault_correlation,
    })
}

/// Writes the report, identified matrices, recovered bases, reconstructed
/// faults and singular-value plot data into `dir`.
pub fn write_example(report: &ExampleReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("example_report.json"), report)?;
    write_json(
        &dir.join("identified_system.json"),
        &report.identified.identification,
    )?;
    for (name, branch) in [
        ("exact", &report.exact),
        ("identified", &report.identified.branch),
    ] {
        let basis = branch.recovery.basis.stacked();
        write_matrix_csv(
            &basis,
            std::fs::File::create(dir.join(format!("fault_basis_{name}.csv")))?,
        )?;
        branch.reconstruction.v.write_csv(std::fs::File::create(
            dir.join(format!("fault_{name}.csv")),
        )?)?;
    }
    super::emit_plot_data(
        super::ReportRef::Example(report),
        super::PlotKind::SingularValues,
        dir,
    )?;
    Ok(())
}
