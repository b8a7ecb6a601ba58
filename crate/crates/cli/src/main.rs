use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use faultid::faultrec::{
    reconstruct_fault, recover_fault_matrices, select_representative, RecoveryConfig,
    Representative,
};
use faultid::harness::{self, ExperimentConfig};
use faultid::matstack::{from_rows, Matrix, RankPolicy};
use faultid::subid::pi_moesp;
use faultid::sysgen::{
    colored_noise, example_system, random_system, simulate, white_input, FaultPair, StateSpace,
    SystemFile,
};
use faultid::{Error, Role, Trajectory};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "faultid",
    version,
    about = "System identification and fault recovery from faulty input-output data"
)]
struct Cli {
    /// JSON file overriding fields of the experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a plant with a fault and write u, v, y, x as CSV.
    Simulate {
        /// Plant and fault pair as JSON; defaults to the benchmark plant.
        #[arg(long)]
        system: Option<PathBuf>,
        /// Generate a random plant (dimensions from the config) whose fault
        /// channel has this many finite zeros.
        #[arg(long, conflicts_with = "system")]
        random_zeros: Option<usize>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Identify (A, B, C, D) with PI-MOESP.
    Identify {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Block rows of the data Hankel matrices.
        #[arg(long)]
        window: Option<usize>,
        /// Fixed model order instead of the singular-value gap.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Estimate the fault dimension, recover (F, G) and reconstruct the fault.
    FaultRecover {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Plant model as JSON with A, B, C, D (for example the output of
        /// `identify`); `x_tilde_0` is used when present.
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::Gap)]
        rank_policy: PolicyArg,
        /// Relative tolerance (rel) or minimum gap ratio (gap).
        #[arg(long)]
        rank_tol: Option<f64>,
        #[arg(long, default_value = "leading")]
        policy: String,
    },
    /// Run the benchmark example through the exact and identified models.
    Example,
    /// Run the Monte-Carlo study.
    Montecarlo,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Rel,
    Gap,
}

impl PolicyArg {
    fn resolve(self, tol: Option<f64>) -> RankPolicy {
        match self {
            PolicyArg::Rel => RankPolicy::Relative {
                tol: tol.unwrap_or(1e-8),
            },
            PolicyArg::Gap => RankPolicy::Gap {
                min_ratio: tol.unwrap_or(10.0),
            },
        }
    }
}

/// Plant model as read by `fault-recover`.
#[allow(non_snake_case)]
#[derive(Deserialize)]
struct ModelFile {
    A: Vec<Vec<f64>>,
    B: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    D: Vec<Vec<f64>>,
    #[serde(default)]
    x_tilde_0: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct RecoverReport<'a> {
    #[serde(flatten)]
    recovery: &'a faultid::faultrec::FaultRecovery,
    policy: &'a str,
    representative: &'a FaultPair,
    #[serde(with = "faultid::matstack::serde_rows::vector")]
    xi0: DVector<f64>,
    fault_csv: String,
    replay_residual: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // numerical failures carry their stage label in the message
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn load_config(cli: &Cli, base: ExperimentConfig) -> faultid::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_json_over(&base, &std::fs::read_to_string(path)?)?,
        None => base,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.out_dir = Some(cli.out.clone());
    cfg.validate()?;
    Ok(cfg)
}

fn read_trajectory(path: &Path, role: Role) -> faultid::Result<Trajectory> {
    Trajectory::read_csv(role, BufReader::new(File::open(path)?))
}

fn write_trajectory(path: &Path, t: &Trajectory) -> faultid::Result<()> {
    t.write_csv(std::io::BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> faultid::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: &Cli) -> faultid::Result<()> {
    match &cli.command {
        Command::Simulate {
            system,
            random_zeros,
            t,
            snr_db,
        } => {
            let mut cfg = load_config(cli, ExperimentConfig::example())?;
            if let Some(t) = t {
                cfg.t = *t;
            }
            if snr_db.is_some() {
                cfg.snr_db = *snr_db;
            }
            simulate_cmd(&cfg, system.as_deref(), *random_zeros, &cli.out)
        }
        Command::Identify {
            u,
            y,
            window,
            order,
        } => {
            let u = read_trajectory(u, Role::Input)?;
            let y = read_trajectory(y, Role::Output)?;
            let s = window.unwrap_or_else(|| faultid::subid::default_window(*order));
            let id = pi_moesp(&u, &y, s, *order).map_err(|e| stage("identify", e))?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("identified.json");
            write_json(&path, &id)?;
            println!(
                "order {} (window {s}), written to {}",
                id.chosen_order,
                path.display()
            );
            Ok(())
        }
        Command::FaultRecover {
            u,
            y,
            system,
            window,
            rank_policy,
            rank_tol,
            policy,
        } => {
            let u = read_trajectory(u, Role::Input)?;
            let y = read_trajectory(y, Role::Output)?;
            let model: ModelFile = serde_json::from_reader(BufReader::new(File::open(system)?))?;
            let sys = StateSpace::new(
                rows_or_empty(&model.A, 0)?,
                rows_or_empty(&model.B, model.A.len())?,
                from_rows(&model.C)?,
                rows_or_empty(&model.D, model.C.len())?,
            )?;
            let rep: Representative = policy.parse()?;
            let rank = rank_policy.resolve(*rank_tol);
            let config = RecoveryConfig {
                rank_policy: rank,
                null_policy: rank,
            };
            let recovery = recover_fault_matrices(&y, &u, &sys, *window, &config)
                .map_err(|e| stage("recover", e))?;
            let chosen = select_representative(&recovery.basis, recovery.n_v_estimate, &rep)
                .map_err(|e| stage("select", e))?;
            let x_tilde_0 = match &model.x_tilde_0 {
                Some(x) => DVector::from_column_slice(x),
                None => DVector::zeros(sys.n_x()),
            };
            let rec = reconstruct_fault(&y, &u, &sys, &chosen, &x_tilde_0)
                .map_err(|e| stage("reconstruct", e))?;
            std::fs::create_dir_all(&cli.out)?;
            let fault_csv = cli.out.join("fault_reconstructed.csv");
            write_trajectory(&fault_csv, &rec.v)?;
            let report = RecoverReport {
                recovery: &recovery,
                policy,
                representative: &chosen,
                xi0: rec.xi0.clone(),
                fault_csv: fault_csv.display().to_string(),
                replay_residual: rec.replay_residual,
            };
            let path = cli.out.join("fault_recovery.json");
            write_json(&path, &report)?;
            println!(
                "n_v = {}, n_z = {}, replay residual {:.3e}, written to {}",
                recovery.n_v_estimate,
                recovery.n_z(),
                rec.replay_residual,
                path.display()
            );
            Ok(())
        }
        Command::Example => {
            let cfg = load_config(cli, ExperimentConfig::example())?;
            let report = harness::run_example(&cfg)?;
            for (name, b) in [
                ("exact", &report.exact),
                ("identified", &report.identified.branch),
            ] {
                println!(
                    "{name:>10}: n_v = {}, rank R_s = {}, rank R_s+1 = {}, n_z = {}, error {:.4}%, replay {:.2e}",
                    b.recovery.n_v_estimate,
                    b.recovery.rank_s,
                    b.recovery.rank_s_plus_1,
                    b.recovery.n_z(),
                    b.grassmann_error,
                    b.reconstruction.replay_residual
                );
            }
            println!(
                "identified order {}, Markov parameter error {:.2}%; reports in {}",
                report.identified.identification.chosen_order,
                100.0 * report.identified.markov_error,
                cli.out.display()
            );
            Ok(())
        }
        Command::Montecarlo => {
            let cfg = load_config(cli, ExperimentConfig::montecarlo())?;
            let report = harness::run_montecarlo(&cfg)?;
            for b in &report.per_count {
                println!(
                    "{} zeros: median {:.3e}%, quartiles [{:.3e}, {:.3e}], {} runs",
                    b.zeros, b.median, b.q1, b.q3, b.count
                );
            }
            match report.overall_median {
                Some(m) => println!("overall median {m:.3e}%"),
                None => println!("no successful runs"),
            }
            println!(
                "{} failures, n_v correct in {}/{}; reports in {}",
                report.failures,
                report.n_v_correct,
                report.records.len(),
                cli.out.display()
            );
            Ok(())
        }
    }
}

fn stage(name: &'static str, e: Error) -> Error {
    Error::Stage {
        stage: name,
        source: Box::new(e),
    }
}

/// Nested rows, allowing `[]` or `[[], ...]` for matrices with no columns.
fn rows_or_empty(rows: &[Vec<f64>], nrows: usize) -> faultid::Result<Matrix> {
    if rows.iter().all(Vec::is_empty) {
        Ok(Matrix::zeros(nrows.max(rows.len()), 0))
    } else {
        from_rows(rows)
    }
}

fn simulate_cmd(
    cfg: &ExperimentConfig,
    system: Option<&Path>,
    random_zeros: Option<usize>,
    out: &Path,
) -> faultid::Result<()> {
    let (sys, fault) = match (system, random_zeros) {
        (Some(path), _) => {
            let file: SystemFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
            file.to_system()?
        }
        (None, Some(k)) => {
            let d = cfg.dims;
            random_system(d.n_x, d.n_u, d.n_y, d.n_v, k, cfg.seed)
                .map_err(|e| stage("generate", e))?
        }
        (None, None) => example_system(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = DVector::from_fn(sys.n_x(), |_, _| rng.sample(StandardNormal));
    let u = white_input(sys.n_u(), cfg.t, rng.random())?;
    let v = harness::benchmark_faults(fault.n_v(), cfg.t, rng.random())?;
    let noise_seed: u64 = rng.random();
    let (clean, x) = simulate(&sys, &fault, &x0, &u, &v, None).map_err(|e| stage("simulate", e))?;
    let y = match cfg.snr_db {
        Some(snr) => &clean + &colored_noise(&clean, snr, noise_seed)?,
        None => clean,
    };
    std::fs::create_dir_all(out)?;
    write_trajectory(&out.join("u.csv"), &u)?;
    write_trajectory(&out.join("v.csv"), &v)?;
    write_trajectory(&out.join("y.csv"), &y)?;
    write_trajectory(&out.join("x.csv"), &x)?;
    write_json(
        &out.join("system.json"),
        &SystemFile::new(&sys, Some(&fault), Some(cfg.seed)),
    )?;
    println!(
        "simulated {} samples (n_x = {}, n_y = {}, n_v = {}) into {}",
        cfg.t,
        sys.n_x(),
        sys.n_y(),
        fault.n_v(),
        out.display()
    );
    Ok(())
}
