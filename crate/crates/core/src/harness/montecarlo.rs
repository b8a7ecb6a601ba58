use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{align_fault, fault_error, write_json, ExperimentConfig};
use crate::error::{Error, Result, StageExt};
use crate::faultrec::{recover_fault_matrices, select_representative, Representative};
use crate::matstack::vstack;
use crate::subid::pi_moesp;
use crate::sysgen::{
    colored_noise, fault_signal, random_system, simulate, white_input, FaultKind,
};
use crate::trajectory::{Role, Trajectory};

/// Outcome for one random system.
#[derive(Debug, Clone, Serialize)]
pub struct McRecord {
    pub index: usize,
    pub seed: u64,
    pub zero_count: usize,
    /// Normalized Grassmannian error (%) of the best `n_v`-dimensional
    /// subspace of the recovered range against the true `[F; G]`.
    pub grassmann_error: Option<f64>,
    pub n_v_estimate: Option<usize>,
    pub n_v_correct: bool,
    pub n_z: Option<usize>,
    pub identified_order: Option<usize>,
    /// The estimated order was wrong and the true order was used instead.
    pub order_fallback: bool,
    /// Stage and message of a failed run; such runs carry no error value
    /// and are left out of the statistics.
    pub failure: Option<String>,
    /// Wall-clock time, kept out of the JSON report so that reports are
    /// reproducible.
    #[serde(skip)]
    pub runtime: Duration,
}

/// Tukey box-plot summary of the errors for one zero count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub zeros: usize,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub lo_whisker: f64,
    pub hi_whisker: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub config: ExperimentConfig,
    pub records: Vec<McRecord>,
    pub overall_median: Option<f64>,
    pub per_count: Vec<BoxStats>,
    pub failures: usize,
    pub n_v_correct: usize,
}

/// Seed of instance `index`, a fixed function of the base seed so that
/// results do not depend on scheduling.
pub fn instance_seed(base: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

/// Generates, simulates, identifies and recovers `systems_per_count`
/// systems for every zero count, in parallel.
pub fn run_montecarlo(config: &ExperimentConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    if config.zero_counts.is_empty() {
        return Err(Error::Invalid("no zero counts to simulate".into()));
    }
    let jobs: Vec<(usize, usize)> = config
        .zero_counts
        .iter()
        .flat_map(|&z| std::iter::repeat_n(z, config.systems_per_count))
        .enumerate()
        .collect();
    let records: Vec<McRecord> = jobs
        .par_iter()
        .map(|&(index, zeros)| run_instance(config, index, zeros))
        .collect();
    for r in &records {
        if let Some(f) = &r.failure {
            log::warn!("system {} ({} zeros) failed: {f}", r.index, r.zero_count);
        } else if r.order_fallback {
            log::warn!(
                "system {}: order estimate rejected, used the true order",
                r.index
            );
        }
    }

    let mut per_count = Vec::new();
    for &z in dedup(&config.zero_counts).iter() {
        let errs: Vec<f64> = records
            .iter()
            .filter(|r| r.zero_count == z)
            .filter_map(|r| r.grassmann_error)
            .collect();
        if let Some(stats) = box_stats(z, &errs) {
            per_count.push(stats);
        }
    }
    let all: Vec<f64> = records.iter().filter_map(|r| r.grassmann_error).collect();
    let report = MonteCarloReport {
        config: config.clone(),
        overall_median: median(&all),
        per_count,
        failures: records.iter().filter(|r| r.failure.is_some()).count(),
        n_v_correct: records.iter().filter(|r| r.n_v_correct).count(),
        records,
    };
    if let Some(dir) = &config.out_dir {
        write_montecarlo(&report, dir)?;
    }
    Ok(report)
}

fn dedup(v: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &x in v {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn run_instance(config: &ExperimentConfig, index: usize, zero_count: usize) -> McRecord {
    let seed = instance_seed(config.seed, index);
    let start = Instant::now();
    let mut record = McRecord {
        index,
        seed,
        zero_count,
        grassmann_error: None,
        n_v_estimate: None,
        n_v_correct: false,
        n_z: None,
        identified_order: None,
        order_fallback: false,
        failure: None,
        runtime: Duration::ZERO,
    };
    if let Err(e) = score_instance(config, zero_count, seed, &mut record) {
        record.failure = Some(e.to_string());
    }
    record.runtime = start.elapsed();
    record
}

/// Fault signal with channels alternating between `v1` and `v2`.
pub fn benchmark_faults(n_v: usize, len: usize, seed: u64) -> Result<Trajectory> {
    let mut data = crate::matstack::Matrix::zeros(0, len);
    for i in 0..n_v {
        let kind = if i % 2 == 0 {
            FaultKind::V1
        } else {
            FaultKind::V2
        };
        let ch = fault_signal(kind, len, seed.wrapping_add(i as u64))?;
        data = vstack(&data, ch.as_matrix())?;
    }
    Trajectory::from_columns(Role::Fault, data)
}

fn score_instance(
    config: &ExperimentConfig,
    zero_count: usize,
    seed: u64,
    record: &mut McRecord,
) -> Result<()> {
    let d = config.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sys, fault) =
        random_system(d.n_x, d.n_u, d.n_y, d.n_v, zero_count, rng.random()).stage("generate")?;
    let u = white_input(d.n_u, config.t, rng.random()).stage("simulate")?;
    let v = benchmark_faults(d.n_v, config.t, rng.random()).stage("simulate")?;
    let x0 = DVector::from_fn(d.n_x, |_, _| rng.sample(StandardNormal));
    let noise_seed: u64 = rng.random();
    let (clean, _) = simulate(&sys, &fault, &x0, &u, &v, None).stage("simulate")?;
    let y = match config.snr_db {
        Some(snr) => &clean + &colored_noise(&clean, snr, noise_seed).stage("simulate")?,
        None => clean,
    };

    let window = config.ident_window();
    let ident = match pi_moesp(&u, &y, window, None) {
        Ok(id) if id.chosen_order == d.n_x => id,
        _ => {
            record.order_fallback = true;
            pi_moesp(&u, &y, window, Some(d.n_x)).stage("identify")?
        }
    };
    record.identified_order = Some(ident.chosen_order);

    let recovery = recover_fault_matrices(&y, &u, &ident.system, config.s, &config.recovery())
        .stage("recover")?;
    record.n_v_estimate = Some(recovery.n_v_estimate);
    record.n_v_correct = recovery.n_v_estimate == d.n_v;
    record.n_z = Some(recovery.n_z());
    // A recovered range that fills the ambient space contains every
    // candidate pair, so its aligned error is zero without saying anything
    // about the true fault directions.
    if recovery.n_z() >= d.n_x + d.n_y {
        return Err(Error::Degenerate(format!(
            "recovered fault range has dimension {} = n_x + n_y; fault directions not identified",
            recovery.n_z()
        )))
        .stage("score");
    }

    let truth = align_fault(&sys, &ident.system, &fault).stage("align")?;
    let best = select_representative(
        &recovery.basis,
        d.n_v,
        &Representative::Aligned(truth.clone()),
    )
    .stage("score")?;
    record.grassmann_error = Some(fault_error(&best, &truth).stage("score")?);
    Ok(())
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile(&v, 0.5))
}

/// Quartiles, whiskers at the most extreme values within 1.5 IQR of the
/// box, and the values beyond them.
pub fn box_stats(zeros: usize, values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v
        .iter()
        .copied()
        .filter(|&x| x >= lo_fence && x <= hi_fence)
        .collect();
    Some(BoxStats {
        zeros,
        count: v.len(),
        median: quantile(&v, 0.5),
        q1,
        q3,
        lo_whisker: inside[0],
        hi_whisker: inside[inside.len() - 1],
        outliers: v
            .iter()
            .copied()
            .filter(|&x| x < lo_fence || x > hi_fence)
            .collect(),
    })
}

/// Writes the report, a per-run timing table and the box-plot data.
pub fn write_montecarlo(report: &MonteCarloReport, dir: &Path) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("montecarlo_report.json"), report)?;
    let mut timing = std::fs::File::create(dir.join("timings.csv"))?;
    writeln!(timing, "index,zeros,seconds")?;
    for r in &report.records {
        writeln!(
            timing,
            "{},{},{}",
            r.index,
            r.zero_count,
            r.runtime.as_secs_f64()
        )?;
    }
    if report.per_count.is_empty() {
        log::warn!("no successful runs; boxplot.csv not written");
    } else {
        super::emit_plot_data(
            super::ReportRef::MonteCarlo(report),
            super::PlotKind::Boxplot,
            dir,
        )?;
    }
    Ok(())
}
