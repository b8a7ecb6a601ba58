//! End-to-end experiments: the benchmark example through both the exact
//! and the identified plant, the Monte-Carlo study over random systems,
//! and their CSV plot data.

mod config;
mod example;
mod montecarlo;

pub use config::{ExperimentConfig, RepresentativeKind};
pub use example::{
    run_example, write_example, Assumptions, BranchReport, ExampleReport, IdentifiedBranch,
};
pub use montecarlo::{
    benchmark_faults, box_stats, instance_seed, median, run_montecarlo, write_montecarlo, BoxStats,
    McRecord, MonteCarloReport,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstack::{grassmann_error, min_norm_lsq, RankPolicy, SubspaceBasis};
use crate::sysgen::{FaultPair, StateSpace};

/// `fault` expressed in the state coordinates of `model`, an estimate of
/// `truth` of the same order. The similarity is the least-squares solution
/// of `O_truth T = O_model` over `2 n_x` block rows.
pub fn align_fault(truth: &StateSpace, model: &StateSpace, fault: &FaultPair) -> Result<FaultPair> {
    let n = truth.n_x();
    if model.n_x() != n {
        return Err(Error::Dimension(format!(
            "model order {} differs from the true order {n}",
            model.n_x()
        )));
    }
    let t = min_norm_lsq(&truth.observability(2 * n)?, &model.observability(2 * n)?)?;
    let t_inv = t
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("model and plant are not similar".into()))?;
    FaultPair::new(t_inv * &fault.f, fault.g.clone())
}

/// Normalized Grassmannian error (%) between the stacked `[F; G]` ranges.
pub fn fault_error(estimate: &FaultPair, truth: &FaultPair) -> Result<f64> {
    let a = SubspaceBasis::span_of(&estimate.stacked(), &RankPolicy::NOISE_FREE)?;
    let b = SubspaceBasis::span_of(&truth.stacked(), &RankPolicy::NOISE_FREE)?;
    grassmann_error(&a, &b)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    SingularValues,
    Boxplot,
}

#[derive(Debug, Clone, Copy)]
pub enum ReportRef<'a> {
    Example(&'a ExampleReport),
    MonteCarlo(&'a MonteCarloReport),
}

/// `index,sv_Rs,sv_Rs1`, one line per singular value of the longer list;
/// the shorter column is left empty past its end.
pub fn singular_value_csv(sv_s: &[f64], sv_s1: &[f64]) -> String {
    let mut out = String::from("index,sv_Rs,sv_Rs1\n");
    let cell = |v: &[f64], i: usize| v.get(i).map(f64::to_string).unwrap_or_default();
    for i in 0..sv_s.len().max(sv_s1.len()) {
        writeln!(out, "{},{},{}", i + 1, cell(sv_s, i), cell(sv_s1, i)).unwrap();
    }
    out
}

/// `zeros,median,q1,q3,lo_whisker,hi_whisker,outliers` with the outliers
/// separated by semicolons.
pub fn boxplot_csv(stats: &[BoxStats]) -> String {
    let mut out = String::from("zeros,median,q1,q3,lo_whisker,hi_whisker,outliers\n");
    for b in stats {
        let outliers: Vec<String> = b.outliers.iter().map(f64::to_string).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.zeros,
            b.median,
            b.q1,
            b.q3,
            b.lo_whisker,
            b.hi_whisker,
            outliers.join(";")
        )
        .unwrap();
    }
    out
}

/// Writes the requested plot data into `dir` and returns the file paths.
///
/// For the example, `singular_values.csv` holds the identified-model
/// residual spectra and `singular_values_exact.csv` the exact-model ones.
pub fn emit_plot_data(report: ReportRef<'_>, kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match (report, kind) {
        (ReportRef::Example(r), PlotKind::SingularValues) => {
            for (name, rec) in [
                ("singular_values.csv", &r.identified.branch.recovery),
                ("singular_values_exact.csv", &r.exact.recovery),
            ] {
                let path = dir.join(name);
                std::fs::write(
                    &path,
                    singular_value_csv(&rec.singular_values_s, &rec.singular_values_s_plus_1),
                )?;
                written.push(path);
            }
        }
        (ReportRef::MonteCarlo(r), PlotKind::Boxplot) => {
            if r.per_count.is_empty() {
                return Err(Error::MissingSeries(
                    "no successful Monte-Carlo runs".into(),
                ));
            }
            let path = dir.join("boxplot.csv");
            std::fs::write(&path, boxplot_csv(&r.per_count))?;
            written.push(path);
        }
        (ReportRef::Example(_), PlotKind::Boxplot) => {
            return Err(Error::MissingSeries(
                "the example report has no box-plot data".into(),
            ))
        }
        (ReportRef::MonteCarlo(_), PlotKind::SingularValues) => {
            return Err(Error::MissingSeries(
                "the Monte-Carlo report has no singular-value series".into(),
            ))
        }
    }
    Ok(written)
}
