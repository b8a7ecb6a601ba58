use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::faultrec::{RecoveryConfig, Representative};
use crate::matstack::RankPolicy;
use crate::subid::default_window;
use crate::sysgen::Dims;

/// Which of the recovered fault pairs is reported as "the" answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepresentativeKind {
    #[serde(rename = "leading")]
    Leading,
    #[serde(rename = "sparse-G")]
    SparseG,
    #[serde(rename = "sparse-F")]
    SparseF,
}

impl RepresentativeKind {
    pub fn policy(self) -> Representative {
        match self {
            RepresentativeKind::Leading => Representative::Leading,
            RepresentativeKind::SparseG => Representative::SparseG,
            RepresentativeKind::SparseF => Representative::SparseF,
        }
    }
}

/// Settings shared by the example and Monte-Carlo runs. The JSON form uses
/// the same field names; a config file only needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Record length.
    #[serde(rename = "T")]
    pub t: usize,
    /// Block rows of the residual Hankel matrix `R_s`.
    pub s: usize,
    pub seed: u64,
    /// Output SNR of the coloured measurement noise; `null` for none.
    pub snr_db: Option<f64>,
    pub dims: Dims,
    pub zero_counts: Vec<usize>,
    pub systems_per_count: usize,
    pub rank_policy: RankPolicy,
    pub null_policy: RankPolicy,
    /// Block rows used by PI-MOESP; `null` picks `2 n_x + 2`.
    pub ident_window: Option<usize>,
    pub representative: RepresentativeKind,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Three-state benchmark plant, noise-free.
    pub fn example() -> Self {
        Self {
            t: 1000,
            s: 5,
            seed: 1,
            snr_db: None,
            dims: Dims {
                n_x: 3,
                n_u: 1,
                n_y: 2,
                n_v: 1,
            },
            zero_counts: vec![],
            systems_per_count: 1,
            rank_policy: RankPolicy::NOISY,
            null_policy: RankPolicy::NOISY,
            ident_window: None,
            representative: RepresentativeKind::SparseG,
            out_dir: None,
        }
    }

    /// Desk-scale Monte-Carlo study: 10 random systems for each of 0 to 3
    /// fault-channel zeros, 40 dB SNR.
    pub fn montecarlo() -> Self {
        Self {
            t: 1000,
            s: 5,
            seed: 2024,
            snr_db: Some(40.0),
            dims: Dims {
                n_x: 5,
                n_u: 1,
                n_y: 3,
                n_v: 2,
            },
            zero_counts: vec![0, 1, 2, 3],
            systems_per_count: 10,
            rank_policy: RankPolicy::NOISY,
            null_policy: RankPolicy::NOISY,
            ident_window: None,
            representative: RepresentativeKind::Leading,
            out_dir: None,
        }
    }

    /// `base` with the fields present in `json` replaced. Nested objects
    /// are merged key by key; unknown keys are rejected.
    pub fn from_json_over(base: &Self, json: &str) -> Result<Self> {
        let overlay: Value = serde_json::from_str(json)?;
        if !overlay.is_object() {
            return Err(Error::Parse("config must be a JSON object".into()));
        }
        let mut merged = serde_json::to_value(base)?;
        merge(&mut merged, overlay);
        let cfg: Self = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n_x = self.dims.n_x;
        if self.s < n_x || self.t <= 2 * self.s {
            return Err(Error::Invalid(format!(
                "need T > 2s and s >= n_x, got T = {}, s = {}, n_x = {n_x}",
                self.t, self.s
            )));
        }
        if self.systems_per_count == 0 {
            return Err(Error::Invalid(
                "systems_per_count must be at least 1".into(),
            ));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::Invalid(format!("snr_db must be finite, got {snr}")));
            }
        }
        if self.ident_window() * 2 >= self.t {
            return Err(Error::Invalid(format!(
                "identification window {} too long for T = {}",
                self.ident_window(),
                self.t
            )));
        }
        Ok(())
    }

    pub fn ident_window(&self) -> usize {
        self.ident_window
            .unwrap_or_else(|| default_window(Some(self.dims.n_x)))
    }

    pub fn recovery(&self) -> RecoveryConfig {
        RecoveryConfig {
            rank_policy: self.rank_policy,
            null_policy: self.null_policy,
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // policies are tagged unions: replace them whole
                    Some(slot) if slot.is_object() && !k.ends_with("policy") => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::example().validate().unwrap();
        ExperimentConfig::montecarlo().validate().unwrap();
    }

    #[test]
    fn overlay_changes_only_given_fields() {
        let base = ExperimentConfig::montecarlo();
        let cfg = ExperimentConfig::from_json_over(
            &base,
            r#"{"seed": 9, "dims": {"n_y": 4}, "rank_policy": {"kind": "relative", "tol": 1e-6}, "snr_db": null}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.dims.n_y, 4);
        assert_eq!(cfg.dims.n_x, 5);
        assert_eq!(cfg.snr_db, None);
        assert_eq!(cfg.rank_policy, RankPolicy::Relative { tol: 1e-6 });
        assert_eq!(cfg.t, base.t);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let base = ExperimentConfig::example();
        assert!(ExperimentConfig::from_json_over(&base, r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json_over(&base, r#"{"s": 2}"#).is_err());
        assert!(ExperimentConfig::from_json_over(&base, r#"{"T": 10}"#).is_err());
        assert!(ExperimentConfig::from_json_over(&base, r#"{"systems_per_count": 0}"#).is_err());
        assert!(ExperimentConfig::from_json_over(&base, "[1]").is_err());
    }

    #[test]
    fn representative_names() {
        let k: RepresentativeKind = serde_json::from_str("\"sparse-F\"").unwrap();
        assert_eq!(k, RepresentativeKind::SparseF);
    }
}
