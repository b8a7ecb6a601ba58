use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matstack::Matrix;
use crate::trajectory::{Role, Trajectory};

/// Pole of the first-order low-pass filter that colours measurement noise.
pub const NOISE_POLE: f64 = 0.7;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Filled sample by sample so a longer draw extends a shorter one.
    let mut m = Matrix::zeros(rows, cols);
    for k in 0..cols {
        for i in 0..rows {
            m[(i, k)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// I.i.d. standard normal input samples.
pub fn white_input(n_u: usize, len: usize, seed: u64) -> Result<Trajectory> {
    if len == 0 {
        return Err(Error::Invalid("input length must be positive".into()));
    }
    Trajectory::from_columns(Role::Input, gaussian(n_u, len, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultKind {
    /// `0.1 + sin(0.25 k^1.3)`.
    V1,
    /// `1 - 0.99^k + z(k)` with standard normal `z`.
    V2,
}

impl std::str::FromStr for FaultKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v1" => Ok(FaultKind::V1),
            "v2" => Ok(FaultKind::V2),
            other => Err(Error::Parse(format!("unknown fault signal {other:?}"))),
        }
    }
}

/// Scalar benchmark fault signals.
pub fn fault_signal(kind: FaultKind, len: usize, seed: u64) -> Result<Trajectory> {
    if len == 0 {
        return Err(Error::Invalid("fault length must be positive".into()));
    }
    match kind {
        FaultKind::V1 => {
            let vals: Vec<f64> = (0..len)
                .map(|k| 0.1 + (0.25 * (k as f64).powf(1.3)).sin())
                .collect();
            Trajectory::scalar(Role::Fault, &vals)
        }
        FaultKind::V2 => {
            let z = gaussian(1, len, seed);
            v2_from_noise(z.as_slice())
        }
    }
}

/// The drifting fault `1 - 0.99^k + z(k)` for a given noise sequence.
pub fn v2_from_noise(z: &[f64]) -> Result<Trajectory> {
    let vals: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(k, zk)| 1.0 - 0.99f64.powi(k as i32) + zk)
        .collect();
    Trajectory::scalar(Role::Fault, &vals)
}

/// Low-pass filtered Gaussian noise, scaled per channel so that the
/// reference-to-noise power ratio is exactly `snr_db`.
///
/// `snr_db = +inf` gives an all-zero trajectory.
pub fn colored_noise(reference: &Trajectory, snr_db: f64, seed: u64) -> Result<Trajectory> {
    let (n_y, len) = (reference.dim(), reference.len());
    if snr_db == f64::INFINITY {
        return Ok(Trajectory::zeros(Role::Noise, n_y, len));
    }
    if !snr_db.is_finite() {
        return Err(Error::Invalid(format!("signal-to-noise ratio {snr_db} dB")));
    }
    let white = gaussian(n_y, len, seed);
    let mut noise = Matrix::zeros(n_y, len);
    for i in 0..n_y {
        let mut state = 0.0;
        for k in 0..len {
            state = NOISE_POLE * state + white[(i, k)];
            noise[(i, k)] = state;
        }
        let ref_power = reference.channel_power(i);
        if ref_power == 0.0 {
            return Err(Error::Invalid(format!(
                "reference channel {i} has zero power"
            )));
        }
        let noise_power = noise.row(i).iter().map(|x| x * x).sum::<f64>() / len as f64;
        let target = ref_power / 10f64.powf(snr_db / 10.0);
        let gain = (target / noise_power).sqrt();
        noise.row_mut(i).scale_mut(gain);
    }
    Trajectory::from_columns(Role::Noise, noise)
}
