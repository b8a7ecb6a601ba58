use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstack::{hstack, min_norm_lsq, serde_rows, Matrix};
use crate::sysgen::{FaultPair, StateSpace};
use crate::trajectory::{Role, Trajectory};

/// Fault signal and initial state that explain a residual.
#[derive(Debug, Clone, Serialize)]
pub struct FaultReconstruction {
    /// Initial state of the residual system `xi(k+1) = A xi + F v`.
    #[serde(with = "serde_rows::vector")]
    pub xi0: DVector<f64>,
    #[serde(skip)]
    pub v: Trajectory,
    /// `|r - O xi0 - T^f v| / |r|`, zero when the residual is zero.
    pub replay_residual: f64,
    /// Plant state `xi + x_tilde`.
    #[serde(skip)]
    pub x_full: Trajectory,
}

/// Minimum-norm `(xi0, v)` with `r = O_T xi0 + T^f_T v` over the whole
/// record, where `r = y - C x_tilde - D u` is the output left over after
/// simulating the nominal plant from `x_tilde_0`.
///
/// When the channel has zeros the solution is not unique; the minimum-norm
/// one is reported and only the replay residual is meaningful.
pub fn reconstruct_fault(
    y: &Trajectory,
    u: &Trajectory,
    sys: &StateSpace,
    fault: &FaultPair,
    x_tilde_0: &DVector<f64>,
) -> Result<FaultReconstruction> {
    fault.check_against(sys)?;
    if y.len() != u.len() || y.dim() != sys.n_y() {
        return Err(Error::Dimension(format!(
            "output {}x{} and input of length {} for n_y = {}",
            y.dim(),
            y.len(),
            u.len(),
            sys.n_y()
        )));
    }
    if y.is_empty() {
        return Err(Error::Empty("output trajectory"));
    }
    let t = y.len();
    let (n, n_v) = (sys.n_x(), fault.n_v());
    let (y_nom, x_tilde) = sys.response(x_tilde_0, u)?;
    let r = y.as_matrix() - y_nom.as_matrix();
    let r_vec = Matrix::from_column_slice(r.len(), 1, r.as_slice());

    let w = hstack(&sys.observability(t)?, &fault.toeplitz(sys, t)?)?;
    let z = min_norm_lsq(&w, &r_vec)?;
    let r_norm = r_vec.norm();
    let replay_residual = if r_norm > 0.0 {
        (&r_vec - &w * &z).norm() / r_norm
    } else {
        0.0
    };

    let xi0 = DVector::from_iterator(n, z.rows(0, n).iter().copied());
    let v = Matrix::from_iterator(n_v, t, z.rows(n, t * n_v).iter().copied());
    let mut x = x_tilde.as_matrix().clone();
    let mut xi = xi0.clone();
    for k in 0..t {
        let mut col = x.column_mut(k);
        col += &xi;
        xi = &sys.a * &xi + &fault.f * v.column(k);
    }
    Ok(FaultReconstruction {
        xi0,
        v: Trajectory::from_columns(Role::Fault, v)?,
        replay_residual,
        x_full: Trajectory::from_columns(Role::State, x)?,
    })
}

/// Pearson correlation of two equally long sequences; zero if either is
/// constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Per-channel correlation between `truth` and the best linear re-mixing
/// of `estimate` onto it, `estimate^T J` with `J` from least squares.
pub fn remixed_correlation(estimate: &Trajectory, truth: &Trajectory) -> Result<Vec<f64>> {
    if estimate.len() != truth.len() {
        return Err(Error::Dimension("trajectories of different length".into()));
    }
    let e = estimate.as_matrix().transpose();
    let tr = truth.as_matrix().transpose();
    let j = min_norm_lsq(&e, &tr)?;
    let fit = &e * j;
    Ok((0..truth.dim())
        .map(|i| {
            let a: Vec<f64> = fit.column(i).iter().copied().collect();
            pearson(&a, &truth.channel(i)).abs()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysgen::{
        example_system, fault_signal, random_system, simulate, white_input, FaultKind,
    };

    #[test]
    fn example_reconstruction() {
        let (sys, fault) = example_system();
        let t = 300;
        let u = white_input(1, t, 7).unwrap();
        let v = fault_signal(FaultKind::V1, t, 0).unwrap();
        let x0 = DVector::from_vec(vec![0.5, -1.0, 0.3]);
        let (y, x) = simulate(&sys, &fault, &x0, &u, &v, None).unwrap();

        // nominal initial state guessed wrong on purpose: xi0 absorbs it
        let guess = DVector::zeros(3);
        let rec = reconstruct_fault(&y, &u, &sys, &fault, &guess).unwrap();
        assert!(rec.replay_residual <= 1e-8);
        // G = 0, so the last sample never reaches the output
        let head = t - 1;
        let corr = pearson(&rec.v.channel(0)[..head], &v.channel(0)[..head]);
        assert!(corr.abs() >= 0.99, "{corr}");
        let err = (rec.x_full.as_matrix().columns(0, head) - x.as_matrix().columns(0, head)).norm();
        assert!(err <= 1e-6 * x.as_matrix().norm(), "{err}");
    }

    #[test]
    fn zero_residual_reconstructs_zero() {
        let (sys, fault) = example_system();
        let u = white_input(1, 50, 1).unwrap();
        let x0 = DVector::from_element(3, 1.0);
        let (y, _) = sys.response(&x0, &u).unwrap();
        let rec = reconstruct_fault(&y, &u, &sys, &fault, &x0).unwrap();
        assert_eq!(rec.replay_residual, 0.0);
        assert!(rec.v.as_matrix().norm() <= 1e-12);
    }

    #[test]
    fn channel_with_zero_replays() {
        let (sys, fault) = random_system(4, 1, 3, 2, 2, 5).unwrap();
        let t = 200;
        let u = white_input(1, t, 3).unwrap();
        let v = white_input(2, t, 4).unwrap().with_role(Role::Fault);
        let (y, _) = simulate(&sys, &fault, &DVector::zeros(4), &u, &v, None).unwrap();
        let rec = reconstruct_fault(&y, &u, &sys, &fault, &DVector::zeros(4)).unwrap();
        assert!(rec.replay_residual <= 1e-8);
    }

    #[test]
    fn remixing_undoes_channel_mixing() {
        let v = white_input(2, 400, 9).unwrap();
        let j = crate::matstack::matrix_from_rows(2, 2, &[1.0, 2.0, -0.5, 0.3]).unwrap();
        let mixed = Trajectory::from_columns(Role::Fault, j * v.as_matrix()).unwrap();
        for c in remixed_correlation(&mixed, &v).unwrap() {
            assert!(c > 0.999999);
        }
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1., 2., 3.], &[2., 4., 6.]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1., 2., 3.], &[3., 2., 1.]) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1., 1.], &[1., 2.]), 0.0);
    }
}
