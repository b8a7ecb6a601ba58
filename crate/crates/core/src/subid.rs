//! Past-input MOESP identification of the nominal plant `(A, B, C, D)`.
//!
//! Past inputs serve as instruments, so additive faults and noise that are
//! uncorrelated with the input do not bias the estimated column space of
//! the extended observability matrix.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstack::{
    block_hankel, min_norm_lsq, numerical_rank, serde_rows, singular_values, svd, Matrix,
    RankPolicy,
};
use crate::sysgen::StateSpace;
use crate::trajectory::Trajectory;

/// Gap ratio below which an automatic order choice is flagged.
pub const CONFIDENT_GAP: f64 = 10.0;
/// Order singular values at or below `sigma_1` times this are treated as
/// absent when checking a requested order.
const ORDER_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub order: usize,
    pub gap_ratio: f64,
    pub low_confidence: bool,
}

/// Picks the order at the largest ratio `sigma_i / sigma_(i+1)`, smallest
/// index on ties. A best ratio under 10 is flagged as low confidence; a
/// spectrum with no decay at all is taken as full order.
pub fn estimate_order(sv: &[f64]) -> Result<OrderEstimate> {
    if sv.is_empty() {
        return Err(Error::Empty("order singular values"));
    }
    if sv.iter().all(|&x| x < 1e-12) {
        return Err(Error::Degenerate(
            "all order singular values are below 1e-12".into(),
        ));
    }
    // values at round-off level relative to the largest count as zero
    let floor = ORDER_FLOOR * sv[0];
    let mut best = (sv.len(), 0.0f64);
    for i in 0..sv.len() - 1 {
        let ratio = if sv[i + 1] > floor {
            sv[i] / sv[i + 1]
        } else if sv[i] > floor {
            f64::INFINITY
        } else {
            continue;
        };
        if ratio > best.1 {
            best = (i + 1, ratio);
        }
    }
    let flat = best.1 <= 1.0 + 1e-9;
    Ok(OrderEstimate {
        order: if flat { sv.len() } else { best.0 },
        gap_ratio: best.1,
        low_confidence: best.1 < CONFIDENT_GAP,
    })
}

/// Window `2n + 2` with an order hint `n`, otherwise 10.
pub fn default_window(order_hint: Option<usize>) -> usize {
    order_hint.map_or(10, |n| 2 * n + 2)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentResult {
    #[serde(flatten)]
    pub system: StateSpace,
    /// Singular values of the instrumented projection, padded with zeros
    /// to `window_s * n_y` entries.
    pub order_singular_values: Vec<f64>,
    pub chosen_order: usize,
    /// Present when the order was chosen automatically.
    pub order_estimate: Option<OrderEstimate>,
    #[serde(with = "serde_rows::vector")]
    pub x_tilde_0: DVector<f64>,
    pub window_s: usize,
}

/// Identifies `(A, B, C, D)` and the initial state from `u`, `y`.
///
/// `order = None` selects the order with [`estimate_order`].
pub fn pi_moesp(
    u: &Trajectory,
    y: &Trajectory,
    s: usize,
    order: Option<usize>,
) -> Result<IdentResult> {
    let t = u.len();
    if y.len() != t {
        return Err(Error::Dimension(format!(
            "input has {t} samples, output {}",
            y.len()
        )));
    }
    if s < 2 {
        return Err(Error::Invalid("window must be at least 2".into()));
    }
    if t <= 2 * s {
        return Err(Error::Length {
            required: 2 * s + 1,
            available: t,
        });
    }
    let (m, p) = (u.dim(), y.dim());
    if p == 0 {
        return Err(Error::Invalid("no output channels".into()));
    }
    let n_cols = t - 2 * s + 1;
    let uh = block_hankel(u, 2 * s, n_cols)?;
    let yf = block_hankel(&y.window(s, t - s)?, s, n_cols)?;

    let required = 2 * s * m;
    if required > 0 {
        let rank = numerical_rank(&uh, &RankPolicy::NOISE_FREE)
            .map(|r| r.rank)
            .unwrap_or(0);
        let rank = if uh.norm() == 0.0 { 0 } else { rank };
        if rank < required {
            return Err(Error::Excitation { rank, required });
        }
    }

    // rows ordered [U_f; U_p; Y_f]
    let sm = s * m;
    let sp = s * p;
    let mut w = Matrix::zeros(2 * sm + sp, n_cols);
    w.rows_mut(0, sm).copy_from(&uh.rows(sm, sm));
    w.rows_mut(sm, sm).copy_from(&uh.rows(0, sm));
    w.rows_mut(2 * sm, sp).copy_from(&yf);
    let l = lower_factor(&w);
    let l32 = l.view((2 * sm, sm), (sp, sm)).into_owned();

    let dec = svd(&l32)?;
    let mut order_sv = dec.singular_values.clone();
    order_sv.resize(sp, 0.0);

    let (n, order_estimate) = match order {
        Some(n) => (n, None),
        None => {
            // the zero padding is structural and must not create a gap
            let est = estimate_order(&dec.singular_values)?;
            if est.low_confidence {
                log::warn!(
                    "order selection has no clear gap (best ratio {:.3}); using {}",
                    est.gap_ratio,
                    est.order
                );
            }
            (est.order, Some(est))
        }
    };
    let floor = ORDER_FLOOR * order_sv[0];
    let available = order_sv.iter().filter(|&&x| x > floor).count();
    if n == 0 || n > available || n > dec.u.ncols() {
        return Err(Error::OrderTooLarge {
            requested: n,
            available,
        });
    }
    if (s - 1) * p < n {
        return Err(Error::Invalid(format!(
            "window {s} too short for order {n} with {p} outputs"
        )));
    }

    let obs = dec.u.columns(0, n).into_owned();
    let c = obs.rows(0, p).into_owned();
    let a = min_norm_lsq(
        &obs.rows(0, (s - 1) * p).into_owned(),
        &obs.rows(p, (s - 1) * p).into_owned(),
    )?;
    let (b, d, x0) = estimate_bd_x0(&a, &c, u, y)?;
    let system = StateSpace::new(a, b, c, d)?;
    Ok(IdentResult {
        system,
        order_singular_values: order_sv,
        chosen_order: n,
        order_estimate,
        x_tilde_0: x0,
        window_s: s,
    })
}

/// `L` of `W = L Q^T` (lower trapezoidal), from a QR factorization of `W^T`.
fn lower_factor(w: &Matrix) -> Matrix {
    w.transpose().qr().r().transpose()
}

/// Solves `y(k) = C A^k x0 + sum_j C A^(k-1-j) B u(j) + D u(k)` for
/// `(B, D, x0)` in one least-squares problem over all samples.
fn estimate_bd_x0(
    a: &Matrix,
    c: &Matrix,
    u: &Trajectory,
    y: &Trajectory,
) -> Result<(Matrix, Matrix, DVector<f64>)> {
    let n = a.nrows();
    let (m, p, t) = (u.dim(), c.nrows(), u.len());
    let cols = n + n * m + p * m;
    let mut phi = Matrix::zeros(t * p, cols);
    let um = u.as_matrix();

    // x0 regressor: C A^k
    let mut cak = c.clone();
    // B regressors: for input channel l the state responses to unit B
    // columns e_i evolve as S(k+1) = A S(k) + I u_l(k).
    let mut resp: Vec<Matrix> = vec![Matrix::zeros(n, n); m];
    for k in 0..t {
        let rows = k * p;
        phi.view_mut((rows, 0), (p, n)).copy_from(&cak);
        for (l, r) in resp.iter().enumerate() {
            phi.view_mut((rows, n + l * n), (p, n)).copy_from(&(c * r));
        }
        for l in 0..m {
            for i in 0..p {
                // D(i, l) stored column-major after the B block
                phi[(rows + i, n + n * m + l * p + i)] = um[(l, k)];
            }
        }
        cak = &cak * a;
        for (l, r) in resp.iter_mut().enumerate() {
            let mut next = a * &*r;
            for i in 0..n {
                next[(i, i)] += um[(l, k)];
            }
            *r = next;
        }
    }
    let rhs = Matrix::from_column_slice(t * p, 1, y.as_matrix().as_slice());
    let theta = min_norm_lsq(&phi, &rhs)?;
    let x0 = DVector::from_column_slice(&theta.as_slice()[..n]);
    let theta = theta.as_slice();
    let b = Matrix::from_column_slice(n, m, &theta[n..n + n * m]);
    let d = Matrix::from_column_slice(p, m, &theta[n + n * m..]);
    Ok((b, d, x0))
}

/// `(D, CB, CAB, ..., CA^(count-2) B)`.
pub fn markov_params(sys: &StateSpace, count: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(sys.d.clone());
    let mut ak_b = sys.b.clone();
    for _ in 1..count {
        out.push(&sys.c * &ak_b);
        ak_b = &sys.a * &ak_b;
    }
    out
}

/// `‖stack(H_est) - stack(H_true)‖_F / ‖stack(H_true)‖_F` over the first
/// `count` Markov parameters.
pub fn markov_error(estimate: &StateSpace, truth: &StateSpace, count: usize) -> f64 {
    let he = markov_params(estimate, count);
    let ht = markov_params(truth, count);
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, t) in he.iter().zip(&ht) {
        num += (e - t).norm_squared();
        den += t.norm_squared();
    }
    if den == 0.0 {
        return num.sqrt();
    }
    (num / den).sqrt()
}

/// Least-squares initial state from the first `horizon` samples of
/// fault-free input-output data.
pub fn estimate_initial_state(
    sys: &StateSpace,
    u: &Trajectory,
    y: &Trajectory,
    horizon: usize,
) -> Result<DVector<f64>> {
    if horizon < sys.n_x() {
        return Err(Error::Invalid(format!(
            "horizon {horizon} shorter than the state dimension {}",
            sys.n_x()
        )));
    }
    if u.len() < horizon || y.len() < horizon {
        return Err(Error::Length {
            required: horizon,
            available: u.len().min(y.len()),
        });
    }
    let ustack = u.window(0, horizon)?.stacked();
    let ystack = y.window(0, horizon)?.stacked();
    let rhs = ystack - sys.toeplitz(horizon)? * ustack;
    let o = sys.observability(horizon)?;
    let x0 = min_norm_lsq(&o, &Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
    Ok(DVector::from_column_slice(x0.as_slice()))
}

/// Largest singular value of the data, used to flag all-zero records.
pub fn data_scale(y: &Trajectory) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    singular_values(y.as_matrix()).map_or(0.0, |s| s[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matstack::matrix_from_rows;
    use crate::sysgen::{example_system, random_system, simulate, white_input, FaultPair};
    use crate::trajectory::Role;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn order_examples() {
        let e = estimate_order(&[10., 9., 8., 1e-6, 1e-7]).unwrap();
        assert_eq!(e.order, 3);
        assert!(!e.low_confidence);
        let e = estimate_order(&[5., 5., 5., 5.]).unwrap();
        assert_eq!(e.order, 4);
        assert!(e.low_confidence);
        let e = estimate_order(&[8., 4., 1., 0.5]).unwrap();
        assert_eq!(e.order, 2);
        assert!(e.low_confidence);
        assert!(matches!(
            estimate_order(&[1e-13, 0.0]),
            Err(Error::Degenerate(_))
        ));
        assert_eq!(estimate_order(&[3., 2., 0., 0.]).unwrap().order, 2);
    }

    #[test]
    fn markov_examples() {
        let (sys, _) = example_system();
        let h = markov_params(&sys, 3);
        assert_eq!(h[0], Matrix::zeros(2, 1));
        assert_eq!(h[1], Matrix::zeros(2, 1));
        assert_eq!(h[2], matrix_from_rows(2, 1, &[0., 1.]).unwrap());

        let zero_b = StateSpace::new(
            sys.a.clone(),
            Matrix::zeros(3, 1),
            sys.c.clone(),
            sys.d.clone(),
        )
        .unwrap();
        assert!(markov_params(&zero_b, 5)[1..]
            .iter()
            .all(|m| m.norm() == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Matrix::from_fn(3, 3, |_, _| rng.sample(StandardNormal));
        let sim = sys.similarity(&t).unwrap();
        for (a, b) in markov_params(&sys, 8).iter().zip(markov_params(&sim, 8)) {
            assert!((a - b).amax() <= 1e-10);
        }
    }

    fn fault_free_data(
        sys: &StateSpace,
        x0: &DVector<f64>,
        t: usize,
        seed: u64,
    ) -> (Trajectory, Trajectory) {
        let u = white_input(sys.n_u(), t, seed).unwrap();
        let (y, _) = sys.response(x0, &u).unwrap();
        (u, y)
    }

    #[test]
    fn exact_data_identifies_random_system() {
        let (sys, _) = random_system(4, 2, 3, 1, 0, 5).unwrap();
        let x0 = DVector::from_element(4, 0.5);
        let (u, y) = fault_free_data(&sys, &x0, 2000, 2);
        let id = pi_moesp(&u, &y, 6, None).unwrap();
        assert_eq!(id.chosen_order, 4);
        assert_eq!(id.order_singular_values.len(), 18);
        assert!(markov_error(&id.system, &sys, 10) <= 1e-6);
        // the initial state is in identified coordinates; compare responses
        let (y_hat, _) = id.system.response(&id.x_tilde_0, &u).unwrap();
        assert!((y_hat.as_matrix() - y.as_matrix()).norm() <= 1e-6 * y.as_matrix().norm());
    }

    #[test]
    fn zero_input_is_not_exciting() {
        let (sys, _) = example_system();
        let u = Trajectory::zeros(Role::Input, 1, 200);
        let (y, _) = sys.response(&DVector::from_element(3, 1.0), &u).unwrap();
        assert!(matches!(
            pi_moesp(&u, &y, 4, None),
            Err(Error::Excitation { .. })
        ));
    }

    #[test]
    fn too_short_record() {
        let (sys, _) = example_system();
        let (u, y) = fault_free_data(&sys, &DVector::zeros(3), 10, 1);
        assert!(matches!(
            pi_moesp(&u, &y, 5, None),
            Err(Error::Length { .. })
        ));
    }

    #[test]
    fn requested_order_too_large() {
        let (sys, _) = example_system();
        let (u, y) = fault_free_data(&sys, &DVector::zeros(3), 400, 1);
        assert!(matches!(
            pi_moesp(&u, &y, 4, Some(6)),
            Err(Error::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn initial_state_round_trip() {
        let (sys, _) = example_system();
        let x0 = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let (u, y) = fault_free_data(&sys, &x0, 50, 3);
        let est = estimate_initial_state(&sys, &u, &y, 20).unwrap();
        assert!((est - &x0).norm() <= 1e-8);
        let (u, y) = fault_free_data(&sys, &DVector::zeros(3), 50, 3);
        assert!(estimate_initial_state(&sys, &u, &y, 20).unwrap().norm() <= 1e-12);
        assert!(estimate_initial_state(&sys, &u, &y, 2).is_err());
    }

    #[test]
    fn example_with_fault() {
        let (sys, fault) = example_system();
        let t = 1000;
        let u = white_input(1, t, 11).unwrap();
        let v = crate::sysgen::fault_signal(crate::sysgen::FaultKind::V1, t, 0).unwrap();
        let (y, _) = simulate(
            &sys,
            &fault,
            &DVector::from_vec(vec![0.4, -0.2, 1.0]),
            &u,
            &v,
            None,
        )
        .unwrap();
        let id = pi_moesp(&u, &y, default_window(Some(3)), None).unwrap();
        assert_eq!(id.chosen_order, 3);
        let err = markov_error(&id.system, &sys, 10);
        assert!(err <= 0.05, "{err}");
        let _ = FaultPair::none(3, 2);
    }
}
