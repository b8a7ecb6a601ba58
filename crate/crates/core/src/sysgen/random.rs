use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{is_controllable, is_observable, transmission_zeros, FaultPair, StateSpace};
use crate::error::{Error, Result};
use crate::matstack::{nullspace_basis, numerical_rank, vstack, Matrix, RankPolicy};

/// Radius of the disk the random eigenvalues are drawn from.
pub const EIGENVALUE_RADIUS: f64 = 0.95;
const MAX_ATTEMPTS: usize = 200;
/// Generated systems must clear minimality by this relative margin so that
/// identification on them is well posed.
const CONDITION_MARGIN: f64 = 1e-6;

fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let qr = randn(rng, n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Real matrix with eigenvalues uniform in the disk of radius 0.95,
/// complex ones in conjugate pairs, in random orthogonal coordinates.
pub fn random_stable_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut blocks = Matrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let r = EIGENVALUE_RADIUS * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        let (re, im) = (r * theta.cos(), r * theta.sin());
        if i + 1 < n && im.abs() > 1e-3 && rng.random::<bool>() {
            blocks[(i, i)] = re;
            blocks[(i, i + 1)] = im;
            blocks[(i + 1, i)] = -im;
            blocks[(i + 1, i + 1)] = re;
            i += 2;
        } else {
            blocks[(i, i)] = re;
            i += 1;
        }
    }
    let q = random_orthogonal(rng, n);
    &q * blocks * q.transpose()
}

fn well_conditioned_rank(m: &Matrix) -> bool {
    match numerical_rank(
        m,
        &RankPolicy::Relative {
            tol: CONDITION_MARGIN,
        },
    ) {
        Ok(rep) => rep.rank == m.ncols().min(m.nrows()),
        Err(_) => false,
    }
}

fn margin_minimal(a: &Matrix, b: &Matrix, c: &Matrix) -> bool {
    let n = a.nrows();
    let obs = crate::matstack::extended_observability(a, c, n);
    let ctr = crate::matstack::extended_observability(&a.transpose(), &b.transpose(), n);
    match (obs, ctr) {
        (Ok(o), Ok(k)) => well_conditioned_rank(&o) && well_conditioned_rank(&k),
        _ => false,
    }
}

/// Random stable plant with a fault channel that has exactly
/// `zero_count` finite transmission zeros, each standard normal.
pub fn random_system(
    n_x: usize,
    n_u: usize,
    n_y: usize,
    n_v: usize,
    zero_count: usize,
    seed: u64,
) -> Result<(StateSpace, FaultPair)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeros: Vec<f64> = (0..zero_count)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    system_with_zeros(n_x, n_u, n_y, n_v, &zeros, rng.random())
}

/// Random stable plant whose fault channel has exactly the given real
/// finite zeros and no others.
///
/// Each zero `z` is imposed through a zero direction: with `x = (zI - A)^-1 F w`
/// for a random `w`, the rows of `[C G]` are drawn orthogonal to `[x; w]`,
/// so the Rosenbrock pencil annihilates `[x; w]` at `q = z`. Candidates are
/// resampled until the plant is stable and minimal, the channel is minimal
/// and left invertible, and the zero analysis finds exactly the requested
/// zeros.
pub fn system_with_zeros(
    n_x: usize,
    n_u: usize,
    n_y: usize,
    n_v: usize,
    zeros: &[f64],
    seed: u64,
) -> Result<(StateSpace, FaultPair)> {
    let k = zeros.len();
    if n_x == 0 || n_v == 0 || n_y <= n_v {
        return Err(Error::Invalid(format!(
            "need n_x >= 1, n_v >= 1 and n_y > n_v (got n_x = {n_x}, n_y = {n_y}, n_v = {n_v})"
        )));
    }
    if k > n_x || n_y + k > n_x + n_v {
        return Err(Error::Invalid(format!(
            "{k} zeros cannot be placed with n_x = {n_x}, n_y = {n_y}, n_v = {n_v}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_reason = String::new();
    for _ in 0..MAX_ATTEMPTS {
        match candidate(&mut rng, n_x, n_u, n_y, n_v, zeros) {
            Ok(pair) => return Ok(pair),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::Rejected {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

fn candidate(
    rng: &mut ChaCha8Rng,
    n_x: usize,
    n_u: usize,
    n_y: usize,
    n_v: usize,
    zeros: &[f64],
) -> std::result::Result<(StateSpace, FaultPair), String> {
    let a = random_stable_matrix(rng, n_x);
    let b = randn(rng, n_x, n_u);
    let d = randn(rng, n_y, n_u);
    let f = randn(rng, n_x, n_v);

    let (c, g) = if zeros.is_empty() {
        (randn(rng, n_y, n_x), randn(rng, n_y, n_v))
    } else {
        let mut dirs = Matrix::zeros(n_x + n_v, zeros.len());
        for (j, &z) in zeros.iter().enumerate() {
            let w = randn(rng, n_v, 1);
            let shifted = Matrix::identity(n_x, n_x) * z - &a;
            let x = shifted
                .lu()
                .solve(&(&f * &w))
                .ok_or("zero coincides with an eigenvalue")?;
            let dir = vstack(&x, &w).expect("single column");
            dirs.set_column(j, &dir.column(0));
        }
        let comp = nullspace_basis(&dirs.transpose(), 1e-10).map_err(|e| e.to_string())?;
        let rows = randn(rng, n_y, comp.dim()) * comp.basis().transpose();
        (
            rows.columns(0, n_x).into_owned(),
            rows.columns(n_x, n_v).into_owned(),
        )
    };

    let sys = StateSpace::new(a, b, c, d).map_err(|e| e.to_string())?;
    if !sys.is_stable() {
        return Err("unstable".into());
    }
    if !margin_minimal(&sys.a, &sys.b, &sys.c) {
        return Err("plant not minimal".into());
    }
    if !margin_minimal(&sys.a, &f, &sys.c) {
        return Err("fault channel not minimal".into());
    }
    debug_assert!(is_controllable(&sys.a, &f) && is_observable(&sys.a, &sys.c));
    let rep = transmission_zeros(&sys.a, &f, &sys.c, &g).map_err(|e| e.to_string())?;
    if !rep.is_left_invertible() {
        return Err("fault channel not left invertible".into());
    }
    if rep.finite_count() != zeros.len() || rep.finite_zeros.len() != zeros.len() {
        return Err(format!(
            "zero analysis found {} finite zeros, wanted {}",
            rep.finite_count(),
            zeros.len()
        ));
    }
    for &z in zeros {
        let hit = rep
            .finite_zeros
            .iter()
            .any(|q| q.im == 0.0 && (q.re - z).abs() <= 1e-6 * z.abs().max(1.0));
        if !hit {
            return Err(format!("placed zero {z} not detected"));
        }
    }
    let fault = FaultPair::new(f, g).map_err(|e| e.to_string())?;
    Ok((sys, fault))
}
