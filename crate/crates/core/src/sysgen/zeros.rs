use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matstack::{block_toeplitz, singular_values, Matrix};

/// Pencil eigenvalues beyond this magnitude count as zeros at infinity.
pub const INFINITE_ZERO_MAGNITUDE: f64 = 1e6;

/// Relative tolerance for the Toeplitz rank increments.
const TOEPLITZ_RANK_TOL: f64 = 1e-9;
/// A candidate `q` is kept when the tall pencil loses rank there, measured
/// as `sigma_min / sigma_max`.
const PENCIL_RANK_TOL: f64 = 1e-7;
/// Candidates closer than this (relative to `max(1, |q|)`) are one zero.
const MERGE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

/// Zero structure of a channel `(A, F, C, G)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub finite_zeros: Vec<Zero>,
    pub infinite_zero_count: usize,
    /// Finite plus infinite zeros, counting multiplicity.
    pub zeta: usize,
    /// Smallest `l` for which the channel is `l`-delay left invertible;
    /// `None` when it is not left invertible at all.
    pub l_delay: Option<usize>,
}

impl ZeroReport {
    pub fn finite_count(&self) -> usize {
        self.finite_zeros.iter().map(|z| z.multiplicity).sum()
    }

    pub fn is_left_invertible(&self) -> bool {
        self.l_delay.is_some()
    }
}

/// Finite and infinite zeros of the channel `(A, F, C, G)`.
///
/// Infinite zeros and the inversion delay come from the rank increments of
/// the block Toeplitz matrices `T_s`: the channel is `l`-delay left
/// invertible when `rank T_(l+1) - rank T_l = n_v`, and then
/// `l n_v - rank T_l` zeros sit at infinity. Finite zeros are generalized
/// eigenvalues of the Rosenbrock pencil, squared down by a fixed random
/// output combination and filtered by the rank drop of the original
/// (tall) pencil.
pub fn transmission_zeros(a: &Matrix, f: &Matrix, c: &Matrix, g: &Matrix) -> Result<ZeroReport> {
    let n = a.nrows();
    let m = f.ncols();
    let p = c.nrows();
    if a.ncols() != n || f.nrows() != n || c.ncols() != n || g.shape() != (p, m) {
        return Err(Error::Dimension(format!(
            "channel A {}x{}, F {}x{}, C {}x{}, G {}x{}",
            a.nrows(),
            a.ncols(),
            f.nrows(),
            f.ncols(),
            c.nrows(),
            c.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    if m == 0 {
        return Ok(ZeroReport {
            finite_zeros: vec![],
            infinite_zero_count: 0,
            zeta: 0,
            l_delay: Some(0),
        });
    }

    let big = block_toeplitz(a, f, c, g, n + 1)?;
    let scale = singular_values(&big)?[0];
    let thr = TOEPLITZ_RANK_TOL * scale;
    let rank_of = |s: usize| -> Result<usize> {
        if s == 0 {
            return Ok(0);
        }
        let t = big.view((0, 0), (s * p, s * m)).into_owned();
        Ok(singular_values(&t)?.iter().filter(|&&x| x > thr).count())
    };
    let mut l_delay = None;
    let mut prev = 0;
    let mut rank_at_l = 0;
    for l in 0..=n {
        let next = rank_of(l + 1)?;
        if next - prev == m {
            l_delay = Some(l);
            rank_at_l = prev;
            break;
        }
        prev = next;
    }
    let Some(l) = l_delay else {
        return Ok(ZeroReport {
            finite_zeros: vec![],
            infinite_zero_count: 0,
            zeta: 0,
            l_delay: None,
        });
    };
    let infinite = l * m - rank_at_l;
    let finite_zeros = finite_zeros(a, f, c, g)?;
    let finite: usize = finite_zeros.iter().map(|z| z.multiplicity).sum();
    Ok(ZeroReport {
        finite_zeros,
        infinite_zero_count: infinite,
        zeta: finite + infinite,
        l_delay: Some(l),
    })
}

fn finite_zeros(a: &Matrix, f: &Matrix, c: &Matrix, g: &Matrix) -> Result<Vec<Zero>> {
    let n = a.nrows();
    let m = f.ncols();
    let p = c.nrows();
    if n == 0 {
        return Ok(vec![]);
    }
    let w = if p == m {
        Matrix::identity(m, m)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5157_ae0d);
        Matrix::from_fn(m, p, |_, _| rng.sample(StandardNormal))
    };
    let k = n + m;
    let mut p0 = Matrix::zeros(k, k);
    p0.view_mut((0, 0), (n, n)).copy_from(a);
    p0.view_mut((0, n), (n, m)).copy_from(f);
    p0.view_mut((n, 0), (m, n)).copy_from(&(&w * c));
    p0.view_mut((n, n), (m, m)).copy_from(&(&w * g));
    let mut e = Matrix::zeros(k, k);
    e.view_mut((0, 0), (n, n)).fill_with_identity();

    // det(P0 - qE) = 0. With a shift alpha where P0 - alpha E is regular,
    // (P0 - alpha E)^-1 E has eigenvalue mu = 1 / (q - alpha).
    const SHIFTS: [f64; 6] = [0.3217, -0.7513, 1.9101, -2.4429, 0.0419, 4.3307];
    let mut shifted = None;
    for alpha in SHIFTS {
        let pa = &p0 - &e * alpha;
        let sv = singular_values(&pa)?;
        let smax = sv[0];
        let smin = *sv.last().unwrap();
        if smax > 0.0 && smin / smax > 1e-8 {
            if let Some(inv) = pa.try_inverse() {
                shifted = Some((alpha, inv * &e));
                break;
            }
        }
    }
    let Some((alpha, k_mat)) = shifted else {
        // the squared-down pencil is singular for every shift: treat as
        // having no isolated finite zeros
        return Ok(vec![]);
    };
    let mut candidates: Vec<Complex<f64>> = Vec::new();
    for mu in crate::matstack::eigenvalues(&k_mat)?.iter() {
        if mu.norm() < 1.0 / INFINITE_ZERO_MAGNITUDE {
            continue;
        }
        let q = Complex::new(alpha, 0.0) + mu.inv();
        if q.norm() > INFINITE_ZERO_MAGNITUDE {
            continue;
        }
        if pencil_drops_rank(a, f, c, g, q)? {
            candidates.push(q);
        }
    }
    Ok(merge(candidates))
}

fn pencil_drops_rank(
    a: &Matrix,
    f: &Matrix,
    c: &Matrix,
    g: &Matrix,
    q: Complex<f64>,
) -> Result<bool> {
    let n = a.nrows();
    let m = f.ncols();
    let p = c.nrows();
    let cplx = |x: f64| Complex::new(x, 0.0);
    let mut h = DMatrix::<Complex<f64>>::zeros(n + p, n + m);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = cplx(a[(i, j)]);
        }
        h[(i, i)] -= q;
        for j in 0..m {
            h[(i, n + j)] = cplx(f[(i, j)]);
        }
    }
    for i in 0..p {
        for j in 0..n {
            h[(n + i, j)] = cplx(c[(i, j)]);
        }
        for j in 0..m {
            h[(n + i, n + j)] = cplx(g[(i, j)]);
        }
    }
    let sv = crate::matstack::complex_singular_values(&h)?;
    let smax = sv[0];
    let smin = *sv.last().unwrap();
    Ok(smax > 0.0 && smin / smax <= PENCIL_RANK_TOL)
}

fn merge(mut zs: Vec<Complex<f64>>) -> Vec<Zero> {
    zs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut groups: Vec<(Complex<f64>, usize)> = Vec::new();
    for z in zs {
        match groups
            .iter_mut()
            .find(|(c, _)| (*c - z).norm() <= MERGE_TOL * c.norm().max(1.0))
        {
            Some((c, count)) => {
                *c = (*c * (*count as f64) + z) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => groups.push((z, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(z, multiplicity)| Zero {
            re: z.re,
            im: if z.im.abs() < 1e-12 { 0.0 } else { z.im },
            multiplicity,
        })
        .collect()
}
