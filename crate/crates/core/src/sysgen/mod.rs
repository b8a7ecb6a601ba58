//! Simulation of the faulty plant, test-signal generators, random test
//! systems and transmission-zero analysis of the fault channel.

mod random;
mod signals;
mod zeros;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use random::{random_orthogonal, random_stable_matrix, random_system, system_with_zeros};
pub use signals::{colored_noise, fault_signal, v2_from_noise, white_input, FaultKind};
pub use zeros::{transmission_zeros, Zero, ZeroReport};

use crate::error::{Error, Result};
use crate::matstack::{
    block_toeplitz, extended_observability, from_rows, matrix_from_rows, numerical_rank,
    serde_rows, to_rows, Matrix, RankPolicy,
};
use crate::trajectory::{Role, Trajectory};

/// Nominal plant `x(k+1) = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSpace {
    #[serde(rename = "A", with = "serde_rows")]
    pub a: Matrix,
    #[serde(rename = "B", with = "serde_rows")]
    pub b: Matrix,
    #[serde(rename = "C", with = "serde_rows")]
    pub c: Matrix,
    #[serde(rename = "D", with = "serde_rows")]
    pub d: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n
            || b.nrows() != n
            || c.ncols() != n
            || d.nrows() != c.nrows()
            || d.ncols() != b.ncols()
        {
            return Err(Error::Dimension(format!(
                "state space A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        for m in [&a, &b, &c, &d] {
            crate::matstack::ensure_finite(m)?;
        }
        Ok(Self { a, b, c, d })
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0 - 1e-10
    }

    pub fn is_minimal(&self) -> bool {
        is_controllable(&self.a, &self.b) && is_observable(&self.a, &self.c)
    }

    /// `[C; CA; ...; CA^(s-1)]`.
    pub fn observability(&self, s: usize) -> Result<Matrix> {
        extended_observability(&self.a, &self.c, s)
    }

    /// Input-to-output block Toeplitz matrix with `s` block rows.
    pub fn toeplitz(&self, s: usize) -> Result<Matrix> {
        block_toeplitz(&self.a, &self.b, &self.c, &self.d, s)
    }

    /// Coordinates changed by `x = T z`: `(T^-1 A T, T^-1 B, C T, D)`.
    pub fn similarity(&self, t: &Matrix) -> Result<Self> {
        let ti = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("singular similarity transform".into()))?;
        Self::new(
            &ti * &self.a * t,
            &ti * &self.b,
            &self.c * t,
            self.d.clone(),
        )
    }

    /// Output response to `u` from `x0` with no fault or noise.
    pub fn response(&self, x0: &DVector<f64>, u: &Trajectory) -> Result<(Trajectory, Trajectory)> {
        let none = FaultPair::none(self.n_x(), self.n_y());
        let v = Trajectory::zeros(Role::Fault, 0, u.len());
        simulate(self, &none, x0, u, &v, None)
    }
}

/// Matrices `(F, G)` through which the fault enters state and output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultPair {
    #[serde(rename = "F", with = "serde_rows")]
    pub f: Matrix,
    #[serde(rename = "G", with = "serde_rows")]
    pub g: Matrix,
}

impl FaultPair {
    pub fn new(f: Matrix, g: Matrix) -> Result<Self> {
        if f.ncols() != g.ncols() {
            return Err(Error::Dimension(format!(
                "F has {} columns, G has {}",
                f.ncols(),
                g.ncols()
            )));
        }
        crate::matstack::ensure_finite(&f)?;
        crate::matstack::ensure_finite(&g)?;
        Ok(Self { f, g })
    }

    /// Pair with no fault channels.
    pub fn none(n_x: usize, n_y: usize) -> Self {
        Self {
            f: Matrix::zeros(n_x, 0),
            g: Matrix::zeros(n_y, 0),
        }
    }

    /// Splits a stacked `[F; G]` after its first `n_x` rows.
    pub fn from_stacked(fg: &Matrix, n_x: usize) -> Result<Self> {
        if fg.nrows() < n_x {
            return Err(Error::Dimension(format!(
                "stacked fault matrix has {} rows, fewer than n_x = {n_x}",
                fg.nrows()
            )));
        }
        Self::new(
            fg.rows(0, n_x).into_owned(),
            fg.rows(n_x, fg.nrows() - n_x).into_owned(),
        )
    }

    pub fn n_v(&self) -> usize {
        self.f.ncols()
    }

    pub fn stacked(&self) -> Matrix {
        crate::matstack::vstack(&self.f, &self.g).expect("columns agree by construction")
    }

    /// `(F P, G P)`.
    pub fn mix(&self, p: &Matrix) -> Result<Self> {
        if p.nrows() != self.n_v() {
            return Err(Error::Dimension(format!(
                "mixing matrix has {} rows for {} fault channels",
                p.nrows(),
                self.n_v()
            )));
        }
        Self::new(&self.f * p, &self.g * p)
    }

    pub fn check_against(&self, sys: &StateSpace) -> Result<()> {
        if self.f.nrows() != sys.n_x() || self.g.nrows() != sys.n_y() {
            return Err(Error::Dimension(format!(
                "fault pair F {}x{}, G {}x{} for a system with n_x = {}, n_y = {}",
                self.f.nrows(),
                self.f.ncols(),
                self.g.nrows(),
                self.g.ncols(),
                sys.n_x(),
                sys.n_y()
            )));
        }
        Ok(())
    }

    /// Fault-to-output block Toeplitz matrix for the state matrices of `sys`.
    pub fn toeplitz(&self, sys: &StateSpace, s: usize) -> Result<Matrix> {
        block_toeplitz(&sys.a, &self.f, &sys.c, &self.g, s)
    }
}

pub fn spectral_radius(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    crate::matstack::eigenvalues(a)
        .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY)
}

/// Rank of `[B, AB, ..., A^(n-1) B]` equals `n`.
pub fn is_controllable(a: &Matrix, b: &Matrix) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    match extended_observability(&a.transpose(), &b.transpose(), n) {
        Ok(o) => full_column_rank(&o),
        Err(_) => false,
    }
}

/// Rank of `[C; CA; ...; CA^(n-1)]` equals `n`.
pub fn is_observable(a: &Matrix, c: &Matrix) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    match extended_observability(a, c, n) {
        Ok(o) => full_column_rank(&o),
        Err(_) => false,
    }
}

fn full_column_rank(m: &Matrix) -> bool {
    if m.nrows() == 0 {
        return m.ncols() == 0;
    }
    numerical_rank(m, &RankPolicy::Relative { tol: 1e-9 })
        .map(|r| r.rank == m.ncols())
        .unwrap_or(false)
}

/// Runs `x(k+1) = Ax + Bu + Fv`, `y = Cx + Du + Gv + w` from `x0`.
///
/// Returns the outputs and the states `x(0), ..., x(T-1)`.
pub fn simulate(
    sys: &StateSpace,
    fault: &FaultPair,
    x0: &DVector<f64>,
    u: &Trajectory,
    v: &Trajectory,
    w: Option<&Trajectory>,
) -> Result<(Trajectory, Trajectory)> {
    fault.check_against(sys)?;
    let t = u.len();
    if v.len() != t || w.is_some_and(|w| w.len() != t) {
        return Err(Error::Dimension(format!(
            "signal lengths differ: u {t}, v {}, w {}",
            v.len(),
            w.map_or(t, Trajectory::len)
        )));
    }
    if u.dim() != sys.n_u() || v.dim() != fault.n_v() || w.is_some_and(|w| w.dim() != sys.n_y()) {
        return Err(Error::Dimension(format!(
            "signal dimensions u {}, v {} for n_u = {}, n_v = {}",
            u.dim(),
            v.dim(),
            sys.n_u(),
            fault.n_v()
        )));
    }
    if x0.len() != sys.n_x() {
        return Err(Error::Dimension(format!(
            "initial state of length {} for n_x = {}",
            x0.len(),
            sys.n_x()
        )));
    }
    let um = u.as_matrix();
    let vm = v.as_matrix();
    // Outputs and state updates are computed for all samples at once from
    // the state sequence, which is the only truly sequential part.
    let mut x = Matrix::zeros(sys.n_x(), t);
    let drive = &sys.b * um + &fault.f * vm;
    let mut xk = x0.clone();
    for k in 0..t {
        x.set_column(k, &xk);
        xk = &sys.a * &xk + drive.column(k);
    }
    let mut y = &sys.c * &x + &sys.d * um + &fault.g * vm;
    if let Some(w) = w {
        y += w.as_matrix();
    }
    Ok((
        Trajectory::from_columns(Role::Output, y)?,
        Trajectory::from_columns(Role::State, x)?,
    ))
}

/// The three-state, single-fault benchmark plant. Its fault direction is
/// an eigenvector of `A`, so `(A, F)` is not controllable, and `G = 0`
/// gives the fault channel one zero at infinity.
pub fn example_system() -> (StateSpace, FaultPair) {
    let a = matrix_from_rows(3, 3, &[0., 1., 0., 0., 0., 1., -0.25, 0.75, 0.25]).unwrap();
    let b = matrix_from_rows(3, 1, &[0., 0., 1.]).unwrap();
    let c = matrix_from_rows(2, 3, &[1., 0., 0., 0., 1., 0.]).unwrap();
    let d = Matrix::zeros(2, 1);
    let f = matrix_from_rows(3, 1, &[0.938, 0.328, 0.115]).unwrap();
    let g = Matrix::zeros(2, 1);
    (
        StateSpace::new(a, b, c, d).unwrap(),
        FaultPair::new(f, g).unwrap(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_v: usize,
}

/// On-disk form of a plant and its fault pair.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub A: Vec<Vec<f64>>,
    pub B: Vec<Vec<f64>>,
    pub C: Vec<Vec<f64>>,
    pub D: Vec<Vec<f64>>,
    #[serde(default)]
    pub F: Vec<Vec<f64>>,
    #[serde(default)]
    pub G: Vec<Vec<f64>>,
    pub dims: Dims,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Nested rows of an `r × c` matrix; empty matrices keep their row count
/// as a list of empty rows.
fn nested(m: &Matrix) -> Vec<Vec<f64>> {
    to_rows(m)
}

fn unnested(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<Matrix> {
    if ncols == 0 || nrows == 0 {
        return Ok(Matrix::zeros(nrows, ncols));
    }
    let m = from_rows(rows)?;
    if m.shape() != (nrows, ncols) {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, dims require {nrows}x{ncols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

impl SystemFile {
    pub fn new(sys: &StateSpace, fault: Option<&FaultPair>, seed: Option<u64>) -> Self {
        let none = FaultPair::none(sys.n_x(), sys.n_y());
        let fault = fault.unwrap_or(&none);
        Self {
            A: nested(&sys.a),
            B: nested(&sys.b),
            C: nested(&sys.c),
            D: nested(&sys.d),
            F: nested(&fault.f),
            G: nested(&fault.g),
            dims: Dims {
                n_x: sys.n_x(),
                n_u: sys.n_u(),
                n_y: sys.n_y(),
                n_v: fault.n_v(),
            },
            seed,
        }
    }

    pub fn to_system(&self) -> Result<(StateSpace, FaultPair)> {
        let Dims { n_x, n_u, n_y, n_v } = self.dims;
        let sys = StateSpace::new(
            unnested(&self.A, n_x, n_x, "A")?,
            unnested(&self.B, n_x, n_u, "B")?,
            unnested(&self.C, n_y, n_x, "C")?,
            unnested(&self.D, n_y, n_u, "D")?,
        )?;
        let fault = FaultPair::new(
            unnested(&self.F, n_x, n_v, "F")?,
            unnested(&self.G, n_y, n_v, "G")?,
        )?;
        Ok((sys, fault))
    }
}
