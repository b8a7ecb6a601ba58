use crate::error::{Error, Result};
use crate::matstack::{
    block_toeplitz, extended_observability, hstack, range_equal, singular_values, Matrix,
};
use crate::sysgen::FaultPair;
use crate::trajectory::Trajectory;

/// `[O_len T^f_len]`: its range is the set of residual windows of length
/// `len` the channel can produce.
pub fn behavior_window(a: &Matrix, c: &Matrix, fault: &FaultPair, len: usize) -> Result<Matrix> {
    let o = extended_observability(a, c, len)?;
    let tf = block_toeplitz(a, &fault.f, c, &fault.g, len)?;
    hstack(&o, &tf)
}

/// Finite-horizon test of output behavioural equivalence on `n_x + 1`
/// block rows, which suffices for the infinite-horizon behaviours to
/// coincide.
pub fn behaviorally_equivalent(
    a: &Matrix,
    c: &Matrix,
    first: &FaultPair,
    second: &FaultPair,
    tol: f64,
) -> Result<bool> {
    let n = a.nrows();
    for fp in [first, second] {
        if fp.f.nrows() != n || fp.g.nrows() != c.nrows() {
            return Err(Error::Dimension(format!(
                "fault pair F {}x{}, G {}x{} for n_x = {n}, n_y = {}",
                fp.f.nrows(),
                fp.f.ncols(),
                fp.g.nrows(),
                fp.g.ncols(),
                c.nrows()
            )));
        }
    }
    let w1 = behavior_window(a, c, first, n + 1)?;
    let w2 = behavior_window(a, c, second, n + 1)?;
    range_equal(&w1, &w2, tol)
}

/// Whether the window `r` is an output of the channel for some initial
/// state and fault, i.e. the stacked samples are consistent with
/// `[O T^f] z = r` at relative tolerance `tol`.
pub fn behavior_contains(
    a: &Matrix,
    c: &Matrix,
    fault: &FaultPair,
    r: &Trajectory,
    tol: f64,
) -> Result<bool> {
    if r.dim() != c.nrows() {
        return Err(Error::Dimension(format!(
            "residual of dimension {} for {} outputs",
            r.dim(),
            c.nrows()
        )));
    }
    let w = behavior_window(a, c, fault, r.len())?;
    let rv = r.stacked();
    let rm = Matrix::from_column_slice(rv.len(), 1, rv.as_slice());
    let sv_w = singular_values(&w)?;
    let sv_aug = singular_values(&hstack(&w, &rm)?)?;
    let thr = tol * sv_w[0].max(rm.norm());
    let rank = |sv: &[f64]| sv.iter().filter(|&&x| x > thr).count();
    Ok(rank(&sv_aug) == rank(&sv_w))
}
