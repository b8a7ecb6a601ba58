//! Identification of linear time-invariant systems from input–output data
//! corrupted by an unknown additive fault.
//!
//! The crate is organised bottom-up:
//!
//! * [`matstack`]: dense matrix kernel (block Hankel/Toeplitz builders,
//!   rank-revealing SVD, nullspaces, minimum-norm least squares, principal
//!   angles).
//! * [`sysgen`]: simulation of `x(k+1) = Ax + Bu + Fv`, `y = Cx + Du + Gv + w`,
//!   signal generators, random test systems and transmission-zero analysis.
//! * [`subid`]: past-input MOESP identification of `(A, B, C, D)`.
//! * [`faultrec`]: fault-dimension estimation, recovery of every fault pair
//!   `(F, G)` that explains the data, behavioural equivalence and fault
//!   signal reconstruction.
//! * [`harness`]: end-to-end example and Monte-Carlo experiments.

pub mod error;
pub mod faultrec;
pub mod harness;
pub mod matstack;
pub mod subid;
pub mod sysgen;
pub mod trajectory;

pub use error::{Error, Result};
pub use matstack::{Matrix, RankPolicy, RankReport, SubspaceBasis};
pub use sysgen::{FaultPair, StateSpace};
pub use trajectory::{Role, Trajectory};
