//! Time-indexed vector signals.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a trajectory represents in the system equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Output,
    Fault,
    Noise,
    State,
    Residual,
}

/// A finite sequence of real vectors `signal(0), signal(1), ...`.
///
/// Samples are stored as the columns of a `dim × len` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    role: Role,
    data: DMatrix<f64>,
}

impl Trajectory {
    /// Wraps a `dim × len` matrix whose column `k` is the sample at time `k`.
    pub fn from_columns(role: Role, data: DMatrix<f64>) -> Result<Self> {
        crate::matstack::ensure_finite(&data)?;
        Ok(Self { role, data })
    }

    pub fn from_samples(role: Role, dim: usize, samples: &[Vec<f64>]) -> Result<Self> {
        let mut data = DMatrix::zeros(dim, samples.len());
        for (k, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::Dimension(format!(
                    "sample {k} has length {}, expected {dim}",
                    s.len()
                )));
            }
            data.column_mut(k).copy_from_slice(s);
        }
        Self::from_columns(role, data)
    }

    /// Scalar trajectory from a plain sequence of values.
    pub fn scalar(role: Role, values: &[f64]) -> Result<Self> {
        Self::from_columns(role, DMatrix::from_row_slice(1, values.len(), values))
    }

    pub fn zeros(role: Role, dim: usize, len: usize) -> Self {
        Self {
            role,
            data: DMatrix::zeros(dim, len),
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn sample(&self, k: usize) -> DVectorView<'_, f64> {
        self.data.column(k)
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    /// The `dim × len` sample matrix.
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Samples `range` as a new trajectory.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::Length {
                required: start + len,
                available: self.len(),
            });
        }
        Ok(Self {
            role: self.role,
            data: self.data.columns(start, len).into_owned(),
        })
    }

    /// Samples stacked into one long vector `[s(0); s(1); ...]`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_column_slice(self.data.as_slice())
    }

    /// Mean of the squared entries of channel `i`.
    pub fn channel_power(&self, i: usize) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.data.row(i).iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::from("t");
        for i in 0..self.dim() {
            write!(line, ",ch{i}").unwrap();
        }
        writeln!(out, "{line}")?;
        for k in 0..self.len() {
            line.clear();
            write!(line, "{k}").unwrap();
            for v in self.data.column(k).iter() {
                write!(line, ",{v}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Parses the `t,ch0,ch1,...` format written by [`Trajectory::write_csv`].
    /// The time column must count up from zero.
    pub fn read_csv<R: BufRead>(role: Role, input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = loop {
            match lines.next() {
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
                None => return Err(Error::Parse("missing trajectory header".into())),
            }
        };
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") {
            return Err(Error::Parse(format!("bad trajectory header {header:?}")));
        }
        let dim = cols.len() - 1;
        let mut samples = Vec::new();
        for (lineno, l) in lines.enumerate() {
            let l = l?;
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 2,
                    dim + 1,
                    fields.len()
                )));
            }
            let t: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad time index", lineno + 2)))?;
            if t != samples.len() {
                return Err(Error::Parse(format!(
                    "line {}: time index {t} out of sequence",
                    lineno + 2
                )));
            }
            let row = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("line {}: bad number {f:?}", lineno + 2)))
                })
                .collect::<Result<Vec<_>>>()?;
            samples.push(row);
        }
        Self::from_samples(role, dim, &samples)
    }
}

impl std::ops::Add for &Trajectory {
    type Output = Trajectory;

    fn add(self, rhs: &Trajectory) -> Trajectory {
        assert_eq!(self.data.shape(), rhs.data.shape());
        Trajectory {
            role: self.role,
            data: &self.data + &rhs.data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t =
            Trajectory::from_samples(Role::Output, 2, &[vec![1.0, -2.5], vec![0.1, 3e-9]]).unwrap();
        let text = t.to_csv_string();
        assert!(text.starts_with("t,ch0,ch1\n0,1,-2.5\n"));
        let back = Trajectory::read_csv(Role::Output, text.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Trajectory::scalar(Role::Input, &[1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn rejects_out_of_order_time() {
        let text = "t,ch0\n0,1\n2,3\n";
        assert!(Trajectory::read_csv(Role::Input, text.as_bytes()).is_err());
    }
}
