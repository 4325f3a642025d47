//! Second-order cone programs in the standard form
//!
//! ```text
//! minimize    c'x
//! subject to  s = h - G x,   s in K
//! ```
//!
//! where `K` is a Cartesian product of nonnegative orthants and second-order
//! cones `{(u0, u1) : ||u1|| <= u0}`. The solver in [`ipm`] works on the
//! homogeneous self-dual embedding of this pair, so infeasible programs come
//! back with a Farkas ray instead of an iteration-limit failure.

mod builder;
mod certificate;
pub(crate) mod cones;
mod ipm;
mod linalg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builder::{AffineExpr, ProgramBuilder, Var};
pub use certificate::check_certificate;
pub use ipm::solve;

/// One block of the cone product, in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "snake_case")]
pub enum ConeBlock {
    Nonnegative(usize),
    SecondOrder(usize),
}

impl ConeBlock {
    pub fn dim(&self) -> usize {
        match *self {
            ConeBlock::Nonnegative(k) | ConeBlock::SecondOrder(k) => k,
        }
    }

    /// Barrier degree: one per orthant coordinate, one per second-order cone.
    pub fn degree(&self) -> usize {
        match *self {
            ConeBlock::Nonnegative(k) => k,
            ConeBlock::SecondOrder(_) => 1,
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            let mut sorted: Vec<(usize, f64)> = row.clone();
            sorted.sort_by_key(|&(c, _)| c);
            // merge duplicates
            let mut last: Option<usize> = None;
            for (c, v) in sorted {
                if last == Some(c) {
                    *values.last_mut().expect("duplicate follows an entry") += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: rows.len(),
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y = A' x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate().take(self.nrows) {
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    fn check(&self) -> Result<()> {
        if self.row_ptr.len() != self.nrows + 1
            || self.col_idx.len() != self.values.len()
            || self.row_ptr.last().copied() != Some(self.col_idx.len())
        {
            return Err(Error::InvalidProgram("malformed CSR storage".into()));
        }
        if self.col_idx.iter().any(|&c| c >= self.ncols) {
            return Err(Error::InvalidProgram("column index out of range".into()));
        }
        Ok(())
    }
}

/// A conic program `min c'x s.t. h - Gx in K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProgram {
    pub objective: Vec<f64>,
    pub matrix: SparseMatrix,
    pub offset: Vec<f64>,
    pub cones: Vec<ConeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_names: Option<Vec<String>>,
}

impl ConeProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.offset.len()
    }

    pub fn degree(&self) -> usize {
        self.cones.iter().map(ConeBlock::degree).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.matrix.check()?;
        if self.matrix.ncols != self.objective.len() {
            return Err(Error::InvalidProgram(format!(
                "{} objective coefficients for {} matrix columns",
                self.objective.len(),
                self.matrix.ncols
            )));
        }
        if self.matrix.nrows != self.offset.len() {
            return Err(Error::InvalidProgram(format!(
                "{} offsets for {} matrix rows",
                self.offset.len(),
                self.matrix.nrows
            )));
        }
        let total: usize = self.cones.iter().map(ConeBlock::dim).sum();
        if total != self.offset.len() {
            return Err(Error::InvalidProgram(format!(
                "cone dimensions sum to {total}, residual has {} rows",
                self.offset.len()
            )));
        }
        for cone in &self.cones {
            match *cone {
                ConeBlock::SecondOrder(k) if k < 2 => {
                    return Err(Error::InvalidProgram(format!(
                        "second-order cone of dimension {k}"
                    )))
                }
                ConeBlock::Nonnegative(0) => {
                    return Err(Error::InvalidProgram("empty orthant block".into()))
                }
                _ => {}
            }
        }
        if let Some(names) = &self.variable_names {
            if names.len() != self.objective.len() {
                return Err(Error::InvalidProgram("variable name count mismatch".into()));
            }
        }
        if self
            .objective
            .iter()
            .chain(&self.offset)
            .chain(&self.matrix.values)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidProgram("non-finite data".into()));
        }
        Ok(())
    }

    /// Self-describing JSON for cross-checking against other conic solvers.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Dump<'a> {
            form: &'static str,
            #[serde(flatten)]
            program: &'a ConeProgram,
        }
        Ok(serde_json::to_string_pretty(&Dump {
            form: "minimize c'x subject to offset - matrix*x in cones",
            program: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let program: ConeProgram = serde_json::from_str(text)?;
        program.validate()?;
        Ok(program)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverTolerances {
    /// Relative primal and dual residual bound.
    pub feasibility: f64,
    /// Relative duality gap bound.
    pub gap: f64,
    /// Residual bound on normalized infeasibility rays.
    pub infeasibility: f64,
    pub max_iterations: usize,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        SolverTolerances {
            feasibility: 1e-8,
            gap: 1e-8,
            infeasibility: 1e-8,
            max_iterations: 100,
        }
    }
}

/// Residual norms of a candidate solution or certificate.
///
/// For `Optimal` the three numbers are relative primal infeasibility,
/// relative dual infeasibility and relative duality gap. For infeasibility
/// certificates `primal`/`dual` hold the normalized ray residual and `gap`
/// the violation of the normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ResidualReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub violations: Vec<String>,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSolution {
    pub status: ConeStatus,
    /// Primal point, or the unboundedness ray when dual infeasible.
    pub primal: Vec<f64>,
    /// Cone slack `h - Gx` reported by the solver.
    pub slack: Vec<f64>,
    /// Dual point, or the Farkas ray when primal infeasible.
    pub dual: Vec<f64>,
    pub objective_value: f64,
    pub dual_objective: f64,
    pub residuals: ResidualReport,
    pub iterations: usize,
}

impl ConeSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == ConeStatus::Optimal
    }
}
