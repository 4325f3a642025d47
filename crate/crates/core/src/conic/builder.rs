use std::ops::{Add, Mul, Neg, Sub};

use super::{ConeBlock, ConeProgram, SparseMatrix};

/// Handle to a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub usize);

/// `sum_k coef_k * x_k + constant`
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        AffineExpr {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(var: Var, coef: f64) -> Self {
        AffineExpr {
            terms: vec![(var.0, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: Var, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((var.0, coef));
        }
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for (_, c) in &mut self.terms {
            *c *= factor;
        }
        self.constant *= factor;
        self
    }
}

impl From<Var> for AffineExpr {
    fn from(v: Var) -> Self {
        AffineExpr::term(v, 1.0)
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + (-rhs)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(self, rhs: f64) -> AffineExpr {
        self.scaled(rhs)
    }
}

/// Incremental construction of a [`ConeProgram`].
///
/// Each cone row is given as the affine expression its slack must equal,
/// e.g. `add_nonneg(x - 1)` encodes `x >= 1`.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    names: Vec<String>,
    cost: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    offset: Vec<f64>,
    cones: Vec<ConeBlock>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> Var {
        self.names.push(name.into());
        self.cost.push(0.0);
        Var(self.cost.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn set_cost(&mut self, var: Var, coef: f64) {
        self.cost[var.0] = coef;
    }

    pub fn add_cost(&mut self, var: Var, coef: f64) {
        self.cost[var.0] += coef;
    }

    fn push_row(&mut self, expr: AffineExpr) {
        // slack = a'x + b  ==>  G row = -a, h = b
        self.rows
            .push(expr.terms.into_iter().map(|(c, v)| (c, -v)).collect());
        self.offset.push(expr.constant);
    }

    /// `expr >= 0`
    pub fn add_nonneg(&mut self, expr: AffineExpr) {
        self.push_row(expr);
        match self.cones.last_mut() {
            Some(ConeBlock::Nonnegative(k)) => *k += 1,
            _ => self.cones.push(ConeBlock::Nonnegative(1)),
        }
    }

    /// `||(exprs[1], .., exprs[k-1])|| <= exprs[0]`
    pub fn add_soc(&mut self, exprs: Vec<AffineExpr>) {
        assert!(exprs.len() >= 2, "second-order cone needs dimension >= 2");
        let dim = exprs.len();
        for e in exprs {
            self.push_row(e);
        }
        self.cones.push(ConeBlock::SecondOrder(dim));
    }

    /// `||w||^2 <= bound` via the rotated-cone identity
    /// `||(w, (bound - 1)/2)|| <= (bound + 1)/2`.
    pub fn add_squared_norm_bound(&mut self, w: Vec<AffineExpr>, bound: AffineExpr) {
        let mut exprs = Vec::with_capacity(w.len() + 2);
        exprs.push((bound.clone() + AffineExpr::constant(1.0)).scaled(0.5));
        exprs.push((bound - AffineExpr::constant(1.0)).scaled(0.5));
        exprs.extend(w);
        self.add_soc(exprs);
    }

    pub fn build(self) -> ConeProgram {
        let ncols = self.cost.len();
        ConeProgram {
            objective: self.cost,
            matrix: SparseMatrix::from_rows(ncols, &self.rows),
            offset: self.offset,
            cones: self.cones,
            variable_names: Some(self.names),
        }
    }
}
