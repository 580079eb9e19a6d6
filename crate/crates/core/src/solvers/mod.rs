//! Small dense continuous solvers: LP feasibility, convex QP and Frank-Wolfe
//! over a finite point set.

mod frank_wolfe;
mod lp;
mod qp;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use frank_wolfe::{frank_wolfe, DiagonalPotential, FwOptions, FwResult, FwVariant};
pub use lp::{lp_feasible, LpOutcome};
pub use qp::{solve_box_qp, QpObjective, QpSolution};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("variable {0} has a non-finite bound")]
    UnboundedVariable(usize),

    #[error("infeasible constraint system")]
    Infeasible,

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize, best: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty point set")]
    EmptyPointSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Sense {
    /// Whether `lhs (sense) rhs` holds up to `tol`.
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Sense::Le => lhs <= rhs + tol,
            Sense::Eq => (lhs - rhs).abs() <= tol,
            Sense::Ge => lhs >= rhs - tol,
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub a: Vec<f64>,
    pub sense: Sense,
    pub b: f64,
}

impl LinearRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.b).max(0.0),
            Sense::Ge => (self.b - lhs).max(0.0),
            Sense::Eq => (lhs - self.b).abs(),
        }
    }
}

/// Linear rows over `n` variables with per-variable bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub n: usize,
    pub rows: Vec<LinearRow>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LinearSystem {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { n: lo.len(), rows: Vec::new(), lo, hi }
    }

    pub fn unit_box(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![1.0; n])
    }

    pub fn push(&mut self, a: Vec<f64>, sense: Sense, b: f64) {
        self.rows.push(LinearRow { a, sense, b });
    }

    pub fn check_dims(&self) -> Result<(), SolverError> {
        for v in [&self.lo, &self.hi] {
            if v.len() != self.n {
                return Err(SolverError::DimensionMismatch { expected: self.n, found: v.len() });
            }
        }
        if let Some(r) = self.rows.iter().find(|r| r.a.len() != self.n) {
            return Err(SolverError::DimensionMismatch { expected: self.n, found: r.a.len() });
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0));
        self.rows.iter().map(|r| r.violation(x)).chain(bounds).fold(0.0, f64::max)
    }
}
