//! Small dense linear programming toolkit.
//!
//! [`LinearProgram`] is a plain carrier: an objective, a list of sparse rows
//! and per-variable bounds. [`solve_lp`] runs a two-phase bounded-variable
//! primal simplex on a dense tableau. The benchmark builders in
//! [`benchmarks`] turn a covering instance plus expert predictions into the
//! comparison programs used by the harness.

pub mod benchmarks;
pub mod export;
mod simplex;

pub use benchmarks::{
    build_dual_lp, build_lincomb_lp, build_offline_lp, build_relaxation_lp, solve_dynamic,
    solve_offline_opt, LincombLayout, RelaxationLayout,
};
pub use simplex::{solve_lp, solve_lp_with, PivotRule, SimplexOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Feasibility tolerance (relative) used when certifying an optimal solution.
pub const ROW_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `lhs >= rhs`
    Ge,
    /// `lhs <= rhs`
    Le,
    /// `lhs == rhs`
    Eq,
}

/// One constraint row with sparse coefficients `(column, value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Violation of this row at `x`, scaled by the magnitude of the row.
    pub fn relative_violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        let scale = 1.0
            + self.rhs.abs().max(
                self.coeffs
                    .iter()
                    .map(|&(j, a)| (a * x[j]).abs())
                    .fold(0.0, f64::max),
            );
        let v = match self.relation {
            Relation::Ge => self.rhs - lhs,
            Relation::Le => lhs - self.rhs,
            Relation::Eq => (lhs - self.rhs).abs(),
        };
        v.max(0.0) / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    /// Infinite bounds are written as `null`.
    #[serde(with = "lower_bounds")]
    pub lower: Vec<f64>,
    #[serde(with = "upper_bounds")]
    pub upper: Vec<f64>,
    /// Optional column names, used by the text export.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

macro_rules! bound_serde {
    ($name:ident, $inf:expr) => {
        mod $name {
            use serde::{Deserialize, Deserializer, Serialize, Serializer};

            pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
                v.iter()
                    .map(|x| x.is_finite().then_some(*x))
                    .collect::<Vec<_>>()
                    .serialize(s)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                let v: Vec<Option<f64>> = Vec::deserialize(d)?;
                Ok(v.into_iter().map(|x| x.unwrap_or($inf)).collect())
            }
        }
    };
}
bound_serde!(lower_bounds, f64::NEG_INFINITY);
bound_serde!(upper_bounds, f64::INFINITY);

impl LinearProgram {
    /// A program over `num_vars` nonnegative, unbounded-above variables.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            names: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row::new(coeffs, relation, rhs));
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!(
                "{} objective coefficients but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if !self.names.is_empty() && self.names.len() != n {
            return Err(LpError::Dimension(format!(
                "{} names for {} variables",
                self.names.len(),
                n
            )));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Bounds { var: j, lower: l, upper: u });
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Dimension(format!("row {r} has non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::Dimension(format!(
                        "row {r} references column {j} but there are {n} variables"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::Dimension(format!("row {r} has a non-finite coefficient")));
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Dimension("non-finite objective coefficient".into()));
        }
        Ok(())
    }

    /// Largest relative row violation and bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.relative_violation(x))
            .fold(0.0, f64::max);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| {
                let below = if l.is_finite() { (l - v) / (1.0 + l.abs()) } else { 0.0 };
                let above = if u.is_finite() { (v - u) / (1.0 + u.abs()) } else { 0.0 };
                below.max(above).max(0.0)
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless `status == Optimal`.
    pub x: Vec<f64>,
    /// Objective value in the program's own sense; NaN unless optimal.
    pub objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// The optimal value, or an error naming the status.
    pub fn value(&self) -> Result<f64, LpError> {
        match self.status {
            LpStatus::Optimal => Ok(self.objective),
            s => Err(LpError::NotOptimal(s)),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),
    #[error("invalid bounds on variable {var}: [{lower}, {upper}]")]
    Bounds { var: usize, lower: f64, upper: f64 },
    #[error("pivot limit of {0} reached (numerically degenerate basis?)")]
    PivotLimit(usize),
    #[error("basis matrix became singular")]
    SingularBasis,
    #[error("solution violates a row by {0:e} after optimality was declared")]
    Numerical(f64),
    #[error("program is {0:?}, not optimal")]
    NotOptimal(LpStatus),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_infinite_bounds() {
        let mut p = LinearProgram::new(Sense::Minimize, vec![1.0, -1.0]);
        p.set_bounds(1, f64::NEG_INFINITY, 3.0);
        p.add_row(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 1.0);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("null"));
        let q: LinearProgram = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
