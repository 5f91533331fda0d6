use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Primal feasibility tolerance (absolute) used for reporting and auditing.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Reduced-cost tolerance used by the simplex pricing step.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Distance from {0, 1} below which a binary value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Relative tolerance for `|primal - dual| / max(1, |primal|)`.
pub const DUALITY_GAP_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint `{constraint}` references undeclared variable {var}")]
    UnknownVariable { constraint: String, var: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("variable {0} is not a binary (bounds must lie within [0, 1])")]
    NotBinary(usize),
    #[error("invalid cost curve: {0}")]
    InvalidCost(String),
    #[error("LP relaxation is unbounded")]
    UnboundedRelaxation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Row relation. `Range(lo, hi)` encodes `lo <= a.x <= hi` as a single row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Relation {
    Eq(f64),
    Le(f64),
    Ge(f64),
    Range(f64, f64),
}

impl Relation {
    /// Interval `[lo, hi]` that the row activity must lie in.
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            Relation::Eq(v) => (v, v),
            Relation::Le(v) => (f64::NEG_INFINITY, v),
            Relation::Ge(v) => (v, f64::INFINITY),
            Relation::Range(lo, hi) => (lo, hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable, no duplicates.
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearProgram {
    sense: Sense,
    variables: Vec<Variable>,
    objective: Vec<f64>,
    offset: f64,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            variables: Vec::new(),
            objective: Vec::new(),
            offset: 0.0,
            constraints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(cost);
        VarId(self.variables.len() - 1)
    }

    /// Adds a row. Repeated variables are summed and zero coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
    ) -> Result<usize, LpError> {
        let name = name.into();
        let mut terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        for &(v, a) in &terms {
            if v.0 >= self.variables.len() {
                return Err(LpError::UnknownVariable {
                    constraint: name,
                    var: v.0,
                });
            }
            if !a.is_finite() {
                return Err(LpError::NonFinite(format!("constraint `{name}`")));
            }
        }
        let (lo, hi) = relation.interval();
        if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(LpError::NonFinite(format!("right-hand side of `{name}`")));
        }
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint {
            name,
            terms: merged,
            relation,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    /// Replaces the relation (right-hand side) of row `row`.
    pub fn set_relation(&mut self, row: usize, relation: Relation) {
        self.constraints[row].relation = relation;
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.objective[var.0] = cost;
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest absolute violation of any variable bound or row relation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xv)| excess(xv, v.lower, v.upper));
        let rows = self.constraints.iter().map(|c| {
            let (lo, hi) = c.relation.interval();
            excess(c.activity(x), lo, hi)
        });
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Variables whose bounds cross, which makes the program trivially infeasible.
    pub fn crossed_bounds(&self) -> Option<usize> {
        self.variables.iter().position(|v| v.lower > v.upper)
    }
}

fn excess(value: f64, lo: f64, hi: f64) -> f64 {
    if value < lo {
        lo - value
    } else if value > hi {
        value - hi
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "OPTIMAL",
            LpStatus::Infeasible => "INFEASIBLE",
            LpStatus::Unbounded => "UNBOUNDED",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values, one per variable. Empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sensitivity of the objective to each row's active bound; zero for inactive rows.
    pub duals: Vec<f64>,
    /// Objective of the dual solution built from `duals` and the variable bounds.
    pub dual_objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
            dual_objective: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.x[var.0]
    }

    pub fn primal_residual(&self, lp: &LinearProgram) -> f64 {
        lp.max_violation(&self.x)
    }

    pub fn relative_duality_gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs() / self.objective.abs().max(1.0)
    }
}
