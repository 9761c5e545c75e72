//! Solver-agnostic conic programs over complex Hermitian matrix variables.
//!
//! A [`ConicProblem`] collects Hermitian (optionally PSD) matrix variables,
//! real scalar variables, a linear objective and tagged constraints:
//! affine equalities and inequalities, second-order cones and linear matrix
//! inequalities. Every constraint carries a *family* label so that callers
//! can drop a whole family and re-solve when diagnosing infeasibility.
//!
//! Complex PSD conditions are handed to the backend through the real
//! embedding of [`embed`]; inner products are evaluated directly in the
//! complex domain, so no factor-of-two correction leaks into objectives or
//! traces.

mod backend;
mod dump;
pub mod embed;
mod expr;

use std::collections::BTreeMap;

pub use backend::solve;
pub use dump::ParseError;
pub use expr::{CExpr, HermExpr, LinExpr, MatVar, ScalarVar};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Default primal/dual feasibility and gap tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    Hermitian { dim: usize, psd: bool },
    Scalar { lower: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub(crate) offset: usize,
}

impl VarDecl {
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        match self.kind {
            VarKind::Hermitian { dim, .. } => MatVar::n_params(dim),
            VarKind::Scalar { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    /// `expr == 0`
    Eq(LinExpr),
    /// `expr >= 0`
    Ge(LinExpr),
    /// `‖vector‖₂ <= bound`
    Soc { bound: LinExpr, vector: Vec<LinExpr> },
    /// `expr ⪰ 0`
    Lmi(HermExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub family: String,
    pub kind: ConstraintKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    vars: Vec<VarDecl>,
    n_params: usize,
    sense: Sense,
    objective: LinExpr,
    constraints: Vec<Constraint>,
}

impl Default for ConicProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicProblem {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            n_params: 0,
            sense: Sense::Minimize,
            objective: LinExpr::zero(),
            constraints: Vec::new(),
        }
    }

    fn declare(&mut self, name: &str, kind: VarKind) -> usize {
        assert!(
            self.vars.iter().all(|v| v.name != name),
            "variable `{name}` declared twice"
        );
        let offset = self.n_params;
        let decl = VarDecl { name: name.to_owned(), kind, offset };
        self.n_params += decl.len();
        self.vars.push(decl);
        offset
    }

    /// Declares an `n×n` Hermitian variable; with `psd` the variable is also
    /// constrained to the PSD cone.
    pub fn add_hermitian(&mut self, name: &str, dim: usize, psd: bool) -> MatVar {
        let offset = self.declare(name, VarKind::Hermitian { dim, psd });
        MatVar { offset, dim }
    }

    pub fn add_scalar(&mut self, name: &str, lower: Option<f64>) -> ScalarVar {
        let index = self.declare(name, VarKind::Scalar { lower });
        ScalarVar { index }
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinExpr) {
        self.sense = sense;
        self.objective = expr.compressed();
    }

    /// `lhs == rhs`
    pub fn add_eq(&mut self, family: &str, lhs: LinExpr, rhs: f64) {
        self.push(family, ConstraintKind::Eq((lhs - rhs).compressed()));
    }

    /// `lhs >= rhs`
    pub fn add_ge(&mut self, family: &str, lhs: LinExpr, rhs: f64) {
        self.push(family, ConstraintKind::Ge((lhs - rhs).compressed()));
    }

    /// `lhs <= rhs`
    pub fn add_le(&mut self, family: &str, lhs: LinExpr, rhs: f64) {
        self.push(family, ConstraintKind::Ge((-lhs + rhs).compressed()));
    }

    /// `‖vector‖₂ <= bound`
    pub fn add_soc(&mut self, family: &str, vector: Vec<LinExpr>, bound: LinExpr) {
        let vector = vector.into_iter().map(LinExpr::compressed).collect();
        self.push(family, ConstraintKind::Soc { bound: bound.compressed(), vector });
    }

    /// `s² <= a` for a scalar `s` and affine `a`, written as the cone
    /// `‖(2s, a − 1)‖ <= a + 1`.
    pub fn add_square_le(&mut self, family: &str, s: LinExpr, a: LinExpr) {
        let vector = vec![s.scaled(2.0), a.clone() - 1.0];
        self.add_soc(family, vector, a + 1.0);
    }

    pub fn add_lmi(&mut self, family: &str, expr: HermExpr) {
        self.push(family, ConstraintKind::Lmi(expr));
    }

    fn push(&mut self, family: &str, kind: ConstraintKind) {
        self.constraints.push(Constraint { family: family.to_owned(), kind });
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Constraint families in first-appearance order.
    pub fn families(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.constraints {
            if !out.contains(&c.family) {
                out.push(c.family.clone());
            }
        }
        out
    }

    /// Copy of the problem with every constraint of `family` removed.
    pub fn without_family(&self, family: &str) -> ConicProblem {
        let mut out = self.clone();
        out.constraints.retain(|c| c.family != family);
        out
    }

    /// Checks that every expression references declared parameters.
    pub fn validate(&self) -> Result<()> {
        let check = |idx: Option<usize>, what: &str| -> Result<()> {
            match idx {
                Some(i) if i >= self.n_params => Err(Error::Contract(format!(
                    "{what} references undeclared parameter {i} (have {})",
                    self.n_params
                ))),
                _ => Ok(()),
            }
        };
        check(self.objective.max_index(), "objective")?;
        for c in &self.constraints {
            let what = format!("constraint in family `{}`", c.family);
            match &c.kind {
                ConstraintKind::Eq(e) | ConstraintKind::Ge(e) => check(e.max_index(), &what)?,
                ConstraintKind::Soc { bound, vector } => {
                    check(bound.max_index(), &what)?;
                    for v in vector {
                        check(v.max_index(), &what)?;
                    }
                }
                ConstraintKind::Lmi(m) => check(m.max_index(), &what)?,
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue of every LMI evaluated at `x`, in declaration
    /// order.
    pub fn lmi_min_eigenvalues(&self, x: &[f64]) -> Vec<(String, f64, f64)> {
        self.constraints
            .iter()
            .filter_map(|c| match &c.kind {
                ConstraintKind::Lmi(m) => {
                    let v = m.eval(x);
                    Some((c.family.clone(), linalg::min_eigenvalue(&v), v.norm()))
                }
                _ => None,
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        dump::write(self)
    }

    pub fn from_text(text: &str) -> Result<Self, ParseError> {
        dump::read(text)
    }

    pub(crate) fn from_parts(
        vars: Vec<VarDecl>,
        sense: Sense,
        objective: LinExpr,
        constraints: Vec<Constraint>,
    ) -> Self {
        let n_params = vars.iter().map(VarDecl::len).sum();
        Self { vars, n_params, sense, objective, constraints }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Solved to reduced accuracy.
    Inaccurate,
    Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarValue {
    Matrix(CMat),
    Scalar(f64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// Termination status as reported by the backend.
    pub backend_status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Present only for `Optimal` and `Inaccurate`.
    pub values: BTreeMap<String, VarValue>,
    pub objective_value: f64,
    pub stats: SolverStats,
    /// Raw parameter vector (empty when no values are reported).
    pub x: Vec<f64>,
}

impl SolveResult {
    pub fn has_values(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }

    pub fn matrix(&self, name: &str) -> Option<&CMat> {
        match self.values.get(name) {
            Some(VarValue::Matrix(m)) => Some(m),
            _ => None,
        }
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        match self.values.get(name) {
            Some(VarValue::Scalar(s)) => Some(*s),
            _ => None,
        }
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }

    pub(crate) fn collect_values(problem: &ConicProblem, x: &[f64]) -> BTreeMap<String, VarValue> {
        problem
            .vars
            .iter()
            .map(|v| {
                let value = match v.kind {
                    VarKind::Hermitian { dim, .. } => {
                        VarValue::Matrix(MatVar { offset: v.offset, dim }.value(x))
                    }
                    VarKind::Scalar { .. } => VarValue::Scalar(x[v.offset]),
                };
                (v.name.clone(), value)
            })
            .collect()
    }
}
