//! Solver-agnostic MILP representation.
//!
//! Variables and constraints are kept in declaration order; that order drives
//! the LP export so output is byte-stable. Every constraint carries a tag naming
//! the relation it encodes (for example `eq7:branch(9,10):P`), which survives
//! into the LP row names and into feasibility re-check reports.

mod adapter;
mod lp;
mod solution;

pub use adapter::{solve, ADAPTER_ENV, AdapterConfig, AdapterOutput, FnAdapter, SolveRun, SolverAdapter, SubprocessAdapter};
pub use lp::{is_lp_safe, row_name, write_lp};
pub use solution::{parse_solution, recheck, Solution, SolveStatus, Violation, FEAS_TOL};

use std::collections::HashMap;

use crate::{Error, Result};

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Maximize,
    Minimize,
}

/// Sparse linear expression without constant term.
pub type Terms = Vec<(VarId, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Terms,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

impl LinearConstraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjSense,
    pub terms: Terms,
    pub tag: String,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    name: String,
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Objective,
    by_name: HashMap<String, VarId>,
    by_tag: HashMap<String, usize>,
    frozen: bool,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective { sense: ObjSense::Maximize, terms: Vec::new(), tag: "obj".into() },
            by_name: HashMap::new(),
            by_tag: HashMap::new(),
            frozen: false,
        }
    }

    fn ensure_open(&self) -> Result<()> {
        if self.frozen {
            Err(Error::Frozen)
        } else {
            Ok(())
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> Result<VarId> {
        self.ensure_open()?;
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateName(name));
        }
        let bad = lower.is_nan()
            || upper.is_nan()
            || lower > upper
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
            || (kind == VarKind::Binary && (lower < 0.0 || upper > 1.0));
        if bad {
            return Err(Error::InvalidBounds { name, lower, upper });
        }
        let id = VarId(self.variables.len());
        self.by_name.insert(name.clone(), id);
        self.variables.push(Variable { name, lower, upper, kind });
        Ok(id)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId> {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId> {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    /// Tightens or relaxes the bounds of an existing variable.
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<()> {
        self.ensure_open()?;
        let v = self.variables.get_mut(var.0).ok_or(Error::DanglingReference(var.0))?;
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidBounds { name: v.name.clone(), lower, upper });
        }
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    /// Merges repeated variables, then checks references and coefficients.
    fn normalize(&self, terms: impl IntoIterator<Item = (VarId, f64)>) -> Result<Terms> {
        let mut out: Terms = Vec::new();
        let mut slot: HashMap<VarId, usize> = HashMap::new();
        for (v, c) in terms {
            if v.0 >= self.variables.len() {
                return Err(Error::DanglingReference(v.0));
            }
            if !c.is_finite() {
                return Err(Error::Argument(format!("non-finite coefficient on `{}`", self.variables[v.0].name)));
            }
            match slot.get(&v) {
                Some(&i) => out[i].1 += c,
                None => {
                    slot.insert(v, out.len());
                    out.push((v, c));
                }
            }
        }
        Ok(out)
    }

    pub fn add_constraint(
        &mut self,
        tag: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize> {
        self.ensure_open()?;
        let tag = tag.into();
        if self.by_tag.contains_key(&tag) {
            return Err(Error::DuplicateTag(tag));
        }
        if !rhs.is_finite() {
            return Err(Error::Argument(format!("non-finite right-hand side in `{tag}`")));
        }
        let terms = self.normalize(terms)?;
        let idx = self.constraints.len();
        self.by_tag.insert(tag.clone(), idx);
        self.constraints.push(LinearConstraint { terms, sense, rhs, tag });
        Ok(idx)
    }

    pub fn set_objective(
        &mut self,
        sense: ObjSense,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        tag: impl Into<String>,
    ) -> Result<()> {
        self.ensure_open()?;
        let terms = self.normalize(terms)?;
        self.objective = Objective { sense, terms, tag: tag.into() };
        Ok(())
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn constraint_by_tag(&self, tag: &str) -> Option<&LinearConstraint> {
        self.by_tag.get(tag).map(|&i| &self.constraints[i])
    }

    /// Constraints whose tag starts with `prefix`, in declaration order.
    pub fn constraints_tagged<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a LinearConstraint> + 'a {
        self.constraints.iter().filter(move |c| c.tag.starts_with(prefix))
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// Objective value at a dense assignment indexed by variable id.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }
}
