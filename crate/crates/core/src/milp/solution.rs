//! Solution files and feasibility re-check.
//!
//! The file format is line oriented:
//!
//! ```text
//! optimal
//! obj 5
//! x 1
//! ```
//!
//! The first line is one of `optimal|feasible|infeasible|unbounded|error`. For
//! `optimal` and `feasible` an `obj <value>` line follows, then one
//! `<name> <value>` pair per line. Blank lines and `#` comments are skipped.

use std::fmt::Write;
use std::str::FromStr;

use super::lp::fmt_num;
use super::{MilpModel, Sense, VarId, VarKind};
use crate::{Error, Result};

/// Absolute tolerance for bounds and rows.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    Error,
}

impl SolveStatus {
    pub fn has_values(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }

    pub fn token(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Error => "error",
        }
    }
}

impl FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "optimal" => SolveStatus::Optimal,
            "feasible" => SolveStatus::Feasible,
            "infeasible" => SolveStatus::Infeasible,
            "unbounded" => SolveStatus::Unbounded,
            "error" => SolveStatus::Error,
            other => return Err(format!("unknown status token `{other}`")),
        })
    }
}

/// Solver result with values indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective_value: f64,
    values: Vec<f64>,
    /// Variables the file did not mention; they were set to 0.
    pub missing: Vec<String>,
    absent: Vec<VarId>,
}

impl Solution {
    pub fn new(status: SolveStatus, objective_value: f64, values: Vec<f64>) -> Self {
        Solution { status, objective_value, values, missing: Vec::new(), absent: Vec::new() }
    }

    pub fn without_values(status: SolveStatus) -> Self {
        Solution { status, objective_value: f64::NAN, values: Vec::new(), missing: Vec::new(), absent: Vec::new() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, var: VarId) -> Option<f64> {
        self.values.get(var.index()).copied()
    }

    /// True when the parsed file did not mention `var`.
    pub fn is_missing(&self, var: VarId) -> bool {
        self.absent.binary_search(&var).is_ok()
    }

    pub fn value_of(&self, model: &MilpModel, name: &str) -> Option<f64> {
        model.var_by_name(name).and_then(|v| self.get(v))
    }

    pub fn has_warnings(&self) -> bool {
        !self.missing.is_empty()
    }

    /// Renders the solution in the file format [`parse_solution`] reads.
    pub fn to_text(&self, model: &MilpModel) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.status.token());
        if self.status.has_values() {
            let _ = writeln!(out, "obj {}", fmt_num(self.objective_value));
            for (v, x) in model.variables().iter().zip(&self.values) {
                let _ = writeln!(out, "{} {}", v.name, fmt_num(*x));
            }
        }
        out
    }
}

pub fn parse_solution(text: &str, model: &MilpModel) -> Result<Solution> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, head) = lines.next().ok_or(Error::SolutionParse { line: 0, msg: "empty solution".into() })?;
    let status: SolveStatus = head.parse().map_err(|msg| Error::SolutionParse { line: ln, msg })?;
    if !status.has_values() {
        return Ok(Solution::without_values(status));
    }

    let parse_num = |line: usize, tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|_| Error::SolutionParse { line, msg: format!("unparseable value `{tok}`") })
    };

    let (ln, obj_line) =
        lines.next().ok_or(Error::SolutionParse { line: ln + 1, msg: "missing objective line".into() })?;
    let objective_value = match obj_line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["obj", v] => parse_num(ln, v)?,
        _ => return Err(Error::SolutionParse { line: ln, msg: format!("expected `obj <value>`, got `{obj_line}`") }),
    };

    let n = model.variables().len();
    let mut values = vec![0.0; n];
    let mut seen = vec![false; n];
    for (ln, line) in lines {
        let mut parts = line.split_whitespace();
        let (Some(name), Some(tok), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::SolutionParse { line: ln, msg: format!("expected `<name> <value>`, got `{line}`") });
        };
        let id = model
            .var_by_name(name)
            .ok_or_else(|| Error::SolutionParse { line: ln, msg: format!("unknown variable `{name}`") })?;
        let value = parse_num(ln, tok)?;
        let var = model.variable(id);
        if value < var.lower - FEAS_TOL || value > var.upper + FEAS_TOL {
            return Err(Error::BoundViolation { name: name.into(), value, lower: var.lower, upper: var.upper });
        }
        values[id.index()] = value;
        seen[id.index()] = true;
    }

    let absent: Vec<VarId> = (0..n).filter(|&i| !seen[i]).map(VarId).collect();
    let missing: Vec<String> = absent.iter().map(|&v| model.variable(v).name.clone()).collect();
    if !missing.is_empty() {
        log::warn!("{} variable(s) missing from solution, defaulted to 0", missing.len());
    }
    Ok(Solution { status, objective_value, values, missing, absent })
}

/// One failed check found by [`recheck`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Constraint tag, or `bound:<var>` / `integrality:<var>`.
    pub tag: String,
    pub lhs: f64,
    pub sense: Sense,
    pub rhs: f64,
    pub amount: f64,
}

/// Substitutes `values` into every bound, integrality requirement and row.
pub fn recheck(model: &MilpModel, values: &[f64], tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    if values.len() != model.variables().len() {
        out.push(Violation {
            tag: "shape".into(),
            lhs: values.len() as f64,
            sense: Sense::Eq,
            rhs: model.variables().len() as f64,
            amount: f64::INFINITY,
        });
        return out;
    }
    for (v, &x) in model.variables().iter().zip(values) {
        if x < v.lower - tol {
            out.push(Violation { tag: format!("bound:{}", v.name), lhs: x, sense: Sense::Ge, rhs: v.lower, amount: v.lower - x });
        }
        if x > v.upper + tol {
            out.push(Violation { tag: format!("bound:{}", v.name), lhs: x, sense: Sense::Le, rhs: v.upper, amount: x - v.upper });
        }
        if v.kind == VarKind::Binary {
            let gap = (x - x.round()).abs();
            if gap > tol {
                out.push(Violation { tag: format!("integrality:{}", v.name), lhs: x, sense: Sense::Eq, rhs: x.round(), amount: gap });
            }
        }
    }
    for c in model.constraints() {
        let lhs = c.lhs(values);
        let amount = match c.sense {
            Sense::Le => lhs - c.rhs,
            Sense::Ge => c.rhs - lhs,
            Sense::Eq => (lhs - c.rhs).abs(),
        };
        if amount > tol {
            out.push(Violation { tag: c.tag.clone(), lhs, sense: c.sense, rhs: c.rhs, amount });
        }
    }
    out
}
