//! Per-branch approximation errors and their tabular renderings.

use std::fmt::Write;

use super::extract_filling;
use crate::distflow::{DistFlowArtifacts, FlowKind, Mode, PwlBlockHandle};
use crate::milp::Solution;
use crate::par::{map_slice, Exec};
use crate::pwl::{is_eso, pwl_value, relative_error, FillingState};
use crate::Result;

/// Flows below this magnitude (pu) get no relative error.
pub const DEFAULT_ZERO_FLOW_FLOOR: f64 = 1e-6;

/// The three feeders tabulated for the 33-bus restoration study.
pub const STUDY_FEEDERS: [(usize, usize); 3] = [(9, 10), (12, 13), (13, 14)];

/// Extra slack on top of `ε⁺` when judging solver fillings as ordered.
const ESO_SLACK: f64 = 1e-6;

/// Approximation outcome for one flow of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowError {
    /// Solved flow (signed).
    pub y: f64,
    /// PWL value read from the filling.
    pub f: f64,
    /// Relative error in percent; `None` for negligible flows.
    pub e: Option<f64>,
    pub eso_ok: bool,
    pub negligible: bool,
    /// `h²/(4y²)·100`, the ordered-filling error bound at this flow.
    pub bound: Option<f64>,
    pub filling: FillingState,
}

impl FlowError {
    fn compute(solution: &Solution, block: &PwlBlockHandle, floor: f64) -> Result<Self> {
        let filling = extract_filling(solution, block)?;
        let y = solution.get(block.y).unwrap_or(0.0);
        let f = pwl_value(&filling);
        let negligible = y.abs() < floor;
        let e = if negligible { None } else { relative_error(f, y.abs()).ok() };
        let h = block.grid.seg_width();
        let bound = e.map(|_| h * h / (4.0 * y * y) * 100.0);
        let tol = block.ordering.map_or(0.0, |o| o.epsilon) + ESO_SLACK;
        let eso_ok = is_eso(&filling, tol);
        Ok(FlowError { y, f, e, eso_ok, negligible, bound, filling })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub p: FlowError,
    pub q: FlowError,
}

impl BranchRecord {
    pub fn feeder(&self) -> String {
        format!("{}-{}", self.from, self.to)
    }

    pub fn flow(&self, kind: FlowKind) -> &FlowError {
        match kind {
            FlowKind::P => &self.p,
            FlowKind::Q => &self.q,
        }
    }

    pub fn eso_ok(&self) -> bool {
        self.p.eso_ok && self.q.eso_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub mode: Mode,
    pub zero_flow_floor: f64,
    /// One record per branch, in case order.
    pub records: Vec<BranchRecord>,
}

impl ErrorReport {
    pub fn record(&self, from: usize, to: usize) -> Option<&BranchRecord> {
        self.records.iter().find(|r| r.from == from && r.to == to)
    }

    /// `E_p` values of branches above the zero-flow floor.
    fn reported_e_p(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter_map(|r| r.p.e)
    }

    pub fn max_e_p(&self) -> Option<f64> {
        self.reported_e_p().fold(None, |acc, e| Some(acc.map_or(e, |a: f64| a.max(e))))
    }

    pub fn mean_e_p(&self) -> Option<f64> {
        let (n, sum) = self.reported_e_p().fold((0usize, 0.0), |(n, s), e| (n + 1, s + e));
        (n > 0).then(|| sum / n as f64)
    }

    pub fn all_eso_ok(&self) -> bool {
        self.records.iter().all(BranchRecord::eso_ok)
    }

    /// Branch/kind pairs whose error exceeds the ordered-filling bound, ignoring
    /// branches whose filling is not ordered.
    pub fn bound_violations(&self, rel_tol: f64) -> Vec<(String, FlowKind)> {
        let mut out = Vec::new();
        for r in &self.records {
            for kind in [FlowKind::P, FlowKind::Q] {
                let fe = r.flow(kind);
                if let (true, Some(e), Some(b)) = (fe.eso_ok, fe.e, fe.bound) {
                    if e > b * (1.0 + rel_tol) + rel_tol {
                        out.push((r.feeder(), kind));
                    }
                }
            }
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode {}", self.mode.label());
        let _ = writeln!(
            out,
            "{:<8} {:>13} {:>13} {:>13} {:>13} {:>11} {:>11} {:>6} {:>6}",
            "feeder", "P", "Q", "f_P", "f_Q", "E_p %", "E_q %", "eso_P", "eso_Q"
        );
        for r in &self.records {
            let _ = writeln!(
                out,
                "{:<8} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>11} {:>11} {:>6} {:>6}",
                r.feeder(),
                r.p.y,
                r.q.y,
                r.p.f,
                r.q.f,
                fmt_pct(r.p.e, 11),
                fmt_pct(r.q.e, 11),
                r.p.eso_ok,
                r.q.eso_ok
            );
        }
        let _ = writeln!(
            out,
            "max E_p {}  mean E_p {}  (flows below {:e} pu excluded)",
            fmt_pct(self.max_e_p(), 0),
            fmt_pct(self.mean_e_p(), 0),
            self.zero_flow_floor
        );
        out
    }

    /// Comma-separated `feeder,mode,E_p,E_q,eso_ok`; negligible flows are
    /// written as `negligible`.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("feeder,mode,E_p,E_q,eso_ok\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.feeder(),
                self.mode.label(),
                fmt_cell(r.p.e),
                fmt_cell(r.q.e),
                r.eso_ok()
            );
        }
        out
    }

    /// Every segment value: `branch,kind,lambda,delta`.
    pub fn filling_dump(&self) -> String {
        let mut out = String::from("branch,kind,lambda,delta\n");
        for r in &self.records {
            for kind in [FlowKind::P, FlowKind::Q] {
                for (l, d) in r.flow(kind).filling.deltas().iter().enumerate() {
                    let _ = writeln!(out, "{},{},{},{}", r.feeder(), kind.label(), l + 1, d);
                }
            }
        }
        out
    }
}

fn fmt_pct(e: Option<f64>, width: usize) -> String {
    match e {
        Some(v) => format!("{v:>width$.4}"),
        None => format!("{:>width$}", "-"),
    }
}

fn fmt_cell(e: Option<f64>) -> String {
    e.map_or_else(|| "negligible".to_string(), |v| v.to_string())
}

/// `E_p`, `E_q` and ordering flags per branch, computed in parallel.
pub fn branch_errors(solution: &Solution, artifacts: &DistFlowArtifacts, zero_flow_floor: f64) -> Result<ErrorReport> {
    branch_errors_with(Exec::default(), solution, artifacts, zero_flow_floor)
}

pub fn branch_errors_with(
    exec: Exec,
    solution: &Solution,
    artifacts: &DistFlowArtifacts,
    zero_flow_floor: f64,
) -> Result<ErrorReport> {
    let records = map_slice(exec, &artifacts.branches, |b| {
        Ok(BranchRecord {
            from: b.from,
            to: b.to,
            p: FlowError::compute(solution, &b.block_p, zero_flow_floor)?,
            q: FlowError::compute(solution, &b.block_q, zero_flow_floor)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport { mode: artifacts.options.mode, zero_flow_floor, records })
}

/// Paired columns per feeder for two runs of the same case. `feeders` limits
/// the rows; empty means all branches of `a`.
pub fn comparison_table(a: &ErrorReport, b: &ErrorReport, feeders: &[(usize, usize)]) -> String {
    let keys: Vec<(usize, usize)> =
        if feeders.is_empty() { a.records.iter().map(|r| (r.from, r.to)).collect() } else { feeders.to_vec() };
    let (la, lb) = (a.mode.label(), b.mode.label());
    let mut out = format!("feeder,E_p {la},E_p {lb},E_q {la},E_q {lb},eso_ok {la},eso_ok {lb}\n");
    for (f, t) in keys {
        let (ra, rb) = (a.record(f, t), b.record(f, t));
        let cell = |r: Option<&BranchRecord>, kind| r.map_or_else(|| "missing".into(), |r| fmt_cell(r.flow(kind).e));
        let ok = |r: Option<&BranchRecord>| r.map_or_else(|| "missing".into(), |r| r.eso_ok().to_string());
        let _ = writeln!(
            out,
            "{f}-{t},{},{},{},{},{},{}",
            cell(ra, FlowKind::P),
            cell(rb, FlowKind::P),
            cell(ra, FlowKind::Q),
            cell(rb, FlowKind::Q),
            ok(ra),
            ok(rb)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distflow::{build_restoration_model, BuildOptions, NetworkCase};
    use crate::milp::SolveStatus;

    /// Toy case with the P filling set to `deltas` (grid of 5 segments).
    fn toy_solution(deltas: [f64; 5], p: f64) -> (DistFlowArtifacts, Solution) {
        let case = NetworkCase::bundled("toy2bus").unwrap();
        let opts = BuildOptions { num_segments: 5, ..BuildOptions::default() };
        let (m, art) = build_restoration_model(&case, &opts).unwrap();
        let mut x = vec![0.0; m.variables().len()];
        let b = &art.branches[0].block_p;
        for (d, v) in b.deltas.iter().zip(deltas) {
            x[d.index()] = v;
        }
        x[b.y.index()] = p;
        (art, Solution::new(SolveStatus::Optimal, 0.0, x))
    }

    #[test]
    fn unordered_filling_error() {
        let case = NetworkCase::bundled("toy2bus").unwrap();
        let h = case.i_max_pu(&case.branches[0]) / 5.0;
        // the [1,2,2,0,0] pattern scaled to this grid: f = 34·(h/2)², y = 5·(h/2)
        let u = h / 2.0;
        let (art, sol) = toy_solution([u, 2.0 * u, 2.0 * u, 0.0, 0.0], 5.0 * u);
        let r = branch_errors(&sol, &art, DEFAULT_ZERO_FLOW_FLOOR).unwrap();
        let p = &r.records[0].p;
        approx::assert_relative_eq!(p.f, 34.0 * u * u, max_relative = 1e-12);
        approx::assert_relative_eq!(p.e.unwrap(), 36.0, max_relative = 1e-9);
        assert!(!p.eso_ok);
        assert!(r.records[0].q.negligible && r.records[0].q.e.is_none());
        assert_eq!(r.max_e_p(), p.e);
        assert!(r.bound_violations(1e-9).is_empty());
    }

    #[test]
    fn exact_breakpoint_is_zero_error() {
        let case = NetworkCase::bundled("toy2bus").unwrap();
        let h = case.i_max_pu(&case.branches[0]) / 5.0;
        let (art, sol) = toy_solution([h, h, 0.0, 0.0, 0.0], 2.0 * h);
        let r = branch_errors(&sol, &art, DEFAULT_ZERO_FLOW_FLOOR).unwrap();
        assert!(r.records[0].p.e.unwrap() < 1e-9);
        assert!(r.records[0].p.eso_ok);
    }

    #[test]
    fn renderings_are_stable() {
        let case = NetworkCase::bundled("toy2bus").unwrap();
        let h = case.i_max_pu(&case.branches[0]) / 5.0;
        let (art, sol) = toy_solution([h, h / 2.0, 0.0, 0.0, 0.0], 1.5 * h);
        let a = branch_errors_with(Exec::Sequential, &sol, &art, DEFAULT_ZERO_FLOW_FLOOR).unwrap();
        let b = branch_errors(&sol, &art, DEFAULT_ZERO_FLOW_FLOOR).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_table(), b.to_table());
        let d = a.to_delimited();
        assert!(d.starts_with("feeder,mode,E_p,E_q,eso_ok\n1-2,SO-PWL,"));
        assert!(d.trim_end().ends_with(",negligible,true"));
        assert_eq!(a.filling_dump().lines().count(), 1 + 2 * 5);
        let cmp = comparison_table(&a, &b, &[(1, 2), (7, 8)]);
        assert!(cmp.contains("7-8,missing"));
    }
}
