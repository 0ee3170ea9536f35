//! Backward/forward sweep power flow on a radial feeder.
//!
//! The root is the slack bus at `v_norm∠0`. Each iteration converts bus
//! injections to currents at the present voltages, sums currents from the
//! leaves up (backward), then recomputes voltages from the root down
//! (forward). The root slack injection absorbs whatever the given injections
//! leave unbalanced, including the losses the linear model only approximates.

use std::collections::VecDeque;
use std::fmt::Write;

use num_complex::Complex64;

use crate::distflow::{DistFlowArtifacts, NetworkCase};
use crate::milp::Solution;
use crate::{Error, Result};

/// Largest voltage update (pu) accepted as converged.
pub const SWEEP_TOL: f64 = 1e-8;
pub const SWEEP_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Voltage magnitude per bus, in case bus order.
    pub v_mag: Vec<f64>,
    /// Complex power leaving the `from` end towards `to`, per branch in case order.
    pub branch_flows: Vec<(f64, f64)>,
    pub iterations: usize,
    /// `(P, Q)` the root must supply beyond its own injection.
    pub root_slack: (f64, f64),
    /// Largest voltage update of each iteration.
    pub trace: Vec<f64>,
}

/// Root-first traversal: for every non-root bus, the branch to its parent.
struct Tree {
    order: Vec<usize>,
    /// `(branch index, parent bus index)`, `None` at the root.
    parent: Vec<Option<(usize, usize)>>,
}

fn tree(case: &NetworkCase) -> Result<Tree> {
    let n = case.buses.len();
    let root = case.bus_index(case.root).ok_or_else(|| Error::NotRadial(format!("root bus {} missing", case.root)))?;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, b) in case.branches.iter().enumerate() {
        let (i, j) = match (case.bus_index(b.from), case.bus_index(b.to)) {
            (Some(i), Some(j)) => (i, j),
            _ => return Err(Error::NotRadial(format!("branch {} references an unknown bus", b.label()))),
        };
        adj[i].push((k, j));
        adj[j].push((k, i));
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &(k, v) in &adj[u] {
            if Some(k) == parent[u].map(|(pk, _)| pk) {
                continue;
            }
            if seen[v] {
                return Err(Error::NotRadial(format!("loop through branch {}", case.branches[k].label())));
            }
            seen[v] = true;
            parent[v] = Some((k, u));
            queue.push_back(v);
        }
    }
    if order.len() != n {
        return Err(Error::NotRadial(format!("{} bus(es) unreachable from the root", n - order.len())));
    }
    Ok(Tree { order, parent })
}

/// Solves the power flow for net bus injections `(P, Q)` in pu (generation
/// positive, load negative), given in case bus order. The root's own entry is
/// kept; the slack comes on top of it.
pub fn radial_sweep(case: &NetworkCase, injections: &[(f64, f64)], v_norm: f64) -> Result<SweepResult> {
    let n = case.buses.len();
    if injections.len() != n {
        return Err(Error::Argument(format!("{} injections for {n} buses", injections.len())));
    }
    if !(v_norm > 0.0) {
        return Err(Error::Argument(format!("v_norm must be positive, got {v_norm}")));
    }
    let t = tree(case)?;
    let root = t.order[0];
    let s_inj: Vec<Complex64> = injections.iter().map(|&(p, q)| Complex64::new(p, q)).collect();
    let z: Vec<Complex64> = case.branches.iter().map(|b| Complex64::new(b.r, b.x)).collect();

    let mut v = vec![Complex64::new(v_norm, 0.0); n];
    // current from the parent into each bus's subtree
    let mut down = vec![Complex64::new(0.0, 0.0); n];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..SWEEP_MAX_ITER {
        for u in 0..n {
            down[u] = -(s_inj[u] / v[u]).conj();
        }
        for &u in t.order.iter().rev() {
            if let Some((_, p)) = t.parent[u] {
                let child = down[u];
                down[p] += child;
            }
        }
        let mut next = v.clone();
        for &u in &t.order[1..] {
            let (k, p) = t.parent[u].expect("non-root bus has a parent");
            next[u] = next[p] - z[k] * down[u];
        }
        let delta = v.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        trace.push(delta);
        v = next;
        if !delta.is_finite() || v.iter().any(|x| !(x.norm() > 0.0)) {
            break;
        }
        if delta < SWEEP_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: trace.len(), trace });
    }

    let mut branch_flows = vec![(0.0, 0.0); case.branches.len()];
    let mut from_root = Complex64::new(0.0, 0.0);
    for &u in &t.order[1..] {
        let (k, p) = t.parent[u].expect("non-root bus has a parent");
        let s_parent_end = v[p] * down[u].conj();
        let b = &case.branches[k];
        let s = if case.bus_index(b.from) == Some(p) { s_parent_end } else { -(v[u] * down[u].conj()) };
        branch_flows[k] = (s.re, s.im);
        if p == root {
            from_root += s_parent_end;
        }
    }
    let slack = from_root - s_inj[root];
    Ok(SweepResult {
        v_mag: v.iter().map(|x| x.norm()).collect(),
        branch_flows,
        iterations: trace.len(),
        root_slack: (slack.re, slack.im),
        trace,
    })
}

/// Net injection per bus from a solved model: generator output minus served
/// load. The root injection variable is left out; the sweep's slack replaces it.
pub fn injections_from_solution(
    case: &NetworkCase,
    artifacts: &DistFlowArtifacts,
    solution: &Solution,
) -> Result<Vec<(f64, f64)>> {
    let mut out = vec![(0.0, 0.0); case.buses.len()];
    let value = |id| solution.get(id).ok_or_else(|| Error::MissingVariable(format!("variable #{}", crate::milp::VarId::index(id))));
    for g in &artifacts.generators {
        let i = case.bus_index(g.bus).ok_or_else(|| Error::Case(format!("generator at unknown bus {}", g.bus)))?;
        out[i].0 += value(g.p)?;
        out[i].1 += value(g.q)?;
    }
    for l in &artifacts.loads {
        let i = case.bus_index(l.bus).ok_or_else(|| Error::Case(format!("load at unknown bus {}", l.bus)))?;
        let beta = value(l.beta)?;
        out[i].0 -= beta * l.p;
        out[i].1 -= beta * l.q;
    }
    Ok(out)
}

/// Squared voltages from the linear model next to the sweep's.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageComparison {
    /// `(bus id, model V², sweep |V|²)`.
    pub buses: Vec<(usize, f64, f64)>,
    pub max_abs_dev: f64,
    pub model_root: (f64, f64),
    pub sweep_root: (f64, f64),
}

impl VoltageComparison {
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("bus,v_sq_model,v_sq_sweep,deviation\n");
        for &(id, a, b) in &self.buses {
            let _ = writeln!(out, "{id},{a},{b},{}", b - a);
        }
        out
    }
}

pub fn compare_voltages(
    case: &NetworkCase,
    artifacts: &DistFlowArtifacts,
    solution: &Solution,
    sweep: &SweepResult,
) -> Result<VoltageComparison> {
    let mut buses = Vec::with_capacity(case.buses.len());
    let mut max_abs_dev: f64 = 0.0;
    for ((bus, &id), &vm) in case.buses.iter().zip(&artifacts.v_sqr).zip(&sweep.v_mag) {
        let model = solution.get(id).ok_or_else(|| Error::MissingVariable(format!("V_{}", bus.id)))?;
        let exact = vm * vm;
        max_abs_dev = max_abs_dev.max((exact - model).abs());
        buses.push((bus.id, model, exact));
    }
    let get = |id| solution.get(id).unwrap_or(0.0);
    Ok(VoltageComparison {
        buses,
        max_abs_dev,
        model_root: (get(artifacts.root_p), get(artifacts.root_q)),
        sweep_root: sweep.root_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distflow::load_case;

    #[test]
    fn flat_profile() {
        let case = NetworkCase::bundled("ieee33_4dg").unwrap();
        let r = radial_sweep(&case, &vec![(0.0, 0.0); case.buses.len()], 1.0).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.v_mag.iter().all(|&v| v == 1.0));
        assert!(r.branch_flows.iter().all(|&(p, q)| p == 0.0 && q == 0.0));
        assert_eq!(r.root_slack, (0.0, 0.0));
    }

    #[test]
    fn two_bus_closed_form() {
        let case = NetworkCase::bundled("toy2bus").unwrap();
        let (r, x, pl, ql) = (0.01, 0.01, 0.01, 0.005);
        let s = radial_sweep(&case, &[(0.0, 0.0), (-pl, -ql)], 1.0).unwrap();
        let b = 1.0 - 2.0 * (r * pl + x * ql);
        let v2_sq = (b + (b * b - 4.0 * (r * r + x * x) * (pl * pl + ql * ql)).sqrt()) / 2.0;
        assert!((s.v_mag[1].powi(2) - v2_sq).abs() < 1e-8);
        let i_sq = (pl * pl + ql * ql) / v2_sq;
        let (p, q) = s.branch_flows[0];
        assert!((p - (pl + r * i_sq)).abs() < 1e-8);
        assert!((q - (ql + x * i_sq)).abs() < 1e-8);
        assert!((s.root_slack.0 - p).abs() < 1e-15);
    }

    #[test]
    fn reversed_branch_orientation() {
        let text = r#"
            name = "rev"
            root = 1
            [bases]
            s_mva = 10.0
            v_kv = 12.66
            [[buses]]
            id = 1
            [[buses]]
            id = 2
            [[branches]]
            from = 2
            to = 1
            r_pu = 0.01
            x_pu = 0.01
            i_max_amps = 50.0
        "#;
        let case = load_case(text).unwrap();
        let s = radial_sweep(&case, &[(0.0, 0.0), (-0.01, -0.005)], 1.0).unwrap();
        // flow measured at bus 2 towards the root: the load draws, so negative
        assert!(s.branch_flows[0].0 < 0.0 && (s.branch_flows[0].0 + 0.01).abs() < 1e-12);
    }

    #[test]
    fn collapse_is_reported() {
        let case = NetworkCase::bundled("toy2bus").unwrap();
        // beyond the transfer limit of the line: no real solution exists
        match radial_sweep(&case, &[(0.0, 0.0), (-30.0, -30.0)], 1.0) {
            Err(Error::NoConvergence { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
