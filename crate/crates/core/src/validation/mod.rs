//! Post-solve analysis: filling extraction, per-branch approximation errors,
//! a constructive check of the ordering rows, and an exact radial sweep.

mod enforce;
mod report;
mod sweep;

pub use enforce::{check_unordered_feasibility, Feasibility};
pub use report::{
    branch_errors, branch_errors_with, comparison_table, BranchRecord, ErrorReport, FlowError, DEFAULT_ZERO_FLOW_FLOOR,
    STUDY_FEEDERS,
};
pub use sweep::{
    compare_voltages, injections_from_solution, radial_sweep, SweepResult, VoltageComparison, SWEEP_MAX_ITER, SWEEP_TOL,
};

use crate::distflow::PwlBlockHandle;
use crate::milp::{Solution, FEAS_TOL};
use crate::pwl::FillingState;
use crate::{Error, Result};

/// Reads the block's `Δ` values out of `solution`. Values within the solver
/// feasibility tolerance of `[0, h]` are clamped.
pub fn extract_filling(solution: &Solution, block: &PwlBlockHandle) -> Result<FillingState> {
    let mut deltas = Vec::with_capacity(block.deltas.len());
    for (i, &d) in block.deltas.iter().enumerate() {
        let missing = || Error::MissingVariable(format!("segment {} of {}:{}", i + 1, block.label.owner, block.label.kind.label()));
        if solution.is_missing(d) {
            return Err(missing());
        }
        deltas.push(solution.get(d).ok_or_else(missing)?);
    }
    FillingState::with_tolerance(block.grid, deltas, FEAS_TOL)
}
