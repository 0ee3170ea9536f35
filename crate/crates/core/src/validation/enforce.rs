//! Direct substitution of a filling into single-block PWL and SO-PWL models.
//!
//! The flow is set to the filling total with `y⁺ = y`, `y⁻ = 0`. In ordered
//! mode each `x_λ` appears only in its own `eq20`/`eq21` pair, so the rows
//! decouple and every `x_λ` can be chosen independently; the block admits the
//! filling iff some choice satisfies both rows for every `λ`.

use crate::distflow::{emit_pwl_block, BlockLabel, FlowKind, Mode, OrderingParams, PwlBlockHandle};
use crate::milp::{recheck, MilpModel, Violation};
use crate::pwl::FillingState;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub pwl: bool,
    pub sopwl: bool,
    /// Rows the filling breaks in each mode.
    pub pwl_violations: Vec<Violation>,
    pub sopwl_violations: Vec<Violation>,
}

/// Whether `filling` is admissible in a plain PWL block and in an ordered one
/// built with `ordering` (default `M = h`, `ε⁺ = 1e-6·h`).
pub fn check_unordered_feasibility(filling: &FillingState, ordering: Option<OrderingParams>) -> Result<Feasibility> {
    let pwl_violations = substitute(filling, Mode::Pwl, None)?;
    let sopwl_violations = substitute(filling, Mode::SoPwl, ordering)?;
    Ok(Feasibility { pwl: pwl_violations.is_empty(), sopwl: sopwl_violations.is_empty(), pwl_violations, sopwl_violations })
}

fn substitute(filling: &FillingState, mode: Mode, ordering: Option<OrderingParams>) -> Result<Vec<Violation>> {
    let grid = *filling.grid();
    let mut model = MilpModel::new("witness");
    let y = model.add_continuous("y", -grid.y_max(), grid.y_max())?;
    let block = emit_pwl_block(&mut model, y, grid, mode, ordering, BlockLabel::branch(0, 1, FlowKind::P))?;
    model.freeze();

    let total = filling.total();
    let mut x = vec![0.0; model.variables().len()];
    x[y.index()] = total;
    x[block.y_plus.index()] = total;
    x[block.z_plus.index()] = if total > 0.0 { 1.0 } else { 0.0 };
    for (d, v) in block.deltas.iter().zip(filling.deltas()) {
        x[d.index()] = *v;
    }
    choose_order(&block, filling, &mut x);
    // tight enough to resolve ε⁺ = 1e-6·h for any practical segment count
    Ok(recheck(&model, &x, 1e-10 * grid.y_max()))
}

/// Picks each `x_λ` so that its two rows hold if possible.
fn choose_order(block: &PwlBlockHandle, filling: &FillingState, x: &mut [f64]) {
    let Some(OrderingParams { big_m, epsilon }) = block.ordering else { return };
    let h = block.grid.seg_width();
    let d = filling.deltas();
    for (l, id) in block.order.iter().enumerate() {
        let next = d.get(l + 1).copied().unwrap_or(0.0);
        let ok = |xv: f64| d[l] - big_m * xv >= h - big_m - epsilon && next - h * xv <= 0.0;
        // x = 0 leaves eq20 slack but forces the next segment empty
        x[id.index()] = if ok(0.0) { 0.0 } else { 1.0 };
    }
}
