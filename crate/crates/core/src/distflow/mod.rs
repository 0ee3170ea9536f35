//! Linearized DistFlow model construction.

mod block;
mod build;
mod case;

pub use block::{emit_pwl_block, BlockLabel, FlowKind, Mode, OrderingParams, PwlBlockHandle};
pub use build::{
    build_distflow, build_restoration_model, build_restoration_objective, flow_bound, BranchVars, BuildOptions,
    DistFlowArtifacts, GenVars, LoadPickup, LoadVars, ObjectiveKind, RootSupply,
};
pub use case::{load_case, load_case_path, Bases, Branch, Bus, Generator, Load, NetworkCase, BUNDLED_CASES};
