//! Planning oracles: black-box optimizers of `J(pi; r, P)` inside a model.
//!
//! Every implementation consumes only the model, the reward function, and the
//! horizon — never real-environment samples.

mod mppi;
mod tabular;

pub use mppi::{MppiConfig, MppiPlanner, MppiPolicy, MppiStepDiag};
pub use tabular::{
    exhaustive_search, optimistic_plan, tabular_plan, OptimisticPlan, PolicySet, TabularPlan,
};

/// Which planning oracle a run uses.
#[derive(Debug, Clone)]
pub enum PlannerChoice {
    Mppi(MppiConfig),
    TabularDp,
    Exhaustive { node_budget: usize },
}
