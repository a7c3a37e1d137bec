//! Exact planners for finite MDPs: backward-induction dynamic programming,
//! brute-force policy enumeration, and the constrained optimistic planner
//! that maximizes jointly over policies and confidence-set models.

use crate::error::{Error, Result};
use crate::mdp::TabularPolicy;
use crate::models::TabularTable;
use crate::tabular::{exact_value_matrix, TabularPolicyMatrix, TabularView};

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct TabularPlan {
    pub policy: TabularPolicy,
    pub value: f64,
}

fn view_from(table: &TabularTable, reward: &dyn Fn(usize, usize) -> f64, horizon: usize, s0: usize) -> TabularView {
    TabularView {
        table: table.clone(),
        rewards: DMatrix::from_fn(table.n_states(), table.n_actions(), |s, a| reward(s, a)),
        horizon,
        initial_state: s0,
    }
}

/// Optimal time-indexed deterministic policy by backward induction, ties to
/// the lowest action index.
pub fn tabular_plan(
    table: &TabularTable,
    reward: &dyn Fn(usize, usize) -> f64,
    horizon: usize,
    initial_state: usize,
) -> Result<TabularPlan> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if initial_state >= table.n_states() {
        return Err(Error::invalid("initial state out of range"));
    }
    let (ns, na) = (table.n_states(), table.n_actions());
    let mut value = vec![0.0; ns];
    let mut actions = vec![vec![0usize; ns]; horizon];
    for h in (0..horizon).rev() {
        let mut new_value = vec![0.0; ns];
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..na {
                let next = table.next_dist(s, a)?;
                let q = reward(s, a)
                    + next
                        .iter()
                        .zip(value.iter())
                        .map(|(p, v)| p * v)
                        .sum::<f64>();
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            new_value[s] = best;
            actions[h][s] = best_a;
        }
        value = new_value;
    }
    Ok(TabularPlan {
        policy: TabularPolicy::new(actions),
        value: value[initial_state],
    })
}

/// Brute force over every time-indexed deterministic policy. Independent of
/// the dynamic-programming route; intended for small instances and as an
/// oracle for it.
pub fn exhaustive_search(
    table: &TabularTable,
    reward: &dyn Fn(usize, usize) -> f64,
    horizon: usize,
    initial_state: usize,
    node_budget: usize,
) -> Result<TabularPlan> {
    let (ns, na) = (table.n_states(), table.n_actions());
    let slots = ns * horizon;
    let total = (na as f64).powi(slots as i32);
    if total > node_budget as f64 {
        return Err(Error::invalid(format!(
            "exhaustive search needs {total} policies, budget {node_budget}"
        )));
    }
    let view = view_from(table, reward, horizon, initial_state);
    let mut counter = vec![0usize; slots];
    let mut best: Option<TabularPlan> = None;
    loop {
        let actions: Vec<Vec<usize>> = (0..horizon)
            .map(|h| counter[h * ns..(h + 1) * ns].to_vec())
            .collect();
        let policy = TabularPolicy::new(actions);
        let matrix = TabularPolicyMatrix::from_deterministic(&policy, ns, na);
        let value = exact_value_matrix(&view, &matrix)?;
        let better = best.as_ref().is_none_or(|b| value > b.value);
        if better {
            best = Some(TabularPlan { policy, value });
        }
        // Mixed-radix increment.
        let mut i = 0;
        loop {
            if i == slots {
                return Ok(best.unwrap());
            }
            counter[i] += 1;
            if counter[i] < na {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

/// Candidate policy sets for the optimistic planner.
#[derive(Debug, Clone)]
pub enum PolicySet {
    /// All time-indexed deterministic policies (planned per model by DP).
    All,
    /// An explicit finite list.
    Finite(Vec<TabularPolicy>),
}

#[derive(Debug, Clone)]
pub struct OptimisticPlan {
    pub policy: TabularPolicy,
    pub model_index: usize,
    pub value: f64,
}

/// Joint argmax of `V^pi_P` over confidence-set members and the policy set.
/// Ties break toward the lowest `(model, policy)` index.
pub fn optimistic_plan(
    tables: &[TabularTable],
    members: &[usize],
    policies: &PolicySet,
    reward: &dyn Fn(usize, usize) -> f64,
    horizon: usize,
    initial_state: usize,
) -> Result<OptimisticPlan> {
    if members.is_empty() {
        return Err(Error::EmptyConfidenceRegion);
    }
    let mut best: Option<OptimisticPlan> = None;
    for &mi in members {
        let table = tables
            .get(mi)
            .ok_or_else(|| Error::invalid(format!("member index {mi} out of range")))?;
        match policies {
            PolicySet::All => {
                let plan = tabular_plan(table, reward, horizon, initial_state)?;
                if best.as_ref().is_none_or(|b| plan.value > b.value) {
                    best = Some(OptimisticPlan {
                        policy: plan.policy,
                        model_index: mi,
                        value: plan.value,
                    });
                }
            }
            PolicySet::Finite(list) => {
                let view = view_from(table, reward, horizon, initial_state);
                for policy in list {
                    let matrix = TabularPolicyMatrix::from_deterministic(
                        policy,
                        table.n_states(),
                        table.n_actions(),
                    );
                    let value = exact_value_matrix(&view, &matrix)?;
                    if best.as_ref().is_none_or(|b| value > b.value) {
                        best = Some(OptimisticPlan {
                            policy: policy.clone(),
                            model_index: mi,
                            value,
                        });
                    }
                }
            }
        }
    }
    Ok(best.expect("nonempty members"))
}
