//! Exact finite-horizon computations on tabular MDPs: backward-induction
//! values, occupancy measures by forward recursion, and the simulation-lemma
//! identity checker.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mdp::{Action, Mdp, State, TabularPolicy};
use crate::models::TabularTable;

/// Snapshot of a tabular MDP with rewards materialized per pair.
pub struct TabularView {
    pub table: TabularTable,
    /// `rewards[(s, a)]`, after the MDP's clamping rule.
    pub rewards: DMatrix<f64>,
    pub horizon: usize,
    pub initial_state: usize,
}

pub fn tabular_view(mdp: &Mdp) -> Result<TabularView> {
    let model = mdp
        .transition_model()
        .ok_or(Error::UnsupportedModel("black-box dynamics are not tabular"))?;
    let table = model
        .tabular()
        .ok_or(Error::UnsupportedModel("dynamics have no tabular law"))?
        .clone();
    let rewards = DMatrix::from_fn(table.n_states(), table.n_actions(), |s, a| {
        mdp.effective_reward(&State::Index(s), &Action::Index(a))
    });
    Ok(TabularView {
        table,
        rewards,
        horizon: mdp.horizon,
        initial_state: mdp.initial_state.as_index()?,
    })
}

/// Stochastic time-indexed policy in matrix form: `probs[h]` is a
/// row-stochastic `n_states x n_actions` matrix.
#[derive(Debug, Clone)]
pub struct TabularPolicyMatrix {
    pub probs: Vec<DMatrix<f64>>,
}

impl TabularPolicyMatrix {
    pub fn from_deterministic(policy: &TabularPolicy, n_states: usize, n_actions: usize) -> Self {
        let probs = policy
            .actions
            .iter()
            .map(|table| {
                let mut m = DMatrix::zeros(n_states, n_actions);
                for (s, a) in table.iter().enumerate() {
                    m[(s, *a)] = 1.0;
                }
                m
            })
            .collect();
        TabularPolicyMatrix { probs }
    }

    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let m = DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64);
        TabularPolicyMatrix {
            probs: vec![m; horizon],
        }
    }
}

/// Exact `J(pi)` by backward induction, given arbitrary per-pair rewards.
pub fn exact_value_matrix(view: &TabularView, policy: &TabularPolicyMatrix) -> Result<f64> {
    let values = value_functions(view, policy)?;
    Ok(values[0][view.initial_state])
}

/// Per-step value functions `V_h`, `h = 0..=H` (the terminal entry is zero).
pub fn value_functions(view: &TabularView, policy: &TabularPolicyMatrix) -> Result<Vec<Vec<f64>>> {
    let (ns, na) = (view.table.n_states(), view.table.n_actions());
    if policy.probs.len() < view.horizon {
        return Err(Error::invalid("policy shorter than the horizon"));
    }
    let mut values = vec![vec![0.0; ns]; view.horizon + 1];
    for h in (0..view.horizon).rev() {
        for s in 0..ns {
            let mut v = 0.0;
            for a in 0..na {
                let p = policy.probs[h][(s, a)];
                if p == 0.0 {
                    continue;
                }
                let next = view.table.next_dist(s, a)?;
                let cont: f64 = next
                    .iter()
                    .zip(values[h + 1].iter())
                    .map(|(q, vn)| q * vn)
                    .sum();
                v += p * (view.rewards[(s, a)] + cont);
            }
            values[h][s] = v;
        }
    }
    Ok(values)
}

/// Per-step state-action occupancies `d_h` by forward recursion, each an
/// `n_states x n_actions` matrix summing to 1.
pub fn occupancies(view: &TabularView, policy: &TabularPolicyMatrix) -> Result<Vec<DMatrix<f64>>> {
    let (ns, na) = (view.table.n_states(), view.table.n_actions());
    let mut state_dist = vec![0.0; ns];
    state_dist[view.initial_state] = 1.0;
    let mut out = Vec::with_capacity(view.horizon);
    for h in 0..view.horizon {
        let mut d = DMatrix::zeros(ns, na);
        for s in 0..ns {
            for a in 0..na {
                d[(s, a)] = state_dist[s] * policy.probs[h][(s, a)];
            }
        }
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let mass = d[(s, a)];
                if mass == 0.0 {
                    continue;
                }
                let dist = view.table.next_dist(s, a)?;
                for sp in 0..ns {
                    next[sp] += mass * dist[sp];
                }
            }
        }
        out.push(d);
        state_dist = next;
    }
    Ok(out)
}

/// Average state-action occupancy `(1/H) sum_h d_h`.
pub fn average_occupancy(view: &TabularView, policy: &TabularPolicyMatrix) -> Result<DMatrix<f64>> {
    let per_step = occupancies(view, policy)?;
    let mut avg = DMatrix::zeros(view.table.n_states(), view.table.n_actions());
    for d in &per_step {
        avg += d;
    }
    Ok(avg / view.horizon as f64)
}

/// Exact value of a deterministic time-indexed policy on a tabular MDP.
pub fn exact_value_tabular(policy: &TabularPolicy, mdp: &Mdp) -> Result<f64> {
    let view = tabular_view(mdp)?;
    let matrix =
        TabularPolicyMatrix::from_deterministic(policy, view.table.n_states(), view.table.n_actions());
    exact_value_matrix(&view, &matrix)
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationGap {
    /// `J(pi; r', P') - J(pi; r, P*)`, both sides by exact backward induction.
    pub lhs: f64,
    /// The telescoped form: `sum_h E_{d_h}[r' - r + (P' - P*) . V'_{h+1}]`
    /// with occupancies under the true MDP and values under the model.
    pub rhs: f64,
}

/// Evaluates both sides of the simulation-lemma identity exactly.
pub fn simulation_gap(policy: &TabularPolicy, mdp_true: &Mdp, mdp_model: &Mdp) -> Result<SimulationGap> {
    let true_view = tabular_view(mdp_true)?;
    let model_view = tabular_view(mdp_model)?;
    let (ns, na) = (true_view.table.n_states(), true_view.table.n_actions());
    if model_view.table.n_states() != ns || model_view.table.n_actions() != na {
        return Err(Error::Dimension {
            context: "simulation gap state space",
            expected: ns * na,
            found: model_view.table.n_states() * model_view.table.n_actions(),
        });
    }
    if model_view.horizon != true_view.horizon
        || model_view.initial_state != true_view.initial_state
    {
        return Err(Error::invalid("MDPs must share horizon and initial state"));
    }
    let matrix = TabularPolicyMatrix::from_deterministic(policy, ns, na);
    let j_model = exact_value_matrix(&model_view, &matrix)?;
    let j_true = exact_value_matrix(&true_view, &matrix)?;
    let lhs = j_model - j_true;

    let model_values = value_functions(&model_view, &matrix)?;
    let true_occ = occupancies(&true_view, &matrix)?;
    let mut rhs = 0.0;
    for h in 0..true_view.horizon {
        for s in 0..ns {
            for a in 0..na {
                let mass = true_occ[h][(s, a)];
                if mass == 0.0 {
                    continue;
                }
                let reward_gap = model_view.rewards[(s, a)] - true_view.rewards[(s, a)];
                let p_model = model_view.table.next_dist(s, a)?;
                let p_true = true_view.table.next_dist(s, a)?;
                let value_gap: f64 = (0..ns)
                    .map(|sp| (p_model[sp] - p_true[sp]) * model_values[h + 1][sp])
                    .sum();
                rhs += mass * (reward_gap + value_gap);
            }
        }
    }
    Ok(SimulationGap { lhs, rhs })
}
