//! Rollouts, occupancy sampling, and exact vs Monte-Carlo policy values on a
//! small tabular MDP.
//!
//! Run with: `cargo run --release --example rollout_basics`

use std::sync::Arc;

use nalgebra::DVector;
use pcmlp::mdp::{
    d_pi_sample, estimate_value, rollout, Action, ActionSpace, Mdp, State, TabularPolicy,
};
use pcmlp::models::{Dynamics, TabularTable, TransitionModel};
use pcmlp::tabular::exact_value_tabular;
use pcmlp::StreamSeed;

fn main() {
    // Two-state "leaky switch": action 0 tends to stay, action 1 tends to flip.
    let rows = vec![
        DVector::from_vec(vec![0.9, 0.1]),
        DVector::from_vec(vec![0.2, 0.8]),
        DVector::from_vec(vec![0.85, 0.15]),
        DVector::from_vec(vec![0.3, 0.7]),
    ];
    let table = TabularTable::new(2, 2, rows).unwrap();
    let mdp = Mdp::new(
        6,
        State::Index(0),
        Arc::new(|s: &State, _: &Action| {
            if s.as_index().unwrap() == 1 {
                1.0
            } else {
                0.1
            }
        }),
        Dynamics::Model(TransitionModel::Tabular(table)),
        ActionSpace::Discrete(2),
    )
    .unwrap();

    // Always press "flip" — a time-indexed deterministic policy.
    let policy = TabularPolicy::new(vec![vec![1, 1]; 6]);

    let mut rng = StreamSeed::new(0).rng();
    let traj = rollout(&policy, &mdp, &mut rng).unwrap();
    println!("one episode:");
    for (h, step) in traj.steps.iter().enumerate() {
        println!(
            "  step {h}: s={:?} a={:?} r={:.2}",
            step.state.as_index().unwrap(),
            step.action.as_index().unwrap(),
            step.reward
        );
    }

    let sample = d_pi_sample(&policy, &mdp, &mut rng).unwrap();
    println!(
        "occupancy sample: (s={}, a={}) at step {}",
        sample.state.as_index().unwrap(),
        sample.action.as_index().unwrap(),
        sample.step
    );

    let exact = exact_value_tabular(&policy, &mdp).unwrap();
    let (mc, se) = estimate_value(&policy, &mdp, 20_000, &mut rng).unwrap();
    println!("exact value J = {exact:.4}");
    println!("Monte-Carlo    = {mc:.4} +- {se:.4}");
}
