//! Model-based reinforcement learning with policy-cover guided exploration.
//!
//! The library fits transition models by maximum likelihood on data drawn
//! from a growing *policy cover*, prices novelty with an elliptical bonus
//! built from the cover's aggregate feature covariance, and hands the
//! bonus-augmented reward to a black-box planner (MPPI for continuous
//! models, exact dynamic programming for tabular ones). An optimism-driven
//! variant replaces the bonus with a likelihood confidence region and plans
//! jointly over policies and models; its brute-force companion computes the
//! distributional eluder dimension on small instances.
//!
//! Start with the runnable programs under `examples/`, or the `pcmlp` binary
//! for config-driven experiments.

pub mod cover;
pub mod envs;
pub mod error;
pub mod features;
pub mod harness;
pub mod matio;
pub mod mdp;
pub mod mle;
pub mod models;
pub mod odpc;
pub mod pcmlp;
pub mod planners;
pub mod stream;
pub mod tabular;

pub use error::{Error, Result};
pub use stream::StreamSeed;
