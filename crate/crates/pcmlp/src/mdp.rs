//! Episodic finite-horizon MDP abstractions.
//!
//! States and actions are either indices into finite sets (tabular case) or
//! real vectors (continuous case). Policies hand out per-trajectory actors so
//! rollouts stay pure given `(policy, mdp, stream)` and can run in parallel
//! across independent streams.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{Dynamics, TransitionModel};
use crate::stream::StreamSeed;

/// Concrete generator type used by every sampling operation in the crate.
pub type RngStream = rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Index(usize),
    Vector(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Index(usize),
    Vector(DVector<f64>),
}

impl State {
    pub fn as_index(&self) -> Result<usize> {
        match self {
            State::Index(i) => Ok(*i),
            State::Vector(_) => Err(Error::UnsupportedModel("expected a tabular state")),
        }
    }

    pub fn as_vector(&self) -> Result<&DVector<f64>> {
        match self {
            State::Vector(v) => Ok(v),
            State::Index(_) => Err(Error::UnsupportedModel("expected a continuous state")),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            State::Index(_) => true,
            State::Vector(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

impl Action {
    pub fn as_index(&self) -> Result<usize> {
        match self {
            Action::Index(i) => Ok(*i),
            Action::Vector(_) => Err(Error::UnsupportedModel("expected a tabular action")),
        }
    }

    pub fn as_vector(&self) -> Result<&DVector<f64>> {
        match self {
            Action::Vector(v) => Ok(v),
            Action::Index(_) => Err(Error::UnsupportedModel("expected a continuous action")),
        }
    }
}

#[derive(Clone)]
pub enum ActionSpace {
    Discrete(usize),
    Box { low: DVector<f64>, high: DVector<f64> },
}

impl ActionSpace {
    pub fn sample_uniform(&self, rng: &mut RngStream) -> Action {
        match self {
            ActionSpace::Discrete(n) => Action::Index(rng.random_range(0..*n)),
            ActionSpace::Box { low, high } => {
                let v = DVector::from_fn(low.len(), |i, _| rng.random_range(low[i]..=high[i]));
                Action::Vector(v)
            }
        }
    }
}

pub type RewardFn = Arc<dyn Fn(&State, &Action) -> f64 + Send + Sync>;

/// Episodic MDP specification: fixed horizon, fixed initial state, known
/// reward, and a transition law (explicit model or opaque sampler).
#[derive(Clone)]
pub struct Mdp {
    pub horizon: usize,
    pub initial_state: State,
    pub reward: RewardFn,
    pub dynamics: Dynamics,
    pub action_space: ActionSpace,
    /// Clamp observed rewards into `[0, 1]` (with a logged warning) instead of
    /// erroring. Disabled for internal planning MDPs whose rewards carry an
    /// exploration bonus and legitimately exceed 1.
    pub clamp_reward: bool,
}

impl Mdp {
    pub fn new(
        horizon: usize,
        initial_state: State,
        reward: RewardFn,
        dynamics: Dynamics,
        action_space: ActionSpace,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        Ok(Mdp {
            horizon,
            initial_state,
            reward,
            dynamics,
            action_space,
            clamp_reward: true,
        })
    }

    pub fn effective_reward(&self, s: &State, a: &Action) -> f64 {
        let r = (self.reward)(s, a);
        if self.clamp_reward && !(0.0..=1.0).contains(&r) {
            log::warn!("reward {r} outside [0,1]; clamping");
            return r.clamp(0.0, 1.0);
        }
        r
    }

    pub fn transition_model(&self) -> Option<&TransitionModel> {
        match &self.dynamics {
            Dynamics::Model(m) => Some(m),
            Dynamics::BlackBox(_) => None,
        }
    }
}

/// A policy spawns a per-trajectory actor. Stateful planners (receding-horizon
/// control) keep their warm-start state inside the actor, so each rollout
/// starts fresh.
pub trait Policy: Send + Sync {
    fn actor(&self) -> Box<dyn Actor + '_>;

    /// Concrete view for exact tabular evaluation, when applicable.
    fn as_tabular(&self) -> Option<&TabularPolicy> {
        None
    }
}

pub trait Actor {
    fn act(&mut self, state: &State, step: usize, rng: &mut RngStream) -> Result<Action>;
}

impl Policy for Arc<dyn Policy> {
    fn actor(&self) -> Box<dyn Actor + '_> {
        self.as_ref().actor()
    }

    fn as_tabular(&self) -> Option<&TabularPolicy> {
        self.as_ref().as_tabular()
    }
}

/// Uniform-random actions over the action space.
#[derive(Clone)]
pub struct UniformPolicy {
    pub space: ActionSpace,
}

impl Policy for UniformPolicy {
    fn actor(&self) -> Box<dyn Actor + '_> {
        Box::new(UniformActor { space: &self.space })
    }
}

struct UniformActor<'a> {
    space: &'a ActionSpace,
}

impl Actor for UniformActor<'_> {
    fn act(&mut self, _state: &State, _step: usize, rng: &mut RngStream) -> Result<Action> {
        Ok(self.space.sample_uniform(rng))
    }
}

/// Deterministic time-indexed tabular policy: one action table per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularPolicy {
    /// `actions[h][s]` is the action index taken in state `s` at step `h`.
    pub actions: Vec<Vec<usize>>,
}

impl TabularPolicy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        TabularPolicy { actions }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn n_states(&self) -> usize {
        self.actions.first().map_or(0, Vec::len)
    }
}

impl Policy for TabularPolicy {
    fn actor(&self) -> Box<dyn Actor + '_> {
        Box::new(TabularActor { policy: self })
    }

    fn as_tabular(&self) -> Option<&TabularPolicy> {
        Some(self)
    }
}

struct TabularActor<'a> {
    policy: &'a TabularPolicy,
}

impl Actor for TabularActor<'_> {
    fn act(&mut self, state: &State, step: usize, _rng: &mut RngStream) -> Result<Action> {
        let s = state.as_index()?;
        let table = self
            .policy
            .actions
            .get(step)
            .ok_or_else(|| Error::invalid(format!("policy has no table for step {step}")))?;
        let a = *table
            .get(s)
            .ok_or_else(|| Error::invalid(format!("state {s} out of range at step {step}")))?;
        Ok(Action::Index(a))
    }
}

/// Deterministic policy from an explicit map `(state, step) -> action`.
pub struct FnPolicy {
    pub f: Arc<dyn Fn(&State, usize) -> Action + Send + Sync>,
}

impl Policy for FnPolicy {
    fn actor(&self) -> Box<dyn Actor + '_> {
        Box::new(FnActor { f: &self.f })
    }
}

struct FnActor<'a> {
    #[allow(clippy::type_complexity)]
    f: &'a Arc<dyn Fn(&State, usize) -> Action + Send + Sync>,
}

impl Actor for FnActor<'_> {
    fn act(&mut self, state: &State, step: usize, _rng: &mut RngStream) -> Result<Action> {
        Ok((self.f)(state, step))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionStep {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    pub next_state: State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TransitionStep>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|t| t.reward).sum()
    }
}

/// A state-action pair drawn from the average occupancy of a policy: a
/// uniform step `h` is drawn first and the policy is rolled exactly to `h`.
#[derive(Debug, Clone)]
pub struct OccupancySample {
    pub state: State,
    pub action: Action,
    pub step: usize,
}

/// Executes one full episode.
pub fn rollout(policy: &dyn Policy, mdp: &Mdp, rng: &mut RngStream) -> Result<Trajectory> {
    let mut actor = policy.actor();
    let mut state = mdp.initial_state.clone();
    let mut steps = Vec::with_capacity(mdp.horizon);
    for h in 0..mdp.horizon {
        let action = actor.act(&state, h, rng)?;
        let reward = mdp.effective_reward(&state, &action);
        let next = mdp.dynamics.sample(&state, &action, rng)?;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { step: h });
        }
        steps.push(TransitionStep {
            state,
            action,
            reward,
            next_state: next.clone(),
        });
        state = next;
    }
    Ok(Trajectory { steps })
}

/// Draws one sample from the average state-action occupancy of `policy`:
/// `h ~ Uniform{0..H-1}`, roll to step `h`, return `(s_h, a_h, h)`.
pub fn d_pi_sample(policy: &dyn Policy, mdp: &Mdp, rng: &mut RngStream) -> Result<OccupancySample> {
    let h = rng.random_range(0..mdp.horizon);
    let mut actor = policy.actor();
    let mut state = mdp.initial_state.clone();
    for t in 0..h {
        let action = actor.act(&state, t, rng)?;
        let next = mdp.dynamics.sample(&state, &action, rng)?;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { step: t });
        }
        state = next;
    }
    let action = actor.act(&state, h, rng)?;
    Ok(OccupancySample {
        state,
        action,
        step: h,
    })
}

/// Monte-Carlo estimate of `J(policy)`: mean episode return and its standard
/// error over `n_rollouts` independent episodes.
pub fn estimate_value(
    policy: &dyn Policy,
    mdp: &Mdp,
    n_rollouts: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if n_rollouts == 0 {
        return Err(Error::invalid("n_rollouts must be at least 1"));
    }
    let mut returns = Vec::with_capacity(n_rollouts);
    for _ in 0..n_rollouts {
        returns.push(rollout(policy, mdp, rng)?.total_reward());
    }
    Ok(mean_and_se(&returns))
}

pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Parallel batch of rollouts with per-episode derived streams; episode `i`
/// is identical regardless of thread count.
pub fn rollout_batch(
    policy: &dyn Policy,
    mdp: &Mdp,
    n: usize,
    seed: StreamSeed,
) -> Result<Vec<Trajectory>> {
    (0..n)
        .into_par_iter()
        .map(|i| rollout(policy, mdp, &mut seed.child(i as u64).rng()))
        .collect()
}

/// Parallel batch of occupancy samples with per-sample derived streams.
pub fn occupancy_batch(
    policy: &dyn Policy,
    mdp: &Mdp,
    n: usize,
    seed: StreamSeed,
) -> Result<Vec<OccupancySample>> {
    (0..n)
        .into_par_iter()
        .map(|i| d_pi_sample(policy, mdp, &mut seed.child(i as u64).rng()))
        .collect()
}

/// Parallel Monte-Carlo value estimate (deterministic in the seed).
pub fn estimate_value_par(
    policy: &dyn Policy,
    mdp: &Mdp,
    n_rollouts: usize,
    seed: StreamSeed,
) -> Result<(f64, f64)> {
    if n_rollouts == 0 {
        return Err(Error::invalid("n_rollouts must be at least 1"));
    }
    let returns: Vec<f64> = rollout_batch(policy, mdp, n_rollouts, seed)?
        .iter()
        .map(Trajectory::total_reward)
        .collect();
    Ok(mean_and_se(&returns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TabularTable;
    use crate::stream::StreamSeed;
    use nalgebra::DMatrix;

    fn const_reward(r: f64) -> RewardFn {
        Arc::new(move |_: &State, _: &Action| r)
    }

    fn two_state_chain(p_stay: f64, horizon: usize) -> Mdp {
        // One action; state 0 stays with prob p_stay, otherwise flips.
        let rows = vec![
            DVector::from_vec(vec![p_stay, 1.0 - p_stay]),
            DVector::from_vec(vec![1.0 - p_stay, p_stay]),
        ];
        let table = TabularTable::new(2, 1, rows).unwrap();
        Mdp::new(
            horizon,
            State::Index(0),
            Arc::new(|s: &State, _: &Action| if s.as_index().unwrap() == 1 { 1.0 } else { 0.0 }),
            Dynamics::Model(TransitionModel::Tabular(table)),
            ActionSpace::Discrete(1),
        )
        .unwrap()
    }

    #[test]
    fn single_state_mdp_repeats_state() {
        let table = TabularTable::new(1, 1, vec![DVector::from_vec(vec![1.0])]).unwrap();
        let mdp = Mdp::new(
            5,
            State::Index(0),
            const_reward(0.5),
            Dynamics::Model(TransitionModel::Tabular(table)),
            ActionSpace::Discrete(1),
        )
        .unwrap();
        let policy = UniformPolicy {
            space: ActionSpace::Discrete(1),
        };
        let traj = rollout(&policy, &mdp, &mut StreamSeed::new(0).rng()).unwrap();
        assert_eq!(traj.steps.len(), 5);
        for step in &traj.steps {
            assert_eq!(step.state, State::Index(0));
            assert_eq!(step.next_state, State::Index(0));
        }
    }

    #[test]
    fn zero_knr_dynamics_stay_at_zero() {
        use crate::features::FeatureMap;
        use crate::models::KnrModel;
        let phi = FeatureMap::custom(3, |s: &State, a: &Action| {
            let s = s.as_vector().unwrap();
            let a = a.as_vector().unwrap();
            DVector::from_vec(vec![s[0], s[1], a[0]]) * 0.5
        });
        let knr = KnrModel::new(DMatrix::zeros(2, 3), 0.0, 1.0).unwrap();
        let mdp = Mdp::new(
            4,
            State::Vector(DVector::zeros(2)),
            const_reward(0.0),
            Dynamics::Model(TransitionModel::Knr { model: knr, phi }),
            ActionSpace::Box {
                low: DVector::from_vec(vec![-1.0]),
                high: DVector::from_vec(vec![1.0]),
            },
        )
        .unwrap();
        let policy = UniformPolicy {
            space: mdp.action_space.clone(),
        };
        let traj = rollout(&policy, &mdp, &mut StreamSeed::new(1).rng()).unwrap();
        for step in &traj.steps {
            assert_eq!(step.next_state.as_vector().unwrap(), &DVector::zeros(2));
        }
    }

    // Oracle: occupancy of the 2-state chain by direct matrix power iteration,
    // written out longhand and independent of the tabular DP module.
    fn chain_state_occupancy(p_stay: f64, horizon: usize) -> Vec<[f64; 2]> {
        let mut dist = [1.0, 0.0];
        let mut per_step = vec![dist];
        for _ in 1..horizon {
            dist = [
                dist[0] * p_stay + dist[1] * (1.0 - p_stay),
                dist[0] * (1.0 - p_stay) + dist[1] * p_stay,
            ];
            per_step.push(dist);
        }
        per_step
    }

    #[test]
    fn chain_rollout_frequencies_match_exact_occupancy() {
        let horizon = 4;
        let p_stay = 0.7;
        let mdp = two_state_chain(p_stay, horizon);
        let policy = UniformPolicy {
            space: ActionSpace::Discrete(1),
        };
        let n = 100_000usize;
        let mut counts = vec![[0usize; 2]; horizon];
        let mut rng = StreamSeed::new(3).rng();
        for _ in 0..n {
            let traj = rollout(&policy, &mdp, &mut rng).unwrap();
            for (h, step) in traj.steps.iter().enumerate() {
                counts[h][step.state.as_index().unwrap()] += 1;
            }
        }
        let exact = chain_state_occupancy(p_stay, horizon);
        for h in 0..horizon {
            for s in 0..2 {
                let freq = counts[h][s] as f64 / n as f64;
                let p = exact[h][s];
                let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
                assert!(
                    (freq - p).abs() <= 3.0 * se + 1e-9,
                    "h={h} s={s} freq={freq} exact={p}"
                );
            }
        }
    }

    #[test]
    fn d_pi_sample_single_step_returns_start() {
        let mdp = two_state_chain(0.5, 1);
        let policy = UniformPolicy {
            space: ActionSpace::Discrete(1),
        };
        for i in 0..20 {
            let s = d_pi_sample(&policy, &mdp, &mut StreamSeed::new(i).rng()).unwrap();
            assert_eq!(s.step, 0);
            assert_eq!(s.state, State::Index(0));
        }
    }

    #[test]
    fn d_pi_sample_uniform_over_steps_on_deterministic_chain() {
        // 3-step deterministic cycle over 3 states; each (s, h) pair has mass 1/3.
        let rows = vec![
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
        ];
        let table = TabularTable::new(3, 1, rows).unwrap();
        let mdp = Mdp::new(
            3,
            State::Index(0),
            const_reward(0.0),
            Dynamics::Model(TransitionModel::Tabular(table)),
            ActionSpace::Discrete(1),
        )
        .unwrap();
        let policy = TabularPolicy::new(vec![vec![0; 3]; 3]);
        let n = 30_000;
        let mut counts = [0usize; 3];
        let mut rng = StreamSeed::new(9).rng();
        for _ in 0..n {
            let s = d_pi_sample(&policy, &mdp, &mut rng).unwrap();
            counts[s.state.as_index().unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "freq {f}");
        }
    }

    #[test]
    fn d_pi_sample_matches_exact_average_occupancy() {
        let horizon = 4;
        let p_stay = 0.65;
        let mdp = two_state_chain(p_stay, horizon);
        let policy = UniformPolicy {
            space: ActionSpace::Discrete(1),
        };
        let exact = chain_state_occupancy(p_stay, horizon);
        let avg = [
            exact.iter().map(|d| d[0]).sum::<f64>() / horizon as f64,
            exact.iter().map(|d| d[1]).sum::<f64>() / horizon as f64,
        ];
        let n = 100_000;
        let mut counts = [0usize; 2];
        let mut rng = StreamSeed::new(11).rng();
        for _ in 0..n {
            let s = d_pi_sample(&policy, &mdp, &mut rng).unwrap();
            counts[s.state.as_index().unwrap()] += 1;
        }
        let tv = 0.5
            * ((counts[0] as f64 / n as f64 - avg[0]).abs()
                + (counts[1] as f64 / n as f64 - avg[1]).abs());
        assert!(tv < 0.01, "tv {tv}");
    }

    #[test]
    fn estimate_value_constant_rewards() {
        let mdp = {
            let mut m = two_state_chain(0.5, 6);
            m.reward = const_reward(1.0);
            m
        };
        let policy = UniformPolicy {
            space: ActionSpace::Discrete(1),
        };
        let (mean, se) = estimate_value(&policy, &mdp, 50, &mut StreamSeed::new(2).rng()).unwrap();
        assert_eq!(mean, 6.0);
        assert_eq!(se, 0.0);

        let mdp0 = {
            let mut m = two_state_chain(0.5, 6);
            m.reward = const_reward(0.0);
            m
        };
        let (mean0, _) = estimate_value(&policy, &mdp0, 20, &mut StreamSeed::new(2).rng()).unwrap();
        assert_eq!(mean0, 0.0);
    }

    #[test]
    fn reward_clamping_applies() {
        let mut mdp = two_state_chain(0.5, 3);
        mdp.reward = const_reward(1.7);
        let policy = UniformPolicy {
            space: ActionSpace::Discrete(1),
        };
        let traj = rollout(&policy, &mdp, &mut StreamSeed::new(4).rng()).unwrap();
        assert!(traj.steps.iter().all(|s| s.reward == 1.0));
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let mdp = two_state_chain(0.42, 8);
        let policy = UniformPolicy {
            space: ActionSpace::Discrete(1),
        };
        let a = rollout(&policy, &mdp, &mut StreamSeed::new(77).rng()).unwrap();
        let b = rollout(&policy, &mdp, &mut StreamSeed::new(77).rng()).unwrap();
        assert_eq!(a, b);
        let batch1 = rollout_batch(&policy, &mdp, 16, StreamSeed::new(5)).unwrap();
        let batch2 = rollout_batch(&policy, &mdp, 16, StreamSeed::new(5)).unwrap();
        assert_eq!(batch1, batch2);
    }
}
