//! The policy-cover model-learning-and-planning loop.
//!
//! Each iteration: estimate the newest policy's feature covariance from its
//! occupancy, aggregate the cover's covariances into the regularized matrix
//! behind the elliptical bonus, fit the transition model by MLE on mixture
//! samples from the whole cover, and hand `r + bonus` to the planning oracle
//! inside the fitted model. The planned policy joins the cover and the loop
//! repeats. Per-policy covariances are estimated once, at the iteration the
//! policy was produced, and never re-estimated.

use std::sync::Arc;

use nalgebra::DVector;

use crate::cover::{
    estimate_policy_cov, information_gain, mixture_batch, mixture_sample, BonusForm, BonusSpec,
    PolicyCover,
};
use crate::envs::{coverage_metric, CatalogEnv};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{
    rollout_batch, Action, Mdp, Policy, State, TabularPolicy, Trajectory, UniformPolicy,
};
use crate::mle::{
    fit_knr_sgd, fit_linmdp_exact, measure_model_error, IndexedDataset, KnrDataset, Projection,
    SgdConfig,
};
use crate::models::{state_norm_bound, Dynamics, LinearMdpModel, TransitionModel};
use crate::planners::{tabular_plan, exhaustive_search, MppiPolicy, PlannerChoice};
use crate::stream::StreamSeed;
use crate::tabular::exact_value_tabular;

/// The transition-model class handed to the MLE step.
#[derive(Clone)]
pub enum ModelClass {
    Knr {
        phi: FeatureMap,
        sigma: f64,
        f_budget: f64,
        sgd: SgdSettings,
    },
    LinMdp {
        model: LinearMdpModel,
    },
}

#[derive(Debug, Clone)]
pub struct SgdSettings {
    pub step_size: Option<f64>,
    pub projection: Projection,
    /// Target-norm bound `B`; defaults to the high-probability state bound.
    pub state_bound: Option<f64>,
}

impl Default for SgdSettings {
    fn default() -> Self {
        SgdSettings {
            step_size: None,
            projection: Projection::Frobenius,
            state_bound: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Knr,
    LinMdp,
}

/// How the bonus scale `c` is chosen each iteration.
#[derive(Debug, Clone, Copy)]
pub enum BonusSchedule {
    Explicit(f64),
    /// `c = (H / sigma) sqrt(4 lambda F^2 + N eps_stat)` with the measured
    /// per-iteration model error as `eps_stat`.
    TheoreticalKnr,
    /// `c = H sqrt(lambda d + N eps_stat)`.
    TheoreticalLinMdp,
}

#[derive(Debug, Clone, Copy)]
pub struct BonusConfig {
    pub schedule: BonusSchedule,
    /// Ablation coefficient multiplying the scheduled scale.
    pub coeff: f64,
    pub form: BonusForm,
}

impl Default for BonusConfig {
    fn default() -> Self {
        BonusConfig {
            schedule: BonusSchedule::Explicit(1.0),
            coeff: 1.0,
            form: BonusForm::MainText,
        }
    }
}

#[derive(Clone)]
pub struct PcmlpConfig {
    /// Number of outer iterations `N`.
    pub iterations: usize,
    /// Covariance samples per policy `K`.
    pub cov_samples: usize,
    /// MLE samples per iteration `M`.
    pub mle_samples: usize,
    /// Covariance regularization `lambda`.
    pub lambda: f64,
    pub bonus: BonusConfig,
    pub planner: PlannerChoice,
    /// Zero out the environment reward; the planner sees the bonus alone.
    pub reward_free: bool,
    /// Monte-Carlo episodes for the true-value estimate per iteration.
    pub eval_rollouts: usize,
    /// Model rollouts behind the planner-value estimate (sampling planners).
    pub plan_eval_rollouts: usize,
    /// Fixed probe set size for bonus diagnostics.
    pub probe_count: usize,
    /// Samples for the measured model error (when the truth is known).
    pub model_error_samples: usize,
    pub seed: u64,
}

impl PcmlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0
            || self.cov_samples == 0
            || self.mle_samples == 0
            || self.eval_rollouts == 0
            || self.probe_count == 0
        {
            return Err(Error::invalid("all counts must be at least 1"));
        }
        if self.lambda <= 0.0 {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.bonus.coeff < 0.0 {
            return Err(Error::invalid("bonus coefficient must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Measured generalization error of the fitted model against the truth
    /// under the cover mixture (squared statistic for schedules).
    pub model_error: Option<f64>,
    pub bonus_min: f64,
    pub bonus_mean: f64,
    pub bonus_max: f64,
    /// Planner value of the new policy under the fitted model and `r + b`.
    pub plan_value_model: f64,
    pub value_true_mean: f64,
    pub value_true_se: f64,
    /// Average bonus per executed timestep of the evaluation episodes.
    pub avg_bonus_per_step: f64,
    pub info_gain: f64,
    pub coverage: Option<f64>,
    pub feasible: Option<bool>,
}

pub struct PcmlpRun {
    pub cover: PolicyCover,
    pub final_policy: Arc<dyn Policy>,
    pub records: Vec<IterationRecord>,
    /// Bonus value per probe per iteration; monotone non-increasing columns.
    pub probe_bonuses: Vec<Vec<f64>>,
    /// Index into `policies()` of the best policy by Monte-Carlo evaluation.
    pub best_index: usize,
    /// First iteration whose evaluation episodes reached the environment
    /// goal, when the environment declares one.
    pub goal_reached_at: Option<usize>,
}

impl PcmlpRun {
    /// All `N + 1` policies: the cover's plus the final planned one.
    pub fn policies(&self) -> Vec<Arc<dyn Policy>> {
        let mut all: Vec<Arc<dyn Policy>> = self.cover.policies().to_vec();
        all.push(self.final_policy.clone());
        all
    }
}

pub fn run_pcmlp(cfg: &PcmlpConfig, env: &CatalogEnv, model_class: &ModelClass) -> Result<PcmlpRun> {
    cfg.validate()?;
    let seed = StreamSeed::new(cfg.seed);
    let phi = model_phi(model_class);
    let horizon = env.mdp.horizon;
    let cap = horizon as f64;

    // Fixed probe set drawn once from a uniform-random policy.
    let uniform: Arc<dyn Policy> = Arc::new(UniformPolicy {
        space: env.mdp.action_space.clone(),
    });
    let probes: Vec<DVector<f64>> = {
        let samples = crate::mdp::occupancy_batch(
            uniform.as_ref(),
            &env.mdp,
            cfg.probe_count,
            seed.labeled("probe"),
        )?;
        samples
            .iter()
            .map(|s| phi.eval(&s.state, &s.action))
            .collect::<Result<_>>()?
    };

    let env_reward = env.mdp.reward.clone();
    let reward_free = cfg.reward_free;

    let mut cover = PolicyCover::new();
    let mut pending: Arc<dyn Policy> = uniform;
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut probe_bonuses: Vec<Vec<f64>> = Vec::with_capacity(cfg.iterations);
    let mut eval_trajectories: Vec<Trajectory> = Vec::new();
    let mut goal_reached_at: Option<usize> = None;

    for n in 1..=cfg.iterations {
        let it = seed.labeled("iter").child(n as u64);

        // Newest policy's covariance joins the cover.
        let cov = estimate_policy_cov(
            pending.as_ref(),
            &env.mdp,
            &phi,
            cfg.cov_samples,
            it.labeled("cov"),
        )?;
        cover.push(pending.clone(), cov)?;
        let sigma_hat = cover.aggregate(cfg.lambda, phi.dim())?;

        // MLE on mixture samples from the whole cover.
        let fitted = fit_model(cfg, model_class, &cover, &env.mdp, it.labeled("mle"))
            .map_err(|e| Error::invalid(format!("iteration {n}: model fit failed: {e}")))?;

        // Measured generalization error against the truth, when available.
        let model_error = match &env.truth {
            Some(truth) => {
                let policies = cover.policies().to_vec();
                let mdp = &env.mdp;
                let err = measure_model_error(
                    &fitted,
                    truth,
                    |rng| mixture_sample(&policies, mdp, rng),
                    cfg.model_error_samples.max(1),
                    &mut it.labeled("err").rng(),
                )?;
                Some(err)
            }
            None => None,
        };

        // Bonus scale for this iteration.
        let base_c = match cfg.bonus.schedule {
            BonusSchedule::Explicit(c) => c,
            BonusSchedule::TheoreticalKnr | BonusSchedule::TheoreticalLinMdp => {
                let eps_stat = model_error
                    .ok_or_else(|| {
                        Error::invalid("theoretical bonus schedules need a known-truth env")
                    })?
                    .mean_sq;
                let params = schedule_params(cfg, env, model_class, eps_stat)?;
                let family = match cfg.bonus.schedule {
                    BonusSchedule::TheoreticalKnr => Family::Knr,
                    _ => Family::LinMdp,
                };
                schedule_c(family, &params)
            }
        };
        let c_eff = cfg.bonus.coeff * base_c;
        let bonus = Arc::new(BonusSpec::new(
            sigma_hat,
            c_eff,
            cap,
            cfg.lambda,
            cfg.bonus.form,
        )?);

        // Planner reward: environment reward (unless reward-free) plus bonus.
        // Feature evaluation reuses a thread-local buffer; this closure sits
        // on the planner's innermost loop.
        let planner_reward: crate::mdp::RewardFn = {
            let bonus = bonus.clone();
            let phi = phi.clone();
            let env_reward = env_reward.clone();
            let dim = phi.dim();
            Arc::new(move |s: &State, a: &Action| {
                thread_local! {
                    static PHI_BUF: std::cell::RefCell<DVector<f64>> =
                        std::cell::RefCell::new(DVector::zeros(0));
                }
                let base = if reward_free { 0.0 } else { env_reward(s, a) };
                let b = PHI_BUF.with(|buf| {
                    let mut buf = buf.borrow_mut();
                    if buf.len() != dim {
                        *buf = DVector::zeros(dim);
                    }
                    phi.eval_into(s, a, &mut buf)
                        .expect("feature map matches environment");
                    bonus.bonus(&buf).expect("bonus evaluates on env features")
                });
                base + b
            })
        };

        // Plan inside the fitted model.
        let (next_policy, plan_value_model): (Arc<dyn Policy>, f64) = match &cfg.planner {
            PlannerChoice::Mppi(mppi_cfg) => {
                let policy = Arc::new(MppiPolicy::new(
                    mppi_cfg.clone(),
                    fitted.clone(),
                    planner_reward.clone(),
                    horizon,
                )?);
                let mut model_mdp = Mdp::new(
                    horizon,
                    env.mdp.initial_state.clone(),
                    planner_reward.clone(),
                    Dynamics::Model(fitted.clone()),
                    env.mdp.action_space.clone(),
                )?;
                model_mdp.clamp_reward = false;
                let (value, _) = crate::mdp::estimate_value_par(
                    policy.as_ref(),
                    &model_mdp,
                    cfg.plan_eval_rollouts.max(1),
                    it.labeled("plan_eval"),
                )?;
                (policy, value)
            }
            PlannerChoice::TabularDp => {
                let plan = plan_tabular(&fitted, &planner_reward, horizon, &env.mdp)?;
                (Arc::new(plan.0) as Arc<dyn Policy>, plan.1)
            }
            PlannerChoice::Exhaustive { node_budget } => {
                let table = fitted
                    .tabular()
                    .ok_or(Error::UnsupportedModel("exhaustive planning needs a tabular model"))?;
                let reward_idx = index_reward(&planner_reward);
                let plan = exhaustive_search(
                    table,
                    &reward_idx,
                    horizon,
                    env.mdp.initial_state.as_index()?,
                    *node_budget,
                )?;
                (Arc::new(plan.policy) as Arc<dyn Policy>, plan.value)
            }
        };

        // Evaluate the new policy on the real environment.
        let trajs = rollout_batch(
            next_policy.as_ref(),
            &env.mdp,
            cfg.eval_rollouts,
            it.labeled("eval"),
        )?;
        let returns: Vec<f64> = trajs.iter().map(Trajectory::total_reward).collect();
        let (value_true_mean, value_true_se) = crate::mdp::mean_and_se(&returns);
        let mut bonus_acc = 0.0;
        let mut steps = 0usize;
        for t in &trajs {
            for step in &t.steps {
                let f = phi.eval(&step.state, &step.action)?;
                bonus_acc += bonus.bonus(&f)?;
                steps += 1;
            }
        }
        let avg_bonus_per_step = bonus_acc / steps.max(1) as f64;

        if goal_reached_at.is_none() {
            if let Some(goal) = &env.goal {
                if trajs.iter().any(|t| goal.reached_in(t)) {
                    goal_reached_at = Some(n);
                }
            }
        }
        let coverage = match &env.grid {
            Some(grid) => {
                eval_trajectories.extend(trajs);
                Some(coverage_metric(&eval_trajectories, grid)?)
            }
            None => None,
        };

        // Probe diagnostics.
        let probe_vals: Vec<f64> = probes
            .iter()
            .map(|p| bonus.bonus(p))
            .collect::<Result<_>>()?;
        if c_eff == 0.0 {
            debug_assert!(probe_vals.iter().all(|b| *b == 0.0));
        }
        let bonus_min = probe_vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let bonus_max = probe_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let bonus_mean = probe_vals.iter().sum::<f64>() / probe_vals.len() as f64;
        probe_bonuses.push(probe_vals);

        let info_gain = information_gain(cover.covariances(), cfg.lambda)?;

        let record = IterationRecord {
            iteration: n,
            model_error: model_error.map(|e| match model_class {
                ModelClass::Knr { .. } => e.mean,
                ModelClass::LinMdp { .. } => e.mean_sq,
            }),
            bonus_min,
            bonus_mean,
            bonus_max,
            plan_value_model,
            value_true_mean,
            value_true_se,
            avg_bonus_per_step,
            info_gain,
            coverage,
            feasible: None,
        };
        ensure_finite(&record)?;
        records.push(record);
        pending = next_policy;
    }

    let best_index = records
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value_true_mean.partial_cmp(&b.1.value_true_mean).unwrap())
        .map(|(i, _)| i + 1)
        .unwrap_or(0);

    Ok(PcmlpRun {
        cover,
        final_policy: pending,
        records,
        probe_bonuses,
        best_index,
        goal_reached_at,
    })
}

fn model_phi(model_class: &ModelClass) -> FeatureMap {
    match model_class {
        ModelClass::Knr { phi, .. } => phi.clone(),
        ModelClass::LinMdp { model } => model.phi().clone(),
    }
}

fn fit_model(
    cfg: &PcmlpConfig,
    model_class: &ModelClass,
    cover: &PolicyCover,
    mdp: &Mdp,
    seed: StreamSeed,
) -> Result<TransitionModel> {
    let samples = mixture_batch(cover.policies(), mdp, cfg.mle_samples, seed.labeled("draw"))?;
    match model_class {
        ModelClass::Knr {
            phi,
            sigma,
            f_budget,
            sgd,
        } => {
            // Complete each occupancy sample with a next state from the env.
            let mut rng = seed.labeled("next").rng();
            let mut data = KnrDataset::default();
            let mut d_s = 0;
            for s in &samples {
                let next = mdp.dynamics.sample(&s.state, &s.action, &mut rng)?;
                let nv = next.as_vector()?.clone();
                d_s = nv.len();
                data.samples.push((phi.eval(&s.state, &s.action)?, nv));
            }
            let b = match sgd.state_bound {
                Some(b) => b,
                None => state_norm_bound(*f_budget, *sigma, d_s.max(1), data.samples.len(), 0.01)?,
            };
            let mut sgd_cfg = SgdConfig::new(*f_budget, b);
            sgd_cfg.step_size = sgd.step_size;
            sgd_cfg.projection = sgd.projection;
            let model = fit_knr_sgd(&data, &sgd_cfg, *sigma)?;
            Ok(TransitionModel::Knr {
                model,
                phi: phi.clone(),
            })
        }
        ModelClass::LinMdp { model } => {
            let mut rng = seed.labeled("next").rng();
            let mut data = IndexedDataset::default();
            for s in &samples {
                let next = mdp.dynamics.sample(&s.state, &s.action, &mut rng)?;
                data.samples
                    .push((s.state.as_index()?, s.action.as_index()?, next.as_index()?));
            }
            let fit = fit_linmdp_exact(&data, model)?;
            Ok(TransitionModel::LinearMdp(model.with_selected(fit.selected)?))
        }
    }
}

fn index_reward(
    reward: &Arc<dyn Fn(&State, &Action) -> f64 + Send + Sync>,
) -> impl Fn(usize, usize) -> f64 + '_ {
    move |s, a| reward(&State::Index(s), &Action::Index(a))
}

fn plan_tabular(
    fitted: &TransitionModel,
    reward: &Arc<dyn Fn(&State, &Action) -> f64 + Send + Sync>,
    horizon: usize,
    mdp: &Mdp,
) -> Result<(TabularPolicy, f64)> {
    let table = fitted
        .tabular()
        .ok_or(Error::UnsupportedModel("tabular planning needs a tabular model"))?;
    let reward_idx = index_reward(reward);
    let plan = tabular_plan(table, &reward_idx, horizon, mdp.initial_state.as_index()?)?;
    Ok((plan.policy, plan.value))
}

fn ensure_finite(r: &IterationRecord) -> Result<()> {
    let vals = [
        r.bonus_min,
        r.bonus_mean,
        r.bonus_max,
        r.plan_value_model,
        r.value_true_mean,
        r.value_true_se,
        r.avg_bonus_per_step,
        r.info_gain,
    ];
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite record at iteration {}",
            r.iteration
        )));
    }
    Ok(())
}

/// Inputs to the bonus-scale schedules.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleParams {
    pub horizon: usize,
    pub feat_dim: usize,
    pub state_dim: usize,
    pub f_budget: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub eps_stat: f64,
}

/// The family-appropriate bonus scale:
/// regulators `c = (H / sigma) sqrt(4 lambda F^2 + N eps_stat)`,
/// linear MDPs `c = H sqrt(lambda d + N eps_stat)`.
pub fn schedule_c(family: Family, p: &ScheduleParams) -> f64 {
    let h = p.horizon as f64;
    let n_eps = p.iterations as f64 * p.eps_stat;
    match family {
        Family::Knr => (h / p.sigma) * (4.0 * p.lambda * p.f_budget * p.f_budget + n_eps).sqrt(),
        Family::LinMdp => h * (p.lambda * p.feat_dim as f64 + n_eps).sqrt(),
    }
}

fn schedule_params(
    cfg: &PcmlpConfig,
    env: &CatalogEnv,
    model_class: &ModelClass,
    eps_stat: f64,
) -> Result<ScheduleParams> {
    let (sigma, f_budget) = match model_class {
        ModelClass::Knr { sigma, f_budget, .. } => (*sigma, *f_budget),
        ModelClass::LinMdp { .. } => (1.0, 1.0),
    };
    let state_dim = match &env.mdp.initial_state {
        State::Vector(v) => v.len(),
        State::Index(_) => 1,
    };
    Ok(ScheduleParams {
        horizon: env.mdp.horizon,
        feat_dim: model_phi(model_class).dim(),
        state_dim,
        f_budget,
        sigma,
        lambda: cfg.lambda,
        iterations: cfg.iterations,
        eps_stat,
    })
}

/// The full conservative hyperparameter preset for linear MDPs (exposed for
/// fidelity; the constants are astronomically large at any practical size).
#[derive(Debug, Clone, Copy)]
pub struct TheoreticalPreset {
    pub iterations: f64,
    pub mle_samples: f64,
    pub cov_samples: f64,
    pub bonus_c: f64,
}

pub fn theoretical_preset_linmdp(
    eps: f64,
    delta: f64,
    horizon: usize,
    d: usize,
    n_candidates: usize,
) -> TheoreticalPreset {
    let h = horizon as f64;
    let d = d as f64;
    let base = 80.0 * h.powi(6) * d * d / (eps * eps);
    let n = base * (base / 2.0).ln();
    let m = 2.0 * n * ((n_candidates as f64) * n / delta).ln();
    let k = 32.0 * n * n * (8.0 * n * d / delta).ln();
    TheoreticalPreset {
        iterations: n,
        mle_samples: m,
        cov_samples: k,
        bonus_c: h * (d + 1.0).sqrt(),
    }
}

pub fn theoretical_preset_knr(
    eps: f64,
    delta: f64,
    horizon: usize,
    d: usize,
    d_s: usize,
    f_budget: f64,
    sigma: f64,
) -> TheoreticalPreset {
    let h = horizon as f64;
    let d = d as f64;
    let ds = d_s as f64;
    let f2 = f_budget * f_budget;
    let base = h.powi(6) * f2 * ds * d / (sigma * sigma * eps * eps);
    let n = 12800.0 * base * (6400.0 * base).ln();
    let lead = (8.0 * f2 * f2 + 9.0 * sigma * sigma * f2 * ds * (2.0 * ds * n / delta).ln())
        * (n / delta).ln().powi(2)
        * n
        * n;
    let tail = 18.0 * sigma * sigma * f2 * ds;
    let m = lead + tail * (lead + tail).ln();
    let k = 32.0 * n * n * (8.0 * n * d / delta).ln();
    TheoreticalPreset {
        iterations: n,
        mle_samples: m,
        cov_samples: k,
        bonus_c: 8.0 * h * f_budget * ds.sqrt() / sigma,
    }
}

#[derive(Debug, Clone)]
pub struct RegretSummary {
    pub cumulative_regret: Vec<f64>,
    pub cumulative_bonus: Vec<f64>,
}

/// Side-by-side cumulative empirical regret and cumulative per-step bonus
/// series (the latter approximates the expected bonus under each new
/// policy's occupancy).
pub fn regret_diagnostic(records: &[IterationRecord], j_star: f64) -> RegretSummary {
    let mut regret = 0.0;
    let mut bonus = 0.0;
    let mut cumulative_regret = Vec::with_capacity(records.len());
    let mut cumulative_bonus = Vec::with_capacity(records.len());
    for r in records {
        regret += j_star - r.value_true_mean;
        bonus += r.avg_bonus_per_step;
        cumulative_regret.push(regret);
        cumulative_bonus.push(bonus);
    }
    RegretSummary {
        cumulative_regret,
        cumulative_bonus,
    }
}

/// Exact optimal value of a tabular environment (the planner-oracle target).
pub fn tabular_optimal_value(env: &CatalogEnv) -> Result<f64> {
    let truth = env
        .truth
        .as_ref()
        .and_then(TransitionModel::tabular)
        .ok_or(Error::UnsupportedModel("need a tabular truth"))?;
    let reward = env.mdp.reward.clone();
    let reward_idx = move |s: usize, a: usize| reward(&State::Index(s), &Action::Index(a));
    let plan = tabular_plan(
        truth,
        &reward_idx,
        env.mdp.horizon,
        env.mdp.initial_state.as_index()?,
    )?;
    Ok(plan.value)
}

/// Exact value of a planned tabular policy under the true tabular dynamics.
pub fn tabular_policy_value(env: &CatalogEnv, policy: &TabularPolicy) -> Result<f64> {
    exact_value_tabular(policy, &env.mdp)
}
