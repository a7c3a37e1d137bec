//! Model Predictive Path Integral control.
//!
//! Receding-horizon sampling controller: perturb the nominal action sequence
//! with `K` Gaussian noise sequences, roll each through the model accumulating
//! cost (negative reward plus the control term `lambda a^T Sigma^-1 eps`),
//! softmin-weight the sequences, and blend the perturbations back into the
//! nominal. The first nominal action is executed and the sequence shifts left
//! with a zero-initialized tail.
//!
//! All `K` costs are computed first; the minimum, the normalizer, and the
//! weights follow in a second phase so the normalizer is well defined.
//! Rollouts propagate the model mean, and the shooting horizon is clipped to
//! the steps remaining in the episode.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdp::{Action, Actor, Policy, RewardFn, RngStream, State};
use crate::models::TransitionModel;

#[derive(Debug, Clone)]
pub struct MppiConfig {
    /// Number of sampled perturbation sequences `K`.
    pub n_samples: usize,
    /// Shooting horizon `T`.
    pub horizon: usize,
    /// Action-noise covariance `Sigma`.
    pub noise_cov: DMatrix<f64>,
    /// Softmin temperature `lambda`.
    pub temperature: f64,
}

impl MppiConfig {
    /// Stock settings: `K = 200`, `T = 30`, `lambda = 0.2`, `Sigma = 0.3 I`.
    pub fn defaults(action_dim: usize) -> Self {
        MppiConfig {
            n_samples: 200,
            horizon: 30,
            noise_cov: DMatrix::identity(action_dim, action_dim) * 0.3,
            temperature: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.horizon == 0 {
            return Err(Error::invalid("MPPI needs K >= 1 and T >= 1"));
        }
        if self.temperature <= 0.0 {
            return Err(Error::invalid("MPPI temperature must be positive"));
        }
        if self.noise_cov.nrows() != self.noise_cov.ncols() {
            return Err(Error::invalid("noise covariance must be square"));
        }
        Ok(())
    }
}

pub struct MppiPlanner {
    cfg: MppiConfig,
    model: TransitionModel,
    reward: RewardFn,
    episode_horizon: usize,
    nominal: Vec<DVector<f64>>,
    noise_chol: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct MppiStepDiag {
    pub weights: Vec<f64>,
    pub weight_sum: f64,
    pub argmin_cost: usize,
    pub effective_horizon: usize,
}

impl MppiPlanner {
    pub fn new(
        cfg: MppiConfig,
        model: TransitionModel,
        reward: RewardFn,
        episode_horizon: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let chol = Cholesky::new(cfg.noise_cov.clone())
            .ok_or_else(|| Error::invalid("noise covariance must be positive definite"))?;
        let sigma_inv = chol.inverse();
        let noise_chol = chol.l();
        let d_a = cfg.noise_cov.nrows();
        let nominal = vec![DVector::zeros(d_a); cfg.horizon];
        Ok(MppiPlanner {
            cfg,
            model,
            reward,
            episode_horizon,
            nominal,
            noise_chol,
            sigma_inv,
        })
    }

    pub fn reset(&mut self) {
        for a in &mut self.nominal {
            a.fill(0.0);
        }
    }

    pub fn nominal(&self) -> &[DVector<f64>] {
        &self.nominal
    }

    pub fn step(&mut self, state: &State, step_index: usize, rng: &mut RngStream) -> Result<DVector<f64>> {
        self.step_diag(state, step_index, rng).map(|(a, _)| a)
    }

    pub fn step_diag(
        &mut self,
        state: &State,
        step_index: usize,
        rng: &mut RngStream,
    ) -> Result<(DVector<f64>, MppiStepDiag)> {
        let k = self.cfg.n_samples;
        let t_eff = self
            .cfg
            .horizon
            .min(self.episode_horizon.saturating_sub(step_index))
            .max(1);
        let d_a = self.noise_chol.nrows();

        // Phase 1: draw all perturbations from the stream in a fixed order;
        // column `ki * t_eff + t` holds the step-`t` noise of sequence `ki`.
        let mut perturbations = DMatrix::<f64>::zeros(d_a, k * t_eff);
        {
            let mut z = DVector::<f64>::zeros(d_a);
            for col in 0..k * t_eff {
                for zi in z.iter_mut() {
                    *zi = <rand_distr::StandardNormal as rand_distr::Distribution<f64>>::sample(
                        &rand_distr::StandardNormal,
                        rng,
                    );
                }
                let mut target = perturbations.column_mut(col);
                target.gemv(1.0, &self.noise_chol, &z, 0.0);
            }
        }

        // Phase 2: roll every perturbed sequence through the model mean.
        // Coarse task granularity: one rollout is too small a unit to
        // schedule individually. State, action, feature and control buffers
        // are reused across steps; the regulator path is allocation-free.
        let knr_parts = match &self.model {
            TransitionModel::Knr { model, phi } => Some((model, phi)),
            _ => None,
        };
        let costs: Vec<f64> = (0..k)
            .into_par_iter()
            .with_min_len(64)
            .map(|ki| {
                let mut state_buf = state.clone();
                let mut next_buf = match &state_buf {
                    State::Vector(v) => DVector::zeros(v.len()),
                    State::Index(_) => DVector::zeros(0),
                };
                let mut phi_buf = knr_parts.map(|(_, phi)| DVector::zeros(phi.dim()));
                let mut cost = 0.0;
                let mut action = Action::Vector(DVector::zeros(d_a));
                let mut control = DVector::zeros(d_a);
                for t in 0..t_eff {
                    let eps = perturbations.column(ki * t_eff + t);
                    let Action::Vector(a) = &mut action else {
                        unreachable!()
                    };
                    a.copy_from(&self.nominal[t]);
                    *a += eps;
                    control.gemv(1.0, &self.sigma_inv, &eps, 0.0);
                    cost += -(self.reward)(&state_buf, &action)
                        + self.cfg.temperature * self.nominal[t].dot(&control);
                    match (knr_parts, &mut phi_buf) {
                        (Some((model, phi)), Some(buf)) => {
                            phi.eval_into(&state_buf, &action, buf)?;
                            if buf.norm() > 1.0 + 1e-9 {
                                return Err(Error::invalid(format!(
                                    "feature norm {} exceeds 1",
                                    buf.norm()
                                )));
                            }
                            next_buf.gemv(1.0, model.weights(), buf, 0.0);
                            let State::Vector(sv) = &mut state_buf else {
                                unreachable!()
                            };
                            sv.copy_from(&next_buf);
                        }
                        _ => {
                            state_buf = self.model.mean_next(&state_buf, &action)?;
                        }
                    }
                    if !state_buf.is_finite() {
                        return Err(Error::NonFiniteSample { sample: ki });
                    }
                }
                if !cost.is_finite() {
                    return Err(Error::NonFiniteSample { sample: ki });
                }
                Ok(cost)
            })
            .collect::<Result<_>>()?;

        // Phase 3: softmin weights against the best cost.
        let beta = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = costs
            .iter()
            .map(|c| (-(c - beta) / self.cfg.temperature).exp())
            .collect();
        let eta: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / eta).collect();
        let argmin_cost = costs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);

        // Phase 4: blend perturbations into the nominal sequence.
        for t in 0..t_eff {
            let mut delta = DVector::zeros(d_a);
            for (ki, w) in weights.iter().enumerate() {
                delta.axpy(*w, &perturbations.column(ki * t_eff + t), 1.0);
            }
            self.nominal[t] += delta;
        }
        let action = self.nominal[0].clone();
        self.nominal.rotate_left(1);
        if let Some(last) = self.nominal.last_mut() {
            last.fill(0.0);
        }
        let weight_sum = weights.iter().sum();
        Ok((
            action,
            MppiStepDiag {
                weights,
                weight_sum,
                argmin_cost,
                effective_horizon: t_eff,
            },
        ))
    }
}

/// Receding-horizon policy backed by an MPPI planner. Each trajectory gets a
/// fresh planner, so the warm-started nominal sequence never leaks across
/// episodes.
pub struct MppiPolicy {
    pub cfg: MppiConfig,
    pub model: TransitionModel,
    pub reward: RewardFn,
    pub episode_horizon: usize,
}

impl MppiPolicy {
    pub fn new(
        cfg: MppiConfig,
        model: TransitionModel,
        reward: RewardFn,
        episode_horizon: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(MppiPolicy {
            cfg,
            model,
            reward,
            episode_horizon,
        })
    }
}

impl Policy for MppiPolicy {
    fn actor(&self) -> Box<dyn Actor + '_> {
        let planner = MppiPlanner::new(
            self.cfg.clone(),
            self.model.clone(),
            self.reward.clone(),
            self.episode_horizon,
        )
        .expect("validated at construction");
        Box::new(MppiActor { planner })
    }
}

struct MppiActor {
    planner: MppiPlanner,
}

impl Actor for MppiActor {
    fn act(&mut self, state: &State, step: usize, rng: &mut RngStream) -> Result<Action> {
        Ok(Action::Vector(self.planner.step(state, step, rng)?))
    }
}
