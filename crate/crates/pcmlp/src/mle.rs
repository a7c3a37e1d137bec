//! Model fitting from policy-cover data.
//!
//! Regulator weights are fit by single-pass projected SGD on the squared
//! prediction loss (one sample per step, iterate averaging, zero start).
//! Finite-candidate models are fit by exact maximum likelihood: the candidate
//! with the largest total log-likelihood wins, ties to the lowest index.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdp::{OccupancySample, RngStream};
use crate::models::{KnrModel, LinearMdpModel, TabularTable, TransitionModel};

/// Feature/next-state pairs for regulator fitting.
#[derive(Debug, Clone, Default)]
pub struct KnrDataset {
    pub samples: Vec<(DVector<f64>, DVector<f64>)>,
}

/// Index triples `(s, a, s')` for tabular-domain fitting.
#[derive(Debug, Clone, Default)]
pub struct IndexedDataset {
    pub samples: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Rescale onto the Frobenius ball of radius `F` (default; the Frobenius
    /// ball is contained in the spectral one, so feasibility is preserved).
    Frobenius,
    /// Clamp singular values at `F`.
    Spectral,
}

#[derive(Debug, Clone)]
pub struct SgdConfig {
    /// Projection radius `F`.
    pub f_budget: f64,
    /// Target-norm bound `B` entering the default step size.
    pub state_bound: f64,
    /// Step size; defaults to `F^2 / ((F + B) sqrt(M))`.
    pub step_size: Option<f64>,
    pub projection: Projection,
}

impl SgdConfig {
    pub fn new(f_budget: f64, state_bound: f64) -> Self {
        SgdConfig {
            f_budget,
            state_bound,
            step_size: None,
            projection: Projection::Frobenius,
        }
    }

    fn effective_step(&self, m: usize) -> f64 {
        self.step_size.unwrap_or_else(|| {
            self.f_budget * self.f_budget
                / ((self.f_budget + self.state_bound) * (m as f64).sqrt())
        })
    }
}

fn project(w: &mut DMatrix<f64>, radius: f64, kind: Projection) {
    match kind {
        Projection::Frobenius => {
            let norm = w.norm();
            if norm > radius {
                *w *= radius / norm;
            }
        }
        Projection::Spectral => {
            let top = w.singular_values().max();
            if top > radius {
                let svd = w.clone().svd(true, true);
                let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
                let clamped = DVector::from_iterator(
                    svd.singular_values.len(),
                    svd.singular_values.iter().map(|s| s.min(radius)),
                );
                *w = &u * DMatrix::from_diagonal(&clamped) * vt;
            }
        }
    }
}

/// Single-pass projected SGD: start at zero, step
/// `W <- Proj(W - eta (W phi_i - s'_i) phi_i^T)` through the samples in
/// stream order, and return the average of the `M` pre-update iterates
/// (the zero start included, the final iterate excluded).
pub fn fit_knr_sgd(data: &KnrDataset, cfg: &SgdConfig, sigma: f64) -> Result<KnrModel> {
    if data.samples.is_empty() {
        return Err(Error::invalid("SGD needs at least one sample"));
    }
    let m = data.samples.len();
    let eta = cfg.effective_step(m);
    if eta <= 0.0 {
        return Err(Error::invalid("step size must be positive"));
    }
    let d = data.samples[0].0.len();
    let d_s = data.samples[0].1.len();
    let mut w = DMatrix::<f64>::zeros(d_s, d);
    let mut sum = DMatrix::<f64>::zeros(d_s, d);
    for (phi, next) in &data.samples {
        if phi.len() != d || next.len() != d_s {
            return Err(Error::Dimension {
                context: "sgd sample",
                expected: d + d_s,
                found: phi.len() + next.len(),
            });
        }
        if phi.norm() > 1.0 + 1e-9 {
            return Err(Error::invalid("feature norm exceeds 1 in dataset"));
        }
        sum += &w;
        let residual = &w * phi - next;
        w -= eta * residual * phi.transpose();
        project(&mut w, cfg.f_budget, cfg.projection);
    }
    let avg = sum / m as f64;
    debug_assert!(avg.norm() <= cfg.f_budget * (1.0 + 1e-9));
    KnrModel::new(avg, sigma, cfg.f_budget)
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub selected: usize,
    pub log_likelihoods: Vec<f64>,
    /// Every candidate assigned zero probability to some observed transition.
    pub degenerate: bool,
}

/// Exact finite-class MLE over explicit tabular candidates.
pub fn fit_finite_tabular_mle(data: &IndexedDataset, candidates: &[TabularTable]) -> Result<MleFit> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate list must be nonempty"));
    }
    let log_likelihoods: Vec<f64> = candidates
        .par_iter()
        .map(|table| {
            let mut total = 0.0;
            for (s, a, sp) in &data.samples {
                let p = table.next_dist(*s, *a)?[*sp];
                total += if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;
    let mut selected = 0;
    for (i, ll) in log_likelihoods.iter().enumerate() {
        if *ll > log_likelihoods[selected] {
            selected = i;
        }
    }
    let degenerate = log_likelihoods.iter().all(|ll| *ll == f64::NEG_INFINITY);
    if degenerate {
        log::warn!("all candidates have zero likelihood; returning the lowest index");
        selected = 0;
    }
    Ok(MleFit {
        selected,
        log_likelihoods,
        degenerate,
    })
}

/// Exact MLE over a linear MDP candidate set; returns the winning index.
pub fn fit_linmdp_exact(data: &IndexedDataset, model: &LinearMdpModel) -> Result<MleFit> {
    fit_finite_tabular_mle(data, model.candidate_tables())
}

#[derive(Debug, Clone, Copy)]
pub struct ModelErrorEstimate {
    /// Mean per-sample discrepancy: `||W_hat phi - W* phi||_2` for regulators,
    /// `||P_hat - P*||_1` for tabular-domain models.
    pub mean: f64,
    /// Mean squared discrepancy (the statistic entering bonus-scale schedules).
    pub mean_sq: f64,
}

/// Monte-Carlo estimate of the model's generalization error against the truth
/// under the given occupancy sampler.
pub fn measure_model_error(
    model: &TransitionModel,
    truth: &TransitionModel,
    mut sampler: impl FnMut(&mut RngStream) -> Result<OccupancySample>,
    n: usize,
    rng: &mut RngStream,
) -> Result<ModelErrorEstimate> {
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut acc = 0.0;
    let mut acc_sq = 0.0;
    for _ in 0..n {
        let sample = sampler(rng)?;
        let e = match (model, truth) {
            (
                TransitionModel::Knr { model: m, phi },
                TransitionModel::Knr { model: t, phi: _ },
            ) => {
                let f = phi.eval(&sample.state, &sample.action)?;
                (m.predict(&f)? - t.predict(&f)?).norm()
            }
            (a, b) => match (a.tabular(), b.tabular()) {
                (Some(pa), Some(pb)) => pa.l1_distance(
                    pb,
                    sample.state.as_index()?,
                    sample.action.as_index()?,
                )?,
                _ => return Err(Error::FamilyMismatch("model error needs matching families")),
            },
        };
        acc += e;
        acc_sq += e * e;
    }
    Ok(ModelErrorEstimate {
        mean: acc / n as f64,
        mean_sq: acc_sq / n as f64,
    })
}
