//! Policy-cover bookkeeping and elliptical exploration bonuses.
//!
//! The cover is the ordered list of policies learned so far, each paired with
//! an empirical feature covariance estimated from its occupancy. Their
//! regularized sum defines a quadratic form whose inverse prices novelty:
//! `b(s,a) = min(2c sqrt(phi^T Sigma^-1 phi), H)`. The aggregate only grows,
//! so the bonus at any fixed probe can only shrink as the cover expands.
//!
//! Diagnostics mirror the supporting inequalities (empirical-vs-exact bonus
//! sandwich, log-det information gain, trace telescoping) so runs can verify
//! them numerically.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{d_pi_sample, Mdp, OccupancySample, Policy, RngStream};
use crate::stream::StreamSeed;

/// Ordered policies with their per-policy empirical feature covariances.
#[derive(Default)]
pub struct PolicyCover {
    policies: Vec<Arc<dyn Policy>>,
    covs: Vec<DMatrix<f64>>,
}

impl PolicyCover {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn policies(&self) -> &[Arc<dyn Policy>] {
        &self.policies
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covs
    }

    pub fn push(&mut self, policy: Arc<dyn Policy>, cov: DMatrix<f64>) -> Result<()> {
        validate_policy_cov(&cov)?;
        if let Some(first) = self.covs.first() {
            if first.nrows() != cov.nrows() {
                return Err(Error::Dimension {
                    context: "cover covariance",
                    expected: first.nrows(),
                    found: cov.nrows(),
                });
            }
        }
        self.policies.push(policy);
        self.covs.push(cov);
        Ok(())
    }

    /// Regularized aggregate `sum_i Sigma_i + lambda I`.
    pub fn aggregate(&self, lambda: f64, dim: usize) -> Result<DMatrix<f64>> {
        aggregate(&self.covs, lambda, dim)
    }

    /// One draw from the cover mixture: uniform policy index, then an
    /// occupancy sample from that policy. A singleton cover consumes no
    /// index randomness, so it draws exactly like the policy itself.
    pub fn mixture_sample(&self, mdp: &Mdp, rng: &mut RngStream) -> Result<OccupancySample> {
        mixture_sample(&self.policies, mdp, rng)
    }
}

fn validate_policy_cov(cov: &DMatrix<f64>) -> Result<()> {
    if cov.nrows() != cov.ncols() {
        return Err(Error::invalid("covariance must be square"));
    }
    let asym = (cov - cov.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(Error::invalid(format!("covariance asymmetry {asym}")));
    }
    let trace = cov.trace();
    if trace > 1.0 + 1e-9 {
        return Err(Error::invalid(format!(
            "covariance trace {trace} exceeds 1 (features must be unit-ball)"
        )));
    }
    let min_eig = DMatrix::symmetric_eigen(cov.clone()).eigenvalues.min();
    if min_eig < -1e-10 {
        return Err(Error::invalid(format!("covariance not PSD ({min_eig})")));
    }
    Ok(())
}

pub fn mixture_sample(
    policies: &[Arc<dyn Policy>],
    mdp: &Mdp,
    rng: &mut RngStream,
) -> Result<OccupancySample> {
    use rand::Rng as _;
    if policies.is_empty() {
        return Err(Error::EmptyCover);
    }
    let idx = if policies.len() == 1 {
        0
    } else {
        rng.random_range(0..policies.len())
    };
    d_pi_sample(policies[idx].as_ref(), mdp, rng)
}

/// Parallel batch of mixture samples with per-sample derived streams.
pub fn mixture_batch(
    policies: &[Arc<dyn Policy>],
    mdp: &Mdp,
    n: usize,
    seed: StreamSeed,
) -> Result<Vec<OccupancySample>> {
    if policies.is_empty() {
        return Err(Error::EmptyCover);
    }
    (0..n)
        .into_par_iter()
        .map(|i| mixture_sample(policies, mdp, &mut seed.child(i as u64).rng()))
        .collect()
}

/// Empirical feature covariance of one policy: the average of `k` outer
/// products at occupancy samples, symmetrized against round-off.
pub fn estimate_policy_cov(
    policy: &dyn Policy,
    mdp: &Mdp,
    phi: &FeatureMap,
    k: usize,
    seed: StreamSeed,
) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::invalid("need at least one covariance sample"));
    }
    let features: Vec<DVector<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let s = d_pi_sample(policy, mdp, &mut seed.child(i as u64).rng())?;
            phi.eval(&s.state, &s.action)
        })
        .collect::<Result<_>>()?;
    let d = phi.dim();
    let mut cov = DMatrix::zeros(d, d);
    for f in &features {
        cov.syger(1.0 / k as f64, f, f, 1.0);
    }
    // syger fills the lower triangle; mirror it.
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok(cov)
}

/// `sum_i Sigma_i + lambda I` over an explicit covariance list.
pub fn aggregate(covs: &[DMatrix<f64>], lambda: f64, dim: usize) -> Result<DMatrix<f64>> {
    if lambda <= 0.0 {
        return Err(Error::invalid("lambda must be positive"));
    }
    let mut total = DMatrix::identity(dim, dim) * lambda;
    for c in covs {
        if c.nrows() != dim {
            return Err(Error::Dimension {
                context: "aggregate covariance",
                expected: dim,
                found: c.nrows(),
            });
        }
        total += c;
    }
    Ok(total)
}

/// Which clamping arrangement the bonus uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BonusForm {
    /// `min(2c sqrt(q), H)` — the form the algorithm optimizes.
    #[default]
    MainText,
    /// `2 min(c sqrt(q/2), H)` — clamp applied inside the doubling; differs
    /// from the main form only when the cap binds.
    ClampedHalf,
}

/// Immutable bonus evaluator: the regularized aggregate covariance with a
/// cached Cholesky factorization, the scale `c`, and the cap.
pub struct BonusSpec {
    c: f64,
    cap: f64,
    lambda: f64,
    sigma_hat: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// Lower-triangular factor rows, flattened for the allocation-free
    /// forward substitution on the planner's hot path.
    l_rows: Vec<f64>,
    form: BonusForm,
}

const QUADFORM_STACK_DIM: usize = 64;

impl BonusSpec {
    pub fn new(
        sigma_hat: DMatrix<f64>,
        c: f64,
        cap: f64,
        lambda: f64,
        form: BonusForm,
    ) -> Result<Self> {
        if c < 0.0 || cap <= 0.0 || lambda <= 0.0 {
            return Err(Error::invalid("bonus parameters must be positive (c >= 0)"));
        }
        let chol = Cholesky::new(sigma_hat.clone()).ok_or_else(|| {
            let diag = sigma_hat.diagonal();
            Error::Numeric(format!(
                "covariance factorization failed (diag condition ~ {:.3e})",
                diag.max() / diag.min().max(f64::MIN_POSITIVE)
            ))
        })?;
        let l = chol.l();
        let d = l.nrows();
        let mut l_rows = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                l_rows[i * d + j] = l[(i, j)];
            }
        }
        Ok(BonusSpec {
            c,
            cap,
            lambda,
            sigma_hat,
            chol,
            l_rows,
            form,
        })
    }

    pub fn scale(&self) -> f64 {
        self.c
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn form(&self) -> BonusForm {
        self.form
    }

    pub fn sigma_hat(&self) -> &DMatrix<f64> {
        &self.sigma_hat
    }

    /// `phi^T Sigma^-1 phi` through the cached factorization: with
    /// `Sigma = L L^T`, the form equals `||L^-1 phi||^2` by one forward
    /// substitution (stack-buffered in low dimensions).
    pub fn quad_form(&self, phi: &DVector<f64>) -> Result<f64> {
        let d = self.sigma_hat.nrows();
        if phi.len() != d {
            return Err(Error::Dimension {
                context: "bonus feature",
                expected: d,
                found: phi.len(),
            });
        }
        if d <= QUADFORM_STACK_DIM {
            let mut y = [0.0f64; QUADFORM_STACK_DIM];
            let mut q = 0.0;
            for i in 0..d {
                let row = &self.l_rows[i * d..i * d + i];
                let mut acc = phi[i];
                for (j, l_ij) in row.iter().enumerate() {
                    acc -= l_ij * y[j];
                }
                let v = acc / self.l_rows[i * d + i];
                y[i] = v;
                q += v * v;
            }
            Ok(q)
        } else {
            Ok(phi.dot(&self.chol.solve(phi)).max(0.0))
        }
    }

    pub fn bonus(&self, phi: &DVector<f64>) -> Result<f64> {
        let q = self.quad_form(phi)?;
        Ok(match self.form {
            BonusForm::MainText => (2.0 * self.c * q.sqrt()).min(self.cap),
            BonusForm::ClampedHalf => 2.0 * (self.c * (q / 2.0).sqrt()).min(self.cap),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SandwichStats {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Whether every probe ratio lay in `[1, 4]`.
    pub within_bounds: bool,
    pub form: BonusForm,
}

/// Compares the empirical bonus (scale `2c`, empirical covariances) against
/// the exact-covariance bonus at scale `c`, probe by probe.
pub fn bonus_sandwich_check(
    true_covs: &[DMatrix<f64>],
    empirical_covs: &[DMatrix<f64>],
    probes: &[DVector<f64>],
    c: f64,
    lambda: f64,
    cap: f64,
) -> Result<SandwichStats> {
    if true_covs.len() != empirical_covs.len() {
        return Err(Error::invalid("covariance lists must pair up"));
    }
    if probes.is_empty() {
        return Err(Error::invalid("need at least one probe"));
    }
    let dim = probes[0].len();
    let empirical = BonusSpec::new(
        aggregate(empirical_covs, lambda, dim)?,
        c,
        cap,
        lambda,
        BonusForm::MainText,
    )?;
    let exact = aggregate(true_covs, lambda, dim)?;
    let exact_chol = Cholesky::new(exact)
        .ok_or_else(|| Error::Numeric("exact covariance not positive definite".into()))?;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    for p in probes {
        let b_hat = empirical.bonus(p)?;
        let q = p.dot(&exact_chol.solve(p)).max(0.0);
        let b = (c * q.sqrt()).min(cap);
        let ratio = if b == 0.0 && b_hat == 0.0 {
            1.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            b_hat / b
        };
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    Ok(SandwichStats {
        min_ratio,
        max_ratio,
        within_bounds: min_ratio >= 1.0 - 1e-9 && max_ratio <= 4.0 + 1e-9,
        form: BonusForm::MainText,
    })
}

/// Log-det information gain of the realized covariance sequence:
/// `ln det(I + (1/lambda) sum_i Sigma_i)`.
pub fn information_gain(covs: &[DMatrix<f64>], lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::invalid("lambda must be positive"));
    }
    let Some(first) = covs.first() else {
        return Ok(0.0);
    };
    let d = first.nrows();
    let mut m = DMatrix::identity(d, d);
    for c in covs {
        m += c / lambda;
    }
    log_det_spd(&m)
}

fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::Numeric("log-det of a non-SPD matrix".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

#[derive(Debug, Clone, Copy)]
pub struct TelescopeCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates both sides of the trace-telescoping inequality
/// `2 ln det(M_N) - 2 ln det(lambda I) >= sum_i tr(Sigma_i M_{i-1}^-1)`
/// for PSD increments with eigenvalues at most 1.
pub fn trace_telescope_check(seq: &[DMatrix<f64>], lambda: f64) -> Result<TelescopeCheck> {
    if lambda <= 0.0 {
        return Err(Error::invalid("lambda must be positive"));
    }
    let d = seq.first().map_or(1, DMatrix::nrows);
    let mut m = DMatrix::identity(d, d) * lambda;
    let mut rhs = 0.0;
    for s in seq {
        let eig = DMatrix::symmetric_eigen(s.clone()).eigenvalues;
        if eig.max() > 1.0 + 1e-9 {
            return Err(Error::invalid("increment eigenvalue exceeds 1"));
        }
        if eig.min() < -1e-10 {
            return Err(Error::invalid("increment not PSD"));
        }
        let chol = Cholesky::new(m.clone())
            .ok_or_else(|| Error::Numeric("telescope matrix not SPD".into()))?;
        // tr(S M^-1) = sum_j (M^-1 s_j)_j over columns.
        let mut tr = 0.0;
        for j in 0..d {
            let col = s.column(j).into_owned();
            tr += chol.solve(&col)[j];
        }
        rhs += tr;
        m += s;
    }
    let lhs = 2.0 * log_det_spd(&m)? - 2.0 * (d as f64) * lambda.ln();
    Ok(TelescopeCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-9,
    })
}
