//! Transition-model families.
//!
//! Two parametric families share one interface: kernelized nonlinear
//! regulators (`s' = W phi(s,a) + N(0, sigma^2 I)`, `||W||_F <= F`) and
//! finite-candidate linear MDPs (`P(s'|s,a) = <mu(s'), phi(s,a)>` with the
//! unknown `mu` ranging over a finite candidate list). Explicit tabular
//! tables round out the union for exact computations.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::matio;
use crate::mdp::{Action, RngStream, State};

/// Explicit tabular transition law. Rows are indexed by `s * n_actions + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularTable {
    n_states: usize,
    n_actions: usize,
    rows: Vec<DVector<f64>>,
}

impl TabularTable {
    pub fn new(n_states: usize, n_actions: usize, rows: Vec<DVector<f64>>) -> Result<Self> {
        if rows.len() != n_states * n_actions {
            return Err(Error::Dimension {
                context: "tabular rows",
                expected: n_states * n_actions,
                found: rows.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::Dimension {
                    context: "tabular row width",
                    expected: n_states,
                    found: row.len(),
                });
            }
            if row.iter().any(|p| *p < -1e-12) {
                return Err(Error::invalid(format!("row {i} has negative mass")));
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(TabularTable {
            n_states,
            n_actions,
            rows,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn next_dist(&self, s: usize, a: usize) -> Result<&DVector<f64>> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::invalid(format!("state-action ({s},{a}) out of range")));
        }
        Ok(&self.rows[s * self.n_actions + a])
    }

    pub fn sample_next(&self, s: usize, a: usize, rng: &mut RngStream) -> Result<usize> {
        Ok(sample_categorical(self.next_dist(s, a)?, rng))
    }

    /// Expected per-pair `L1` distance to another table under the given
    /// state-action occupancy (rows of `occupancy` indexed like table rows).
    pub fn l1_distance(&self, other: &TabularTable, s: usize, a: usize) -> Result<f64> {
        let p = self.next_dist(s, a)?;
        let q = other.next_dist(s, a)?;
        Ok((p - q).abs().sum())
    }
}

pub(crate) fn sample_categorical(dist: &DVector<f64>, rng: &mut RngStream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p.max(0.0);
        if u < acc {
            return i;
        }
    }
    dist.len() - 1
}

/// Gaussian linear-in-features regulator model.
#[derive(Debug, Clone)]
pub struct KnrModel {
    w: DMatrix<f64>,
    sigma: f64,
    f_budget: f64,
}

impl KnrModel {
    pub fn new(w: DMatrix<f64>, sigma: f64, f_budget: f64) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::invalid("sigma must be nonnegative"));
        }
        if f_budget <= 0.0 {
            return Err(Error::invalid("Frobenius budget must be positive"));
        }
        let norm = w.norm();
        if norm > f_budget * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "||W||_F = {norm} exceeds budget {f_budget}"
            )));
        }
        Ok(KnrModel { w, sigma, f_budget })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn f_budget(&self) -> f64 {
        self.f_budget
    }

    pub fn state_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn predict(&self, phi_sa: &DVector<f64>) -> Result<DVector<f64>> {
        check_phi(self.w.ncols(), phi_sa)?;
        Ok(&self.w * phi_sa)
    }
}

fn check_phi(expected: usize, phi: &DVector<f64>) -> Result<()> {
    if phi.len() != expected {
        return Err(Error::Dimension {
            context: "feature vector",
            expected,
            found: phi.len(),
        });
    }
    if phi.norm() > 1.0 + 1e-9 {
        return Err(Error::invalid(format!(
            "feature norm {} exceeds 1",
            phi.norm()
        )));
    }
    Ok(())
}

/// Draws `W phi + sigma z`, `z` standard normal.
pub fn knr_sample(model: &KnrModel, phi_sa: &DVector<f64>, rng: &mut RngStream) -> Result<DVector<f64>> {
    let mut next = model.predict(phi_sa)?;
    if model.sigma > 0.0 {
        for v in next.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += model.sigma * z;
        }
    }
    Ok(next)
}

/// Gaussian log-density of `next_state` under `N(W phi, sigma^2 I)`.
///
/// With `sigma = 0` the density degenerates: returns `-inf` unless
/// `next_state` equals the mean exactly (then `+inf`).
pub fn knr_log_likelihood(
    model: &KnrModel,
    phi_sa: &DVector<f64>,
    next_state: &DVector<f64>,
) -> Result<f64> {
    let mean = model.predict(phi_sa)?;
    if next_state.len() != mean.len() {
        return Err(Error::Dimension {
            context: "next state",
            expected: mean.len(),
            found: next_state.len(),
        });
    }
    let sq = (next_state - &mean).norm_squared();
    if model.sigma == 0.0 {
        return Ok(if sq == 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        });
    }
    let d = mean.len() as f64;
    let var = model.sigma * model.sigma;
    Ok(-0.5 * d * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * sq / var)
}

/// Finite-candidate linear MDP over a tabular domain: each candidate is an
/// `n_states x d` matrix of rows `mu(s')`; the induced next-state law is
/// `clip(mu . phi(s,a), 0)` renormalized.
#[derive(Clone)]
pub struct LinearMdpModel {
    candidates: Arc<Vec<DMatrix<f64>>>,
    /// Induced (validated, renormalized) tabular law per candidate.
    tables: Arc<Vec<TabularTable>>,
    selected: usize,
    phi: FeatureMap,
    n_states: usize,
    n_actions: usize,
}

impl LinearMdpModel {
    /// Validates every candidate on the whole tabular domain: entries may dip
    /// below zero only by 1e-6 (they are clipped and the row renormalized),
    /// and `||mu^T nu||_2 <= sqrt(d)` over sign vectors, checked per
    /// coordinate via the column L1 norms.
    pub fn new(
        candidates: Vec<DMatrix<f64>>,
        selected: usize,
        phi: FeatureMap,
        n_states: usize,
        n_actions: usize,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::invalid("candidate list must be nonempty"));
        }
        if selected >= candidates.len() {
            return Err(Error::invalid("selected candidate out of range"));
        }
        let d = phi.dim();
        let mut tables = Vec::with_capacity(candidates.len());
        for (ci, cand) in candidates.iter().enumerate() {
            if cand.nrows() != n_states || cand.ncols() != d {
                return Err(Error::Dimension {
                    context: "candidate shape",
                    expected: n_states * d,
                    found: cand.nrows() * cand.ncols(),
                });
            }
            let worst: f64 = (0..d)
                .map(|j| cand.column(j).abs().sum().powi(2))
                .sum::<f64>()
                .sqrt();
            if worst > (d as f64).sqrt() * (1.0 + 1e-9) {
                return Err(Error::invalid(format!(
                    "candidate {ci} violates the sqrt(d) norm bound ({worst})"
                )));
            }
            let mut rows = Vec::with_capacity(n_states * n_actions);
            for s in 0..n_states {
                for a in 0..n_actions {
                    let f = phi.eval(&State::Index(s), &Action::Index(a))?;
                    let mut v = cand * f;
                    let min = v.min();
                    if min < -1e-6 {
                        return Err(Error::invalid(format!(
                            "candidate {ci} yields negative mass {min} at ({s},{a})"
                        )));
                    }
                    v.apply(|p| *p = p.max(0.0));
                    let sum = v.sum();
                    if sum <= 0.0 {
                        return Err(Error::invalid(format!(
                            "candidate {ci} yields zero mass at ({s},{a})"
                        )));
                    }
                    v /= sum;
                    rows.push(v);
                }
            }
            tables.push(TabularTable::new(n_states, n_actions, rows)?);
        }
        Ok(LinearMdpModel {
            candidates: Arc::new(candidates),
            tables: Arc::new(tables),
            selected,
            phi,
            n_states,
            n_actions,
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn selected(&self) -> usize {
        self.selected
    }

    pub fn with_selected(&self, selected: usize) -> Result<Self> {
        if selected >= self.candidates.len() {
            return Err(Error::invalid("selected candidate out of range"));
        }
        let mut m = self.clone();
        m.selected = selected;
        Ok(m)
    }

    pub fn candidate(&self, i: usize) -> &DMatrix<f64> {
        &self.candidates[i]
    }

    pub fn candidate_table(&self, i: usize) -> &TabularTable {
        &self.tables[i]
    }

    pub fn candidate_tables(&self) -> &[TabularTable] {
        &self.tables
    }

    pub fn selected_table(&self) -> &TabularTable {
        &self.tables[self.selected]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn phi(&self) -> &FeatureMap {
        &self.phi
    }
}

/// Next-state distribution of the selected candidate at a tabular pair.
pub fn linmdp_next_dist(model: &LinearMdpModel, s: usize, a: usize) -> Result<DVector<f64>> {
    model.selected_table().next_dist(s, a).cloned()
}

/// Upper bound on the total-variation distance between two isotropic
/// Gaussians with shared scale: `min(||mu1 - mu2|| / sigma, 1)`.
pub fn gaussian_tv_bound(mu1: &DVector<f64>, mu2: &DVector<f64>, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::invalid("sigma must be positive"));
    }
    if mu1.len() != mu2.len() {
        return Err(Error::Dimension {
            context: "gaussian means",
            expected: mu1.len(),
            found: mu2.len(),
        });
    }
    Ok(((mu1 - mu2).norm() / sigma).min(1.0))
}

/// High-probability bound on `||s'||_2` over `M` regulator samples:
/// `F + sigma * sqrt(d_s * ln(d_s * M / delta))`.
pub fn state_norm_bound(f_budget: f64, sigma: f64, d_s: usize, m: usize, delta: f64) -> Result<f64> {
    if f_budget < 0.0 || sigma < 0.0 || d_s == 0 || m == 0 {
        return Err(Error::invalid("state bound inputs must be positive"));
    }
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::invalid("delta must lie in (0,1)"));
    }
    let inner = (d_s as f64) * ((d_s as f64) * (m as f64) / delta).ln();
    Ok(f_budget + sigma * inner.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Knr,
    Tabular,
}

/// Tagged union over the supported transition laws.
#[derive(Clone)]
pub enum TransitionModel {
    Knr { model: KnrModel, phi: FeatureMap },
    LinearMdp(LinearMdpModel),
    Tabular(TabularTable),
}

impl TransitionModel {
    pub fn family(&self) -> ModelFamily {
        match self {
            TransitionModel::Knr { .. } => ModelFamily::Knr,
            _ => ModelFamily::Tabular,
        }
    }

    pub fn sample(&self, state: &State, action: &Action, rng: &mut RngStream) -> Result<State> {
        match self {
            TransitionModel::Knr { model, phi } => {
                let f = phi.eval(state, action)?;
                Ok(State::Vector(knr_sample(model, &f, rng)?))
            }
            TransitionModel::LinearMdp(m) => {
                let dist = m
                    .selected_table()
                    .next_dist(state.as_index()?, action.as_index()?)?;
                Ok(State::Index(sample_categorical(dist, rng)))
            }
            TransitionModel::Tabular(t) => Ok(State::Index(t.sample_next(
                state.as_index()?,
                action.as_index()?,
                rng,
            )?)),
        }
    }

    /// Deterministic mean propagation for shooting-based planners.
    pub fn mean_next(&self, state: &State, action: &Action) -> Result<State> {
        match self {
            TransitionModel::Knr { model, phi } => {
                let f = phi.eval(state, action)?;
                Ok(State::Vector(model.predict(&f)?))
            }
            _ => Err(Error::UnsupportedModel(
                "mean propagation requires a continuous-state model",
            )),
        }
    }

    /// The induced tabular law, when one exists.
    pub fn tabular(&self) -> Option<&TabularTable> {
        match self {
            TransitionModel::Tabular(t) => Some(t),
            TransitionModel::LinearMdp(m) => Some(m.selected_table()),
            TransitionModel::Knr { .. } => None,
        }
    }

    pub fn to_text(&self) -> Result<String> {
        match self {
            TransitionModel::Knr { model, phi } => {
                let mut s = String::new();
                s.push_str("knr\n");
                s.push_str(&format!(
                    "{} {}\n",
                    matio::format_f64(model.sigma),
                    matio::format_f64(model.f_budget)
                ));
                matio::write_matrix(&mut s, &model.w);
                s.push_str(&phi.to_text()?);
                Ok(s)
            }
            TransitionModel::LinearMdp(m) => {
                let mut s = String::new();
                s.push_str("linmdp\n");
                s.push_str(&format!(
                    "{} {} {} {}\n",
                    m.candidates.len(),
                    m.selected,
                    m.n_states,
                    m.n_actions
                ));
                for cand in m.candidates.iter() {
                    matio::write_matrix(&mut s, cand);
                }
                s.push_str(&m.phi.to_text()?);
                Ok(s)
            }
            TransitionModel::Tabular(t) => {
                let mut s = String::new();
                s.push_str("tabular\n");
                s.push_str(&format!("{} {}\n", t.n_states, t.n_actions));
                for row in &t.rows {
                    matio::write_matrix(
                        &mut s,
                        &DMatrix::from_row_slice(1, row.len(), row.as_slice()),
                    );
                }
                Ok(s)
            }
        }
    }
}

/// Transition law backing an environment: an explicit model or an opaque
/// black-box sampler.
#[derive(Clone)]
pub enum Dynamics {
    Model(TransitionModel),
    BlackBox(BlackBoxDynamics),
}

pub type BlackBoxDynamics =
    Arc<dyn Fn(&State, &Action, &mut RngStream) -> Result<State> + Send + Sync>;

impl Dynamics {
    pub fn sample(&self, state: &State, action: &Action, rng: &mut RngStream) -> Result<State> {
        match self {
            Dynamics::Model(m) => m.sample(state, action, rng),
            Dynamics::BlackBox(f) => f(state, action, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features;
    use crate::stream::StreamSeed;

    #[test]
    fn knr_sample_noiseless_identity() {
        let model = KnrModel::new(DMatrix::identity(3, 3), 0.0, 2.0).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let out = knr_sample(&model, &e1, &mut StreamSeed::new(0).rng()).unwrap();
        assert_eq!(out, e1);

        let zero = KnrModel::new(DMatrix::zeros(2, 3), 0.0, 1.0).unwrap();
        let out = knr_sample(&zero, &e1, &mut StreamSeed::new(0).rng()).unwrap();
        assert_eq!(out, DVector::zeros(2));
    }

    #[test]
    fn knr_sample_mean_concentrates() {
        let w = DMatrix::from_row_slice(2, 2, &[0.3, -0.1, 0.2, 0.5]);
        let model = KnrModel::new(w.clone(), 0.5, 2.0).unwrap();
        let phi = DVector::from_vec(vec![0.6, 0.4]);
        let mean_true = &w * &phi;
        let n = 100_000;
        let mut acc = DVector::zeros(2);
        let mut rng = StreamSeed::new(8).rng();
        for _ in 0..n {
            acc += knr_sample(&model, &phi, &mut rng).unwrap();
        }
        acc /= n as f64;
        let tol = 3.0 * 0.5 / (n as f64).sqrt();
        for i in 0..2 {
            assert!((acc[i] - mean_true[i]).abs() < tol, "coord {i}");
        }
    }

    #[test]
    fn knr_rejects_oversized_features_and_weights() {
        let model = KnrModel::new(DMatrix::zeros(1, 2), 0.1, 1.0).unwrap();
        let big = DVector::from_vec(vec![1.0, 1.0]);
        assert!(knr_sample(&model, &big, &mut StreamSeed::new(0).rng()).is_err());
        assert!(KnrModel::new(DMatrix::from_element(2, 2, 1.0), 0.1, 1.0).is_err());
    }

    #[test]
    fn log_likelihood_at_mode_is_the_normalizer() {
        let model = KnrModel::new(DMatrix::identity(2, 2), 0.3, 2.0).unwrap();
        let phi = DVector::from_vec(vec![0.5, 0.1]);
        let mode = model.predict(&phi).unwrap();
        let ll = knr_log_likelihood(&model, &phi, &mode).unwrap();
        let expect = -0.5 * 2.0 * (2.0 * std::f64::consts::PI * 0.09).ln();
        assert!((ll - expect).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_argmax_is_least_squares_on_a_grid() {
        // 1-D: data from w* = 0.4, no noise in the target; the grid argmax of
        // the summed log-density must be the least-squares value.
        let phis = [0.2, 0.5, 0.9, -0.4];
        let targets: Vec<f64> = phis.iter().map(|p| 0.4 * p).collect();
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for i in 0..=40 {
            let w = -1.0 + 0.05 * i as f64;
            let model = KnrModel::new(DMatrix::from_element(1, 1, w), 0.2, 2.0).unwrap();
            let ll: f64 = phis
                .iter()
                .zip(&targets)
                .map(|(p, t)| {
                    knr_log_likelihood(
                        &model,
                        &DVector::from_element(1, *p),
                        &DVector::from_element(1, *t),
                    )
                    .unwrap()
                })
                .sum();
            if ll > best.0 {
                best = (ll, w);
            }
        }
        assert!((best.1 - 0.4).abs() < 1e-9);
    }

    #[test]
    fn log_density_integrates_to_one_in_one_dimension() {
        // Quadrature over a wide grid.
        let model = KnrModel::new(DMatrix::from_element(1, 1, 0.5), 0.7, 1.0).unwrap();
        let phi = DVector::from_element(1, 0.8);
        let (lo, hi, n) = (-6.0, 6.0, 120_000);
        let dx = (hi - lo) / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * dx;
            let ll = knr_log_likelihood(&model, &phi, &DVector::from_element(1, x)).unwrap();
            integral += ll.exp() * dx;
        }
        assert!((integral - 1.0).abs() < 1e-4, "integral {integral}");
    }

    #[test]
    fn sigma_zero_off_mode_is_negative_infinity() {
        let model = KnrModel::new(DMatrix::zeros(1, 1), 0.0, 1.0).unwrap();
        let ll = knr_log_likelihood(
            &model,
            &DVector::from_element(1, 0.5),
            &DVector::from_element(1, 0.1),
        )
        .unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    fn tabular_embedding(rows: &[Vec<f64>], n_states: usize, n_actions: usize) -> LinearMdpModel {
        // mu(s') row holds P(s'|pair) across one-hot coordinates.
        let d = n_states * n_actions;
        let mut mu = DMatrix::zeros(n_states, d);
        for (pair, row) in rows.iter().enumerate() {
            for (sp, p) in row.iter().enumerate() {
                mu[(sp, pair)] = *p;
            }
        }
        LinearMdpModel::new(
            vec![mu],
            0,
            FeatureMap::OneHot {
                n_states,
                n_actions,
            },
            n_states,
            n_actions,
        )
        .unwrap()
    }

    #[test]
    fn one_hot_embedding_reproduces_tabular_rows() {
        let rows = vec![
            vec![0.2, 0.8],
            vec![0.9, 0.1],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        ];
        let model = tabular_embedding(&rows, 2, 2);
        for s in 0..2 {
            for a in 0..2 {
                let dist = linmdp_next_dist(&model, s, a).unwrap();
                let want = &rows[s * 2 + a];
                for sp in 0..2 {
                    assert!((dist[sp] - want[sp]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn deterministic_candidate_gives_one_hot_distribution() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let model = tabular_embedding(&rows, 2, 1);
        let dist = linmdp_next_dist(&model, 0, 0).unwrap();
        assert_eq!(dist, DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn sampling_matches_next_dist() {
        let rows = vec![vec![0.3, 0.45, 0.25]; 3];
        let model = tabular_embedding(&rows, 3, 1);
        let m = TransitionModel::LinearMdp(model);
        let n = 100_000;
        let mut counts = [0usize; 3];
        let mut rng = StreamSeed::new(5).rng();
        for _ in 0..n {
            let s = m
                .sample(&State::Index(0), &Action::Index(0), &mut rng)
                .unwrap();
            counts[s.as_index().unwrap()] += 1;
        }
        let tv: f64 = [0.3, 0.45, 0.25]
            .iter()
            .zip(counts.iter())
            .map(|(p, c)| (p - *c as f64 / n as f64).abs())
            .sum::<f64>()
            * 0.5;
        assert!(tv < 0.01, "tv {tv}");
    }

    #[test]
    fn negative_mass_is_a_construction_error() {
        let mut mu = DMatrix::zeros(2, 2);
        mu[(0, 0)] = 1.1;
        mu[(1, 0)] = -0.1;
        mu[(0, 1)] = 0.5;
        mu[(1, 1)] = 0.5;
        let res = LinearMdpModel::new(
            vec![mu],
            0,
            FeatureMap::OneHot {
                n_states: 2,
                n_actions: 1,
            },
            2,
            1,
        );
        assert!(res.is_err());
    }

    #[test]
    fn gaussian_tv_bound_cases() {
        let a = DVector::from_vec(vec![0.0]);
        assert_eq!(gaussian_tv_bound(&a, &a, 0.5).unwrap(), 0.0);
        let b = DVector::from_vec(vec![1.5]);
        assert_eq!(gaussian_tv_bound(&a, &b, 0.5).unwrap(), 1.0);
        // 1-D truth by quadrature: TV = 2 Phi(0.2) - 1 for a 0.4-sigma shift.
        let c = DVector::from_vec(vec![0.4]);
        let bound = gaussian_tv_bound(&a, &c, 1.0).unwrap();
        let truth = {
            let (lo, hi, n) = (-8.0, 8.0, 200_000);
            let dx = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let x: f64 = lo + (i as f64 + 0.5) * dx;
                let p0 = (-0.5 * x * x).exp();
                let p1 = (-0.5 * (x - 0.4) * (x - 0.4)).exp();
                acc += (p0 - p1).abs() * dx;
            }
            acc / (2.0 * std::f64::consts::PI).sqrt() / 2.0
        };
        assert!((truth - 0.158519).abs() < 1e-4);
        assert!(bound >= truth);
    }

    #[test]
    fn state_norm_bound_cases() {
        assert_eq!(state_norm_bound(1.5, 0.0, 3, 100, 0.1).unwrap(), 1.5);
        // ln(d_s M / delta) = 1 at d_s = 1, M = 1, delta = 1/e.
        let b = state_norm_bound(1.0, 1.0, 1, 1, 1.0 / std::f64::consts::E).unwrap();
        assert!((b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn state_norm_bound_holds_in_simulation() {
        let d_s = 3;
        let m = 10_000;
        let delta = 0.01;
        let f = 1.0;
        let sigma = 0.4;
        let b = state_norm_bound(f, sigma, d_s, m, delta).unwrap();
        let w = DMatrix::from_fn(d_s, 2, |i, j| if i == j { 0.7 } else { 0.0 });
        let model = KnrModel::new(w, sigma, f).unwrap();
        let phi = DVector::from_vec(vec![0.9, 0.3]);
        let mut rng = StreamSeed::new(21).rng();
        let exceed = (0..m)
            .filter(|_| knr_sample(&model, &phi, &mut rng).unwrap().norm() > b)
            .count();
        assert!(
            (exceed as f64 / m as f64) <= delta,
            "exceeded {exceed} times"
        );
    }

    #[test]
    fn model_serialization_round_trips() {
        let w = DMatrix::from_row_slice(1, 2, &[0.123456789012345, -0.5]);
        let model = TransitionModel::Knr {
            model: KnrModel::new(w, 0.25, 1.0).unwrap(),
            phi: features::rff_new(1, 4, 0.5, 3).unwrap(),
        };
        let text = model.to_text().unwrap();
        assert!(text.starts_with("knr\n"));
        // The matrix payload itself round-trips exactly.
        let lines: Vec<&str> = text.lines().collect();
        let mut it = lines[2..].iter().copied();
        let back = matio::read_matrix(&mut it).unwrap();
        match &model {
            TransitionModel::Knr { model, .. } => assert_eq!(back, model.w),
            _ => unreachable!(),
        }
    }
}
