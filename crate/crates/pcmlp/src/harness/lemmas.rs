//! Executable diagnostics for the supporting lemmas: each check runs a
//! randomized numerical experiment and reports pass/fail with a detail line.
//! The acceptance test suite runs the same checks at full strength.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cover::{bonus_sandwich_check, information_gain, trace_telescope_check};
use crate::envs::make_tabular_linmdp;
use crate::error::Result;
use crate::features::FeatureMap;
use crate::mdp::{Action, ActionSpace, Mdp, RngStream, State, TabularPolicy};
use crate::mle::{fit_finite_tabular_mle, IndexedDataset};
use crate::models::{
    gaussian_tv_bound, knr_sample, state_norm_bound, Dynamics, KnrModel, TabularTable,
    TransitionModel,
};
use crate::odpc::{eluder_dimension, EluderInstance, EluderSearch};
use crate::planners::{MppiConfig, MppiPlanner};
use crate::stream::StreamSeed;
use crate::tabular::simulation_gap;

#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

pub fn lemma_suite(seed: u64) -> Result<Vec<LemmaReport>> {
    Ok(vec![
        simulation_identity(seed, 100)?,
        trace_telescoping(seed, 100)?,
        gaussian_tv(seed)?,
        information_gain_bound(seed)?,
        state_bound_simulation(seed)?,
        covariance_sandwich(seed, 10)?,
        mppi_weights(seed)?,
        eluder_hand_instances()?,
        mle_identification(seed, 20)?,
    ])
}

pub(crate) fn random_table(ns: usize, na: usize, rng: &mut RngStream) -> TabularTable {
    let rows = (0..ns * na)
        .map(|_| {
            let mut v = DVector::from_fn(ns, |_, _| -f64::ln(rng.random::<f64>()));
            v /= v.sum();
            v
        })
        .collect();
    TabularTable::new(ns, na, rows).unwrap()
}

pub(crate) fn random_tabular_mdp(
    ns: usize,
    na: usize,
    horizon: usize,
    max_reward: f64,
    rng: &mut RngStream,
) -> Mdp {
    let table = random_table(ns, na, rng);
    let rewards: Vec<f64> = (0..ns * na).map(|_| rng.random::<f64>() * max_reward).collect();
    Mdp::new(
        horizon,
        State::Index(0),
        Arc::new(move |s: &State, a: &Action| {
            rewards[s.as_index().unwrap() * na + a.as_index().unwrap()]
        }),
        Dynamics::Model(TransitionModel::Tabular(table)),
        ActionSpace::Discrete(na),
    )
    .unwrap()
}

pub fn simulation_identity(seed: u64, trials: usize) -> Result<LemmaReport> {
    let mut rng = StreamSeed::new(seed).labeled("sim_lemma").rng();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let ns = rng.random_range(2..6);
        let na = rng.random_range(1..4);
        let h = rng.random_range(1..5);
        let truth = random_tabular_mdp(ns, na, h, 0.9, &mut rng);
        let model = random_tabular_mdp(ns, na, h, 0.9, &mut rng);
        let policy = TabularPolicy::new(
            (0..h)
                .map(|_| (0..ns).map(|_| rng.random_range(0..na)).collect())
                .collect(),
        );
        let gap = simulation_gap(&policy, &truth, &model)?;
        worst = worst.max((gap.lhs - gap.rhs).abs());
    }
    Ok(LemmaReport {
        name: "simulation-identity",
        pass: worst <= 1e-10,
        detail: format!("max |lhs - rhs| = {worst:.3e} over {trials} instances"),
    })
}

pub fn trace_telescoping(seed: u64, trials: usize) -> Result<LemmaReport> {
    let mut rng = StreamSeed::new(seed).labeled("telescope").rng();
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let d = rng.random_range(1..9);
        let n = rng.random_range(1..21);
        let seq: Vec<DMatrix<f64>> = (0..n)
            .map(|_| {
                let v = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                let v = &v / v.norm().max(1.0);
                v.clone() * v.transpose()
            })
            .collect();
        // The factor-2 inequality needs increment eigenvalues at most ~2.5
        // times lambda; with unit-bounded increments, lambda >= 0.5 is safe.
        let check = trace_telescope_check(&seq, 0.5 + rng.random::<f64>())?;
        worst = worst.min(check.lhs - check.rhs);
    }
    Ok(LemmaReport {
        name: "trace-telescoping",
        pass: worst >= -1e-9,
        detail: format!("min slack = {worst:.3e} over {trials} sequences"),
    })
}

pub fn gaussian_tv(_seed: u64) -> Result<LemmaReport> {
    // 1-D quadrature truth across a grid of mean shifts.
    let mut ok = true;
    let mut detail = String::new();
    for shift in [0.05, 0.2, 0.4, 0.8, 1.5, 3.0] {
        let bound = gaussian_tv_bound(
            &DVector::from_element(1, 0.0),
            &DVector::from_element(1, shift),
            1.0,
        )?;
        let (lo, hi, n) = (-10.0f64, 10.0, 100_000);
        let dx = (hi - lo) / n as f64;
        let mut tv = 0.0;
        for i in 0..n {
            let x: f64 = lo + (i as f64 + 0.5) * dx;
            let p = (-0.5 * x * x).exp();
            let q = (-0.5 * (x - shift) * (x - shift)).exp();
            tv += (p - q).abs() * dx;
        }
        tv /= 2.0 * (2.0 * std::f64::consts::PI).sqrt();
        if bound < tv {
            ok = false;
            detail = format!("bound {bound:.4} below truth {tv:.4} at shift {shift}");
        }
    }
    if ok {
        detail = "bound dominates quadrature truth on all shifts".into();
    }
    Ok(LemmaReport {
        name: "gaussian-tv-bound",
        pass: ok,
        detail,
    })
}

pub fn information_gain_bound(seed: u64) -> Result<LemmaReport> {
    let mut rng = StreamSeed::new(seed).labeled("info_gain").rng();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let d = rng.random_range(2..8);
        let n = rng.random_range(1..16);
        let covs: Vec<DMatrix<f64>> = (0..n)
            .map(|_| {
                let v = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
                let v = &v / v.norm().max(1.0);
                v.clone() * v.transpose()
            })
            .collect();
        let lambda = 0.1 + rng.random::<f64>();
        let gain = information_gain(&covs, lambda)?;
        let bound = d as f64 * (1.0 + n as f64 / lambda).ln();
        worst = worst.max(gain - bound);
    }
    Ok(LemmaReport {
        name: "information-gain-bound",
        pass: worst <= 1e-9,
        detail: format!("max gain excess over d ln(1 + N/lambda): {worst:.3e}"),
    })
}

pub fn state_bound_simulation(seed: u64) -> Result<LemmaReport> {
    let mut rng = StreamSeed::new(seed).labeled("state_bound").rng();
    let (f, sigma, d_s, m, delta) = (1.0, 0.3, 3usize, 10_000usize, 0.01);
    let b = state_norm_bound(f, sigma, d_s, m, delta)?;
    let w = DMatrix::from_fn(d_s, 2, |i, j| if i == j { f / 2.0 } else { 0.0 });
    let model = KnrModel::new(w, sigma, f)?;
    let phi = DVector::from_vec(vec![0.8, 0.5]);
    let exceed = (0..m)
        .filter(|_| knr_sample(&model, &phi, &mut rng).unwrap().norm() > b)
        .count();
    let frac = exceed as f64 / m as f64;
    Ok(LemmaReport {
        name: "state-norm-bound",
        pass: frac <= delta,
        detail: format!("exceedance fraction {frac:.4} at target {delta}"),
    })
}

/// Covariance-inverse concentration at the lemma's sample size: empirical
/// quadratic forms stay within a factor of 2 of the exact ones, so the
/// empirical-vs-exact bonus ratio stays in `[1, 4]`.
pub fn covariance_sandwich(seed: u64, seeds: usize) -> Result<LemmaReport> {
    let (n, d, lambda, delta) = (5usize, 4usize, 1.0f64, 0.05f64);
    let k = (32.0 * (n * n) as f64 * (8.0 * (n * d) as f64 / delta).ln() / (lambda * lambda))
        .ceil() as usize;
    let mut passes = 0;
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for s in 0..seeds {
        let mut rng = StreamSeed::new(seed).labeled("sandwich").child(s as u64).rng();
        // Finite-support feature distributions with exact covariances.
        let mut exact = Vec::new();
        let mut empirical = Vec::new();
        for _ in 0..n {
            let support: Vec<DVector<f64>> = (0..6)
                .map(|_| {
                    let v = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
                    let norm = v.norm();
                    v / norm.max(1.0)
                })
                .collect();
            let mut probs = DVector::from_fn(6, |_, _| rng.random::<f64>() + 0.05);
            probs /= probs.sum();
            let mut cov_exact = DMatrix::zeros(d, d);
            for (p, v) in probs.iter().zip(&support) {
                cov_exact += *p * v * v.transpose();
            }
            let mut cov_emp = DMatrix::zeros(d, d);
            for _ in 0..k {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = support.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                let v = &support[idx];
                cov_emp += v * v.transpose() / k as f64;
            }
            exact.push(cov_exact);
            empirical.push(cov_emp);
        }
        let probes: Vec<DVector<f64>> = (0..100)
            .map(|_| {
                let v = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
                let norm = v.norm();
                v / norm.max(1.0)
            })
            .collect();
        let stats = bonus_sandwich_check(&exact, &empirical, &probes, 1.0, lambda, 1e6)?;
        worst.0 = worst.0.min(stats.min_ratio);
        worst.1 = worst.1.max(stats.max_ratio);
        if stats.within_bounds {
            passes += 1;
        }
    }
    Ok(LemmaReport {
        name: "covariance-sandwich",
        pass: passes * 100 >= seeds * 95,
        detail: format!(
            "{passes}/{seeds} seeds in [1,4]; ratio range [{:.3}, {:.3}] at K = {k}",
            worst.0, worst.1
        ),
    })
}

pub fn mppi_weights(seed: u64) -> Result<LemmaReport> {
    // Weight normalization plus softmin concentration at tiny temperature.
    let rho: f64 = 10.0;
    let w = DMatrix::from_row_slice(1, 2, &[0.9 * rho, 0.3 * rho]);
    let f = w.norm() * 1.01;
    let phi = FeatureMap::custom(2, move |s: &State, a: &Action| {
        let sv = s.as_vector().unwrap();
        let av = a.as_vector().unwrap();
        let x = DVector::from_vec(vec![sv[0], av[0]]);
        let n = x.norm();
        x / rho.max(n)
    });
    let model = TransitionModel::Knr {
        model: KnrModel::new(w, 0.0, f)?,
        phi,
    };
    let reward: crate::mdp::RewardFn = Arc::new(|s: &State, a: &Action| {
        -(s.as_vector().unwrap().norm_squared() + 0.1 * a.as_vector().unwrap().norm_squared())
    });
    let mut cfg = MppiConfig::defaults(1);
    cfg.n_samples = 64;
    cfg.horizon = 8;
    let mut planner = MppiPlanner::new(cfg.clone(), model.clone(), reward.clone(), 20)?;
    let mut rng = StreamSeed::new(seed).labeled("mppi").rng();
    let mut max_dev: f64 = 0.0;
    let state = State::Vector(DVector::from_element(1, 1.0));
    for step in 0..20 {
        let (_, diag) = planner.step_diag(&state, step, &mut rng)?;
        max_dev = max_dev.max((diag.weight_sum - 1.0).abs());
    }
    cfg.temperature = 1e-6;
    let mut cold = MppiPlanner::new(cfg, model, reward, 20)?;
    let (_, diag) = cold.step_diag(&state, 0, &mut rng)?;
    let concentration = diag.weights[diag.argmin_cost];
    let pass = max_dev <= 1e-12 && concentration >= 1.0 - 1e-3;
    Ok(LemmaReport {
        name: "mppi-weights",
        pass,
        detail: format!(
            "normalization deviation {max_dev:.2e}; argmin weight {concentration:.6}"
        ),
    })
}

pub fn eluder_hand_instances() -> Result<LemmaReport> {
    // Singleton class: dimension 0.
    let chain = |flips: &[(usize, usize, usize)]| {
        let mut rows = Vec::new();
        for s in 0..3usize {
            for a in 0..2usize {
                let mut target = if a == 0 { s.saturating_sub(1) } else { (s + 1).min(2) };
                for (fs, fa, ft) in flips {
                    if *fs == s && *fa == a {
                        target = *ft;
                    }
                }
                let mut r = DVector::zeros(3);
                r[target] = 1.0;
                rows.push(r);
            }
        }
        TabularTable::new(3, 2, rows).unwrap()
    };
    let policies = vec![
        TabularPolicy::new(vec![vec![0; 3]; 4]),
        TabularPolicy::new(vec![vec![1; 3]; 4]),
    ];
    let singleton = EluderInstance::new(
        chain(&[]),
        vec![chain(&[])],
        policies.clone(),
        4,
        0,
        0.1,
    )?;
    let d0 = eluder_dimension(&singleton, &EluderSearch::default())?;

    let separated = EluderInstance::new(
        chain(&[]),
        vec![chain(&[]), chain(&[(2, 0, 2), (2, 1, 0)])],
        policies,
        4,
        0,
        0.2,
    )?;
    let d1 = eluder_dimension(&separated, &EluderSearch::default())?;

    let pass = d0.length == 0 && d1.length == 1;
    Ok(LemmaReport {
        name: "eluder-hand-instances",
        pass,
        detail: format!("singleton -> {}, separated pair -> {}", d0.length, d1.length),
    })
}

pub fn mle_identification(seed: u64, seeds: usize) -> Result<LemmaReport> {
    let mut hits = 0;
    for s in 0..seeds {
        let env = make_tabular_linmdp(4, 2, 4, 0.2, 3, seed ^ (s as u64).wrapping_mul(97))?;
        let cand = env.candidates.as_ref().unwrap();
        let truth = env.truth.as_ref().unwrap().tabular().unwrap();
        let mut rng = StreamSeed::new(seed).labeled("mle_id").child(s as u64).rng();
        let mut data = IndexedDataset::default();
        for _ in 0..500 {
            let st = rng.random_range(0..4);
            let a = rng.random_range(0..2);
            let sp = truth.sample_next(st, a, &mut rng)?;
            data.samples.push((st, a, sp));
        }
        let fit = fit_finite_tabular_mle(&data, cand.candidate_tables())?;
        if fit.selected == env.truth_index.unwrap() {
            hits += 1;
        }
    }
    Ok(LemmaReport {
        name: "mle-identification",
        pass: hits * 100 >= seeds * 95,
        detail: format!("{hits}/{seeds} seeds identified the truth"),
    })
}
