//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured statistic (run with `--nocapture` to see them).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use pcmlp::cover::{bonus_sandwich_check, trace_telescope_check};
use pcmlp::envs::{make_sparse_hill, make_tabular_linmdp};
use pcmlp::features::FeatureMap;
use pcmlp::harness::{cli_run, lemmas, parse_metrics};
use pcmlp::mdp::{Action, ActionSpace, Mdp, RngStream, State, TabularPolicy};
use pcmlp::mle::{fit_finite_tabular_mle, fit_knr_sgd, IndexedDataset, KnrDataset, SgdConfig};
use pcmlp::models::{state_norm_bound, Dynamics, KnrModel, TabularTable, TransitionModel};
use pcmlp::odpc::{
    eluder_dimension, feasibility_radius, run_odpc, EluderInstance, EluderSearch, OdpcConfig,
};
use pcmlp::pcmlp::{
    run_pcmlp, tabular_optimal_value, BonusConfig, BonusSchedule, ModelClass, PcmlpConfig,
};
use pcmlp::planners::{MppiConfig, MppiPlanner, PolicySet, PlannerChoice};
use pcmlp::tabular::simulation_gap;
use pcmlp::StreamSeed;

fn random_table(ns: usize, na: usize, rng: &mut RngStream) -> TabularTable {
    let rows = (0..ns * na)
        .map(|_| {
            let mut v = DVector::from_fn(ns, |_, _| -f64::ln(rng.random::<f64>()));
            v /= v.sum();
            v
        })
        .collect();
    TabularTable::new(ns, na, rows).unwrap()
}

fn random_tabular_mdp(ns: usize, na: usize, h: usize, max_r: f64, rng: &mut RngStream) -> Mdp {
    let table = random_table(ns, na, rng);
    let rewards: Vec<f64> = (0..ns * na).map(|_| rng.random::<f64>() * max_r).collect();
    Mdp::new(
        h,
        State::Index(0),
        Arc::new(move |s: &State, a: &Action| {
            rewards[s.as_index().unwrap() * na + a.as_index().unwrap()]
        }),
        Dynamics::Model(TransitionModel::Tabular(table)),
        ActionSpace::Discrete(na),
    )
    .unwrap()
}

#[test]
fn criterion_01_simulation_lemma_identity() {
    let mut rng = StreamSeed::new(101).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let ns = rng.random_range(2..6);
        let na = rng.random_range(1..4);
        let h = rng.random_range(1..5);
        let truth = random_tabular_mdp(ns, na, h, 0.85, &mut rng);
        let model = random_tabular_mdp(ns, na, h, 0.85, &mut rng);
        let policy = TabularPolicy::new(
            (0..h)
                .map(|_| (0..ns).map(|_| rng.random_range(0..na)).collect())
                .collect(),
        );
        let gap = simulation_gap(&policy, &truth, &model).unwrap();
        worst = worst.max((gap.lhs - gap.rhs).abs());
    }
    assert!(worst <= 1e-10, "max deviation {worst}");
    println!("PASS criterion 1: simulation-lemma identity, max |lhs-rhs| = {worst:.2e} over 100 instances");
}

#[test]
fn criterion_02_trace_telescoping() {
    let mut rng = StreamSeed::new(102).rng();
    let mut min_slack = f64::INFINITY;
    for _ in 0..100 {
        let d = rng.random_range(1..9);
        let n = rng.random_range(1..21);
        let seq: Vec<DMatrix<f64>> = (0..n)
            .map(|_| {
                let v = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                let v = &v / v.norm().max(1.0);
                v.clone() * v.transpose()
            })
            .collect();
        let check = trace_telescope_check(&seq, 0.5 + rng.random::<f64>()).unwrap();
        min_slack = min_slack.min(check.lhs - check.rhs);
    }
    assert!(min_slack >= -1e-9, "min slack {min_slack}");
    println!("PASS criterion 2: trace telescoping, min slack = {min_slack:.2e} over 100 sequences");
}

#[test]
fn criterion_03_covariance_inverse_sandwich() {
    let (n, d, lambda, delta) = (5usize, 4usize, 1.0f64, 0.05f64);
    let k = (32.0 * (n * n) as f64 * (8.0 * (n * d) as f64 / delta).ln() / (lambda * lambda))
        .ceil() as usize;
    let seeds = 100;
    let passes: usize = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let mut rng = StreamSeed::new(103).child(s as u64).rng();
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
            let stats =
                bonus_sandwich_check(&exact, &empirical, &probes, 1.0, lambda, 1e6).unwrap();
            usize::from(stats.within_bounds)
        })
        .sum();
    assert!(passes >= 95, "only {passes}/100 seeds inside [1,4]");
    println!("PASS criterion 3: covariance-inverse sandwich, {passes}/100 seeds in [1,4] at K = {k}");
}

#[test]
fn criterion_04_sgd_risk_decay() {
    // d = 4, d_s = 2, sigma = 0.1; measured risk at M = 100 vs M = 10000
    // falls by at least 3x on average over 20 seeds.
    fn risk(m: usize, seed: u64) -> f64 {
        let d = 4;
        let d_s = 2;
        let sigma = 0.1;
        let mut rng = StreamSeed::new(104).labeled("risk").child(seed).rng();
        let probes: Vec<DVector<f64>> = (0..64)
            .map(|_| {
                let v = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
                let n = v.norm();
                v / n.max(1.0)
            })
            .collect();
        let w_star = {
            let mut w = DMatrix::from_fn(d_s, d, |_, _| rng.random::<f64>() - 0.5);
            w *= 0.9 / w.norm();
            w
        };
        let data = KnrDataset {
            samples: (0..m)
                .map(|_| {
                    let phi = probes[rng.random_range(0..probes.len())].clone();
                    let mut y = &w_star * &phi;
                    for v in y.iter_mut() {
                        *v += sigma
                            * <rand_distr::StandardNormal as rand_distr::Distribution<f64>>::sample(
                                &rand_distr::StandardNormal,
                                &mut rng,
                            );
                    }
                    (phi, y)
                })
                .collect(),
        };
        let b = state_norm_bound(1.0, sigma, d_s, m, 0.01).unwrap();
        let fit = fit_knr_sgd(&data, &SgdConfig::new(1.0, b), sigma).unwrap();
        let delta = fit.weights() - &w_star;
        // Exact risk over the finite feature support (uniform draw).
        probes.iter().map(|p| (&delta * p).norm_squared()).sum::<f64>() / probes.len() as f64
    }
    let seeds = 20;
    let (mut small_acc, mut large_acc) = (0.0, 0.0);
    for s in 0..seeds {
        small_acc += risk(100, s);
        large_acc += risk(10_000, s);
    }
    let factor = small_acc / large_acc;
    assert!(factor >= 3.0, "decay factor {factor}");
    println!("PASS criterion 4: SGD risk decay factor {factor:.2} from M=100 to M=10000 over {seeds} seeds");
}

#[test]
fn criterion_05_exact_mle_identification() {
    let seeds = 100;
    let hits: usize = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let env = make_tabular_linmdp(4, 2, 4, 0.2, 3, 10_500 + s as u64).unwrap();
            let cand = env.candidates.as_ref().unwrap();
            let truth = env.truth.as_ref().unwrap().tabular().unwrap();
            let mut rng = StreamSeed::new(105).child(s as u64).rng();
            let mut data = IndexedDataset::default();
            for _ in 0..500 {
                let st = rng.random_range(0..4);
                let a = rng.random_range(0..2);
                let sp = truth.sample_next(st, a, &mut rng).unwrap();
                data.samples.push((st, a, sp));
            }
            let fit = fit_finite_tabular_mle(&data, cand.candidate_tables()).unwrap();
            usize::from(fit.selected == env.truth_index.unwrap())
        })
        .sum();
    assert!(hits >= 95, "only {hits}/100 identified the truth");
    println!("PASS criterion 5: exact MLE identification {hits}/100 at M = 500, TV gap 0.2");
}

#[test]
fn criterion_06_optimism() {
    // |S| = 4, |A| = 2, H = 3 tabular linear MDP; exact MLE and the scheduled
    // bonus scale keep the planner value optimistic.
    let seeds = 100;
    let optimistic: usize = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let env = make_tabular_linmdp(4, 2, 4, 0.15, 3, 20_600 + s as u64).unwrap();
            let cfg = PcmlpConfig {
                iterations: 3,
                cov_samples: 2000,
                mle_samples: 400,
                lambda: 1.0,
                bonus: BonusConfig {
                    schedule: BonusSchedule::TheoreticalLinMdp,
                    coeff: 1.0,
                    form: Default::default(),
                },
                planner: PlannerChoice::TabularDp,
                reward_free: false,
                eval_rollouts: 2,
                plan_eval_rollouts: 1,
                probe_count: 16,
                model_error_samples: 512,
                seed: 600 + s as u64,
            };
            let model = ModelClass::LinMdp {
                model: env.candidates.clone().unwrap(),
            };
            let run = run_pcmlp(&cfg, &env, &model).unwrap();
            let v_star = tabular_optimal_value(&env).unwrap();
            usize::from(
                run.records
                    .iter()
                    .all(|r| r.plan_value_model >= v_star - 1e-9),
            )
        })
        .sum();
    assert!(optimistic >= 95, "only {optimistic}/100 seeds optimistic");
    println!("PASS criterion 6: optimism in {optimistic}/100 seeds (planner value >= V* each iteration)");
}

#[test]
fn criterion_07_bonus_decay() {
    // Linear-system runs via the canned experiment parameters; the per-step
    // bonus at iteration 15 falls to 10% of its iteration-1 value.
    let seeds: Vec<u64> = (0..10).collect();
    let ratios: Vec<f64> = seeds
        .par_iter()
        .map(|seed| {
            let env = pcmlp::envs::make_linear_system_with(2, 1, 0.02, 20, 0).unwrap();
            let (sigma, f_budget) = env.knr_defaults.unwrap();
            let cfg = PcmlpConfig {
                iterations: 15,
                cov_samples: 48,
                mle_samples: 160,
                lambda: 0.01,
                bonus: BonusConfig {
                    schedule: BonusSchedule::Explicit(2.0),
                    coeff: 1.0,
                    form: Default::default(),
                },
                planner: PlannerChoice::Mppi(MppiConfig {
                    n_samples: 64,
                    horizon: 15,
                    noise_cov: DMatrix::identity(1, 1) * 0.3,
                    temperature: 0.2,
                }),
                reward_free: false,
                eval_rollouts: 4,
                plan_eval_rollouts: 2,
                probe_count: 64,
                model_error_samples: 64,
                seed: *seed,
            };
            let model = ModelClass::Knr {
                phi: env.phi.clone(),
                sigma,
                f_budget,
                sgd: Default::default(),
            };
            let run = run_pcmlp(&cfg, &env, &model).unwrap();
            run.records[14].avg_bonus_per_step / run.records[0].avg_bonus_per_step
        })
        .collect();
    let passed = ratios.iter().filter(|r| **r <= 0.10).count();
    assert!(passed >= 8, "ratios {ratios:?}");
    println!(
        "PASS criterion 7: bonus decay <= 10% in {passed}/10 seeds (ratios {:?})",
        ratios.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
}

fn hill_run(seed: u64, coeff: f64) -> bool {
    let env = make_sparse_hill(0).unwrap();
    let (sigma, f_budget) = env.knr_defaults.unwrap();
    let cfg = PcmlpConfig {
        iterations: 15,
        cov_samples: 32,
        mle_samples: 384,
        lambda: 0.01,
        bonus: BonusConfig {
            schedule: BonusSchedule::Explicit(1.0),
            coeff,
            form: Default::default(),
        },
        planner: PlannerChoice::Mppi(MppiConfig {
            n_samples: 64,
            horizon: 25,
            noise_cov: DMatrix::identity(1, 1) * 0.5,
            temperature: 0.2,
        }),
        reward_free: false,
        eval_rollouts: 6,
        plan_eval_rollouts: 1,
        probe_count: 64,
        model_error_samples: 1,
        seed,
    };
    let model = ModelClass::Knr {
        phi: env.phi.clone(),
        sigma,
        f_budget,
        sgd: pcmlp::pcmlp::SgdSettings {
            step_size: Some(1.0),
            ..Default::default()
        },
    };
    run_pcmlp(&cfg, &env, &model).unwrap().goal_reached_at.is_some()
}

#[test]
fn criterion_08_exploration_ablation() {
    let seeds: Vec<u64> = (0..10).collect();
    let reached_c5: usize = seeds.par_iter().map(|s| usize::from(hill_run(*s, 5.0))).sum();
    let reached_c0: usize = seeds.par_iter().map(|s| usize::from(hill_run(*s, 0.0))).sum();
    assert!(
        reached_c5 >= 7,
        "C=5 reached the goal in only {reached_c5}/10 seeds"
    );
    assert!(
        reached_c0 <= 2,
        "C=0 reached the goal in {reached_c0}/10 seeds"
    );
    println!("PASS criterion 8: exploration ablation, C=5 reached {reached_c5}/10, C=0 reached {reached_c0}/10");
}

#[test]
fn criterion_09_feasibility() {
    let (m, n_cand, n_iter, delta) = (500usize, 4usize, 5usize, 0.1f64);
    let radius = feasibility_radius(n_cand, n_iter, m, delta);
    let seeds = 200;
    let feasible_runs: usize = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let env = make_tabular_linmdp(4, 2, n_cand, 0.15, 3, 30_900 + s as u64).unwrap();
            let tables = env.candidates.as_ref().unwrap().candidate_tables().to_vec();
            let cfg = OdpcConfig {
                iterations: n_iter,
                samples_per_dataset: m,
                radius,
                eval_rollouts: 1,
                seed: 900 + s as u64,
            };
            let run = run_odpc(&tables, &PolicySet::All, &env.mdp, &cfg, env.truth_index).unwrap();
            usize::from(run.records.iter().all(|r| r.feasible == Some(true)))
        })
        .sum();
    let rate = feasible_runs as f64 / seeds as f64;
    assert!(rate >= 1.0 - delta - 0.05, "feasibility rate {rate}");
    println!("PASS criterion 9: truth stayed feasible through all iterations in {feasible_runs}/200 runs (radius {radius:.3})");
}

#[test]
fn criterion_10_eluder_brute_force() {
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
    let singleton =
        EluderInstance::new(chain(&[]), vec![chain(&[])], policies.clone(), 4, 0, 0.1).unwrap();
    let d0 = eluder_dimension(&singleton, &EluderSearch::default()).unwrap();
    assert_eq!(d0.length, 0);

    let separated = EluderInstance::new(
        chain(&[]),
        vec![chain(&[]), chain(&[(2, 0, 2), (2, 1, 0)])],
        policies,
        4,
        0,
        0.2,
    )
    .unwrap();
    let d1 = eluder_dimension(&separated, &EluderSearch::default()).unwrap();
    assert_eq!(d1.length, 1);
    println!("PASS criterion 10: eluder dimension exact on hand instances (0 and 1)");
}

#[test]
fn criterion_11_mppi_sanity() {
    // (a) Weight normalization within 1e-12 at every step.
    // (b) Softmin concentration at temperature 1e-6.
    // (c) Double-integrator episode cost within 10% of a grid-DP optimum.
    let rho = 4.0;
    let dt = 0.1;
    let w = DMatrix::from_row_slice(2, 3, &[1.0, dt, 0.0, 0.0, 1.0, dt]) * rho;
    let f = w.norm() * 1.01;
    let phi = FeatureMap::custom_into(3, move |s: &State, a: &Action, out: &mut DVector<f64>| {
        let sv = s.as_vector().unwrap();
        let av = a.as_vector().unwrap();
        out[0] = sv[0] / rho;
        out[1] = sv[1] / rho;
        out[2] = av[0].clamp(-1.0, 1.0) / rho;
    });
    let model = TransitionModel::Knr {
        model: KnrModel::new(w, 0.0, f).unwrap(),
        phi,
    };
    let step_cost = |x: f64, v: f64, a: f64| x * x + 0.1 * v * v + 0.1 * a * a;
    let reward: pcmlp::mdp::RewardFn = Arc::new(move |s: &State, a: &Action| {
        let sv = s.as_vector().unwrap();
        -step_cost(sv[0], sv[1], a.as_vector().unwrap()[0])
    });

    let horizon = 30usize;
    let mut cfg = MppiConfig::defaults(1);
    cfg.n_samples = 400;
    cfg.horizon = horizon;
    cfg.temperature = 0.05;
    cfg.noise_cov = DMatrix::identity(1, 1) * 0.4;
    let mut planner = MppiPlanner::new(cfg.clone(), model.clone(), reward.clone(), horizon).unwrap();
    let mut rng = StreamSeed::new(111).rng();
    let mut state = DVector::from_vec(vec![1.0, 0.0]);
    let mut mppi_cost = 0.0;
    let mut max_dev: f64 = 0.0;
    for step in 0..horizon {
        let (a, diag) = planner
            .step_diag(&State::Vector(state.clone()), step, &mut rng)
            .unwrap();
        max_dev = max_dev.max((diag.weight_sum - 1.0).abs());
        let u = a[0].clamp(-1.0, 1.0);
        mppi_cost += step_cost(state[0], state[1], u);
        state = DVector::from_vec(vec![state[0] + dt * state[1], state[1] + dt * u]);
    }
    assert!(max_dev <= 1e-12, "weight normalization deviation {max_dev}");

    // Softmin concentration.
    let mut cold_cfg = cfg.clone();
    cold_cfg.temperature = 1e-6;
    cold_cfg.n_samples = 48;
    let mut cold = MppiPlanner::new(cold_cfg, model, reward, horizon).unwrap();
    let (_, diag) = cold
        .step_diag(&State::Vector(DVector::from_vec(vec![1.0, 0.0])), 0, &mut rng)
        .unwrap();
    let top = diag.weights[diag.argmin_cost];
    assert!(top >= 1.0 - 1e-3, "argmin weight {top}");

    // Grid-DP oracle: bilinear value interpolation over (x, v), 21 actions.
    let (nx, nv, na) = (161usize, 121usize, 21usize);
    let (x_lo, x_hi, v_lo, v_hi) = (-2.0f64, 2.0, -1.5, 1.5);
    let xs: Vec<f64> = (0..nx)
        .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (nx - 1) as f64)
        .collect();
    let vs: Vec<f64> = (0..nv)
        .map(|i| v_lo + (v_hi - v_lo) * i as f64 / (nv - 1) as f64)
        .collect();
    let actions: Vec<f64> = (0..na).map(|i| -1.0 + 2.0 * i as f64 / (na - 1) as f64).collect();
    let interp = |value: &[f64], x: f64, v: f64| -> f64 {
        let fx = ((x - x_lo) / (x_hi - x_lo) * (nx - 1) as f64).clamp(0.0, (nx - 1) as f64);
        let fv = ((v - v_lo) / (v_hi - v_lo) * (nv - 1) as f64).clamp(0.0, (nv - 1) as f64);
        let (i0, j0) = (fx.floor() as usize, fv.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(nx - 1), (j0 + 1).min(nv - 1));
        let (tx, tv) = (fx - i0 as f64, fv - j0 as f64);
        let at = |i: usize, j: usize| value[i * nv + j];
        at(i0, j0) * (1.0 - tx) * (1.0 - tv)
            + at(i1, j0) * tx * (1.0 - tv)
            + at(i0, j1) * (1.0 - tx) * tv
            + at(i1, j1) * tx * tv
    };
    let mut value = vec![0.0f64; nx * nv];
    for _ in 0..horizon {
        let mut next = vec![0.0f64; nx * nv];
        for (i, &x) in xs.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                let mut best = f64::INFINITY;
                for &a in &actions {
                    let c = step_cost(x, v, a)
                        + interp(&value, x + dt * v, (v + dt * a).clamp(v_lo, v_hi));
                    best = best.min(c);
                }
                next[i * nv + j] = best;
            }
        }
        value = next;
    }
    let dp_cost = interp(&value, 1.0, 0.0);
    let rel = (mppi_cost - dp_cost).abs() / dp_cost;
    assert!(
        rel <= 0.10,
        "MPPI cost {mppi_cost:.4} vs DP optimum {dp_cost:.4} ({:.1}% off)",
        rel * 100.0
    );
    println!(
        "PASS criterion 11: MPPI sanity (weights exact, argmin weight {top:.4}, episode cost {mppi_cost:.3} vs DP {dp_cost:.3}, {:.1}% off)",
        rel * 100.0
    );
}

#[test]
fn criterion_12_determinism() {
    // Identical config + seed => byte-identical metrics, across thread counts.
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("cfg.toml");
    std::fs::write(
        &config_path,
        r#"
experiment = "bonus_decay"
seed = 5

[pcmlp]
iterations = 3
cov_samples = 16
mle_samples = 24
eval_rollouts = 2
probe_count = 16
model_error_samples = 8
mppi_samples = 16
mppi_horizon = 6
"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (tag, threads) in [("a", 1usize), ("b", 1), ("c", 2)] {
        let out = dir.path().join(tag);
        let code = cli_run([
            "pcmlp".to_string(),
            "run".into(),
            "--config".into(),
            config_path.display().to_string(),
            "--out".into(),
            out.display().to_string(),
            "--threads".into(),
            threads.to_string(),
        ]);
        assert_eq!(code, 0);
        outputs.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "same thread count differed");
    assert_eq!(outputs[0], outputs[2], "thread counts 1 vs 2 differed");
    // The emitted file parses back to the same rows it encodes.
    let parsed = parse_metrics(std::str::from_utf8(&outputs[0]).unwrap()).unwrap();
    assert_eq!(parsed.len(), 3);
    println!("PASS criterion 12: byte-identical metrics across reruns and thread counts");
}

#[test]
fn lemma_suite_all_pass() {
    // The CLI-facing diagnostic suite agrees with the criteria above.
    let reports = lemmas::lemma_suite(7).unwrap();
    for r in &reports {
        assert!(r.pass, "{} failed: {}", r.name, r.detail);
    }
    println!("PASS lemma suite: {} checks green", reports.len());
}
