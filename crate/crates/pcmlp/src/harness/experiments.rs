//! Config-driven experiment execution: environment construction, algorithm
//! dispatch, metrics/summary emission, and the ablation sweep.

use std::fs;
use std::path::{Path, PathBuf};

use crate::cover::BonusForm;
use crate::envs::{
    make_linear_system_with, make_sparse_hill_with, make_tabular_linmdp, CatalogEnv,
};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::metrics::{emit_metrics, CsvRecord};
use crate::models::TabularTable;
use crate::odpc::{feasibility_radius, run_odpc, OdpcConfig};
use crate::pcmlp::{
    run_pcmlp, BonusConfig, BonusSchedule, ModelClass, PcmlpConfig, PcmlpRun, SgdSettings,
};
use crate::planners::{MppiConfig, PlannerChoice, PolicySet};
use nalgebra::DMatrix;

pub struct ExperimentOutcome {
    /// `key: value` pairs written to the summary file, in order.
    pub summary: Vec<(String, String)>,
    pub metrics_files: Vec<PathBuf>,
}

pub fn build_env(cfg: &RunConfig) -> Result<CatalogEnv> {
    let p = &cfg.env_params;
    match cfg.env.as_str() {
        "linear_system" => {
            let horizon = if p.horizon == 0 { 20 } else { p.horizon };
            make_linear_system_with(p.d_s, p.d_a, p.sigma, horizon, p.env_seed)
        }
        "sparse_hill" => {
            let horizon = if p.horizon == 0 { 100 } else { p.horizon };
            make_sparse_hill_with(p.env_seed, horizon, p.noise)
        }
        "tabular_linmdp" => {
            let horizon = if p.horizon == 0 { 3 } else { p.horizon };
            make_tabular_linmdp(
                p.n_states,
                p.n_actions,
                p.n_candidates,
                p.decoy_tv,
                horizon,
                p.env_seed,
            )
        }
        other => Err(Error::config(format!("unknown environment {other:?}"))),
    }
}

fn build_model_class(cfg: &RunConfig, env: &CatalogEnv) -> Result<ModelClass> {
    match cfg.pcmlp.model.as_str() {
        "knr" => {
            let (env_sigma, env_f) = env.knr_defaults.unwrap_or((0.05, 5.0));
            let sigma = if cfg.pcmlp.model_sigma > 0.0 {
                cfg.pcmlp.model_sigma
            } else {
                env_sigma
            };
            let f_budget = if cfg.pcmlp.model_f_budget > 0.0 {
                cfg.pcmlp.model_f_budget
            } else {
                env_f
            };
            let mut sgd = SgdSettings::default();
            if cfg.pcmlp.sgd_step_size > 0.0 {
                sgd.step_size = Some(cfg.pcmlp.sgd_step_size);
            }
            Ok(ModelClass::Knr {
                phi: env.phi.clone(),
                sigma,
                f_budget,
                sgd,
            })
        }
        "linmdp" => Ok(ModelClass::LinMdp {
            model: env.candidates.clone().ok_or_else(|| {
                Error::config(format!(
                    "environment {:?} has no finite candidate set",
                    env.name
                ))
            })?,
        }),
        other => Err(Error::config(format!("unknown model family {other:?}"))),
    }
}

fn build_pcmlp_config(cfg: &RunConfig, env: &CatalogEnv) -> Result<PcmlpConfig> {
    let planner = match cfg.pcmlp.planner.as_str() {
        "tabular" => PlannerChoice::TabularDp,
        "mppi" => {
            let d_a = match &env.mdp.action_space {
                crate::mdp::ActionSpace::Box { low, .. } => low.len(),
                crate::mdp::ActionSpace::Discrete(_) => {
                    return Err(Error::config(
                        "the sampling planner needs a continuous action space",
                    ))
                }
            };
            PlannerChoice::Mppi(MppiConfig {
                n_samples: cfg.pcmlp.mppi_samples,
                horizon: cfg.pcmlp.mppi_horizon,
                noise_cov: DMatrix::identity(d_a, d_a) * cfg.pcmlp.mppi_noise_cov,
                temperature: cfg.pcmlp.mppi_temperature,
            })
        }
        other => return Err(Error::config(format!("unknown planner {other:?}"))),
    };
    let schedule = match cfg.pcmlp.bonus_schedule.as_str() {
        "explicit" => BonusSchedule::Explicit(cfg.pcmlp.bonus_value),
        "theoretical-knr" => BonusSchedule::TheoreticalKnr,
        "theoretical-linmdp" => BonusSchedule::TheoreticalLinMdp,
        other => return Err(Error::config(format!("unknown bonus schedule {other:?}"))),
    };
    let form = match cfg.pcmlp.bonus_form.as_str() {
        "main-text" => BonusForm::MainText,
        "clamped-half" => BonusForm::ClampedHalf,
        other => return Err(Error::config(format!("unknown bonus form {other:?}"))),
    };
    Ok(PcmlpConfig {
        iterations: cfg.pcmlp.iterations,
        cov_samples: cfg.pcmlp.cov_samples,
        mle_samples: cfg.pcmlp.mle_samples,
        lambda: cfg.pcmlp.lambda,
        bonus: BonusConfig {
            schedule,
            coeff: cfg.pcmlp.bonus_coeff,
            form,
        },
        planner,
        reward_free: cfg.pcmlp.reward_free,
        eval_rollouts: cfg.pcmlp.eval_rollouts,
        plan_eval_rollouts: cfg.pcmlp.plan_eval_rollouts,
        probe_count: cfg.pcmlp.probe_count,
        model_error_samples: cfg.pcmlp.model_error_samples,
        seed: cfg.seed,
    })
}

fn run_pcmlp_arm(cfg: &RunConfig, env: &CatalogEnv) -> Result<PcmlpRun> {
    let model_class = build_model_class(cfg, env)?;
    let pcmlp_cfg = build_pcmlp_config(cfg, env)?;
    run_pcmlp(&pcmlp_cfg, env, &model_class)
}

fn pcmlp_summary(run: &PcmlpRun, prefix: &str, summary: &mut Vec<(String, String)>) {
    let best = &run.records[run.best_index.saturating_sub(1).min(run.records.len() - 1)];
    summary.push((
        format!("{prefix}best_value"),
        format!("{:.9e}", best.value_true_mean),
    ));
    summary.push((format!("{prefix}best_iteration"), best.iteration.to_string()));
    if let Some(cov) = run.records.last().and_then(|r| r.coverage) {
        summary.push((format!("{prefix}final_coverage"), format!("{cov:.9e}")));
    }
    summary.push((
        format!("{prefix}goal_reached"),
        match run.goal_reached_at {
            Some(n) => format!("1 (iteration {n})"),
            None => "0".into(),
        },
    ));
    let first = run.records.first().map(|r| r.avg_bonus_per_step).unwrap_or(0.0);
    let last = run.records.last().map(|r| r.avg_bonus_per_step).unwrap_or(0.0);
    if first > 0.0 {
        summary.push((
            format!("{prefix}bonus_decay_ratio"),
            format!("{:.9e}", last / first),
        ));
    }
}

fn write_metrics(path: &Path, records: &[CsvRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, emit_metrics(records))?;
    Ok(())
}

fn odpc_tables(env: &CatalogEnv) -> Result<Vec<TabularTable>> {
    Ok(env
        .candidates
        .as_ref()
        .ok_or_else(|| Error::config("the optimistic algorithm needs a finite candidate set"))?
        .candidate_tables()
        .to_vec())
}

pub fn run_experiment(cfg: &RunConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    fs::create_dir_all(out_dir)?;
    let mut summary: Vec<(String, String)> = vec![
        ("experiment".into(), cfg.experiment.clone()),
        ("env".into(), cfg.env.clone()),
        ("algorithm".into(), cfg.algorithm.clone()),
        ("seed".into(), cfg.seed.to_string()),
    ];
    let mut metrics_files = Vec::new();

    match (cfg.experiment.as_str(), cfg.algorithm.as_str()) {
        ("c_ablation", "pcmlp") => {
            // Bonus-coefficient sweep along the published ablation axis.
            for coeff in [0.0, 0.1, 1.0, 5.0] {
                let mut arm_cfg = cfg.clone();
                arm_cfg.pcmlp.bonus_coeff = coeff;
                let env = build_env(&arm_cfg)?;
                let run = run_pcmlp_arm(&arm_cfg, &env)?;
                let tag = format!("c{coeff}").replace('.', "_");
                let path = out_dir.join(format!("arm_{tag}")).join("metrics.csv");
                let rows: Vec<CsvRecord> = run.records.iter().map(CsvRecord::from).collect();
                write_metrics(&path, &rows)?;
                metrics_files.push(path);
                pcmlp_summary(&run, &format!("arm_{tag}."), &mut summary);
            }
        }
        (_, "pcmlp") => {
            let env = build_env(cfg)?;
            let run = run_pcmlp_arm(cfg, &env)?;
            let path = out_dir.join("metrics.csv");
            let rows: Vec<CsvRecord> = run.records.iter().map(CsvRecord::from).collect();
            write_metrics(&path, &rows)?;
            metrics_files.push(path);
            pcmlp_summary(&run, "", &mut summary);
        }
        (_, "odpc") => {
            let env = build_env(cfg)?;
            let tables = odpc_tables(&env)?;
            let radius = match cfg.odpc.radius_mode.as_str() {
                "explicit" => cfg.odpc.radius_value,
                _ => feasibility_radius(
                    tables.len(),
                    cfg.odpc.iterations,
                    cfg.odpc.samples,
                    cfg.odpc.delta,
                ),
            };
            let odpc_cfg = OdpcConfig {
                iterations: cfg.odpc.iterations,
                samples_per_dataset: cfg.odpc.samples,
                radius,
                eval_rollouts: cfg.odpc.eval_rollouts,
                seed: cfg.seed,
            };
            let run = run_odpc(&tables, &PolicySet::All, &env.mdp, &odpc_cfg, env.truth_index)?;
            let path = out_dir.join("metrics.csv");
            let rows: Vec<CsvRecord> = run.records.iter().map(CsvRecord::from).collect();
            write_metrics(&path, &rows)?;
            metrics_files.push(path);
            let feasible = run
                .records
                .iter()
                .filter(|r| r.feasible == Some(true))
                .count();
            summary.push(("radius".into(), format!("{radius:.9e}")));
            summary.push((
                "feasibility_rate".into(),
                format!("{:.9e}", feasible as f64 / run.records.len() as f64),
            ));
            let best = run
                .records
                .iter()
                .map(|r| r.value_true_mean)
                .fold(f64::NEG_INFINITY, f64::max);
            summary.push(("best_value".into(), format!("{best:.9e}")));
        }
        (exp, alg) => {
            return Err(Error::config(format!(
                "experiment {exp:?} does not support algorithm {alg:?}"
            )))
        }
    }

    let summary_text: String = summary
        .iter()
        .map(|(k, v)| format!("{k}: {v}\n"))
        .collect();
    fs::write(out_dir.join("summary"), summary_text)?;
    Ok(ExperimentOutcome {
        summary,
        metrics_files,
    })
}
