//! Run configuration: TOML files with per-experiment defaults, dotted-path
//! overrides, and a fully-resolved echo for exact reruns. Unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// One of `single`, `bonus_decay`, `c_ablation`, `reward_free`.
    pub experiment: String,
    /// Catalog environment name.
    pub env: String,
    /// `pcmlp` or `odpc`.
    pub algorithm: String,
    pub seed: u64,
    pub out_dir: String,
    /// Worker threads; 0 keeps the library default.
    pub threads: usize,
    pub env_params: EnvParams,
    pub pcmlp: PcmlpSection,
    pub odpc: OdpcSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: "single".into(),
            env: "linear_system".into(),
            algorithm: "pcmlp".into(),
            seed: 0,
            out_dir: "runs/out".into(),
            threads: 0,
            env_params: EnvParams::default(),
            pcmlp: PcmlpSection::default(),
            odpc: OdpcSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvParams {
    /// Construction seed for the environment itself (ground truth, features).
    pub env_seed: u64,
    pub horizon: usize,
    /// Linear system: state/action dimensions and transition noise.
    pub d_s: usize,
    pub d_a: usize,
    pub sigma: f64,
    /// Sparse hill: transition noise scale (0 keeps it deterministic).
    pub noise: f64,
    /// Tabular environment: sizes, candidate count, decoy separation.
    pub n_states: usize,
    pub n_actions: usize,
    pub n_candidates: usize,
    pub decoy_tv: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            env_seed: 0,
            horizon: 0, // 0 = environment's own default
            d_s: 2,
            d_a: 1,
            sigma: 0.02,
            noise: 0.0,
            n_states: 4,
            n_actions: 2,
            n_candidates: 4,
            decoy_tv: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcmlpSection {
    pub iterations: usize,
    pub cov_samples: usize,
    pub mle_samples: usize,
    pub lambda: f64,
    /// `explicit`, `theoretical-knr`, or `theoretical-linmdp`.
    pub bonus_schedule: String,
    /// Base scale when the schedule is `explicit`.
    pub bonus_value: f64,
    /// Ablation coefficient multiplying the scheduled scale.
    pub bonus_coeff: f64,
    /// `main-text` or `clamped-half`.
    pub bonus_form: String,
    /// `mppi` or `tabular`.
    pub planner: String,
    pub mppi_samples: usize,
    pub mppi_horizon: usize,
    pub mppi_temperature: f64,
    /// Isotropic action-noise covariance scale.
    pub mppi_noise_cov: f64,
    /// `knr` or `linmdp`.
    pub model: String,
    /// Regulator model noise; 0 takes the environment's suggestion.
    pub model_sigma: f64,
    /// Regulator Frobenius budget; 0 takes the environment's suggestion.
    pub model_f_budget: f64,
    /// SGD step size; 0 keeps the `F^2 / ((F + B) sqrt(M))` default.
    pub sgd_step_size: f64,
    pub eval_rollouts: usize,
    pub plan_eval_rollouts: usize,
    pub probe_count: usize,
    pub model_error_samples: usize,
    pub reward_free: bool,
}

impl Default for PcmlpSection {
    fn default() -> Self {
        PcmlpSection {
            iterations: 15,
            cov_samples: 64,
            mle_samples: 192,
            lambda: 0.01,
            bonus_schedule: "explicit".into(),
            bonus_value: 1.0,
            bonus_coeff: 1.0,
            bonus_form: "main-text".into(),
            planner: "mppi".into(),
            mppi_samples: 200,
            mppi_horizon: 30,
            mppi_temperature: 0.2,
            mppi_noise_cov: 0.3,
            model: "knr".into(),
            model_sigma: 0.0,
            model_f_budget: 0.0,
            sgd_step_size: 0.0,
            eval_rollouts: 4,
            plan_eval_rollouts: 2,
            probe_count: 256,
            model_error_samples: 128,
            reward_free: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdpcSection {
    pub iterations: usize,
    /// Samples per dataset `M` (two datasets per iteration).
    pub samples: usize,
    /// `lemma` derives the radius from the feasibility bound; `explicit`
    /// takes `radius_value`.
    pub radius_mode: String,
    pub radius_value: f64,
    pub delta: f64,
    pub eval_rollouts: usize,
}

impl Default for OdpcSection {
    fn default() -> Self {
        OdpcSection {
            iterations: 5,
            samples: 500,
            radius_mode: "lemma".into(),
            radius_value: 0.5,
            delta: 0.1,
            eval_rollouts: 8,
        }
    }
}

/// Experiment presets only adjust defaults; the user file and overrides win.
fn preset_table(experiment: &str) -> Result<toml::Table> {
    let mut cfg = RunConfig {
        experiment: experiment.to_string(),
        ..RunConfig::default()
    };
    match experiment {
        "single" => {}
        "bonus_decay" => {
            cfg.env = "linear_system".into();
            cfg.pcmlp.iterations = 15;
            cfg.pcmlp.bonus_value = 2.0;
            // An easy regulator task: a light planner is plenty.
            cfg.pcmlp.mppi_samples = 64;
            cfg.pcmlp.mppi_horizon = 15;
            cfg.pcmlp.cov_samples = 48;
            cfg.pcmlp.mle_samples = 160;
        }
        "c_ablation" => {
            cfg.env = "sparse_hill".into();
            cfg.pcmlp.bonus_value = 1.0;
            cfg.pcmlp.mle_samples = 384;
            cfg.pcmlp.cov_samples = 32;
            cfg.pcmlp.sgd_step_size = 1.0;
            cfg.pcmlp.mppi_samples = 64;
            cfg.pcmlp.mppi_horizon = 25;
            cfg.pcmlp.mppi_noise_cov = 0.5;
            cfg.pcmlp.eval_rollouts = 6;
            cfg.pcmlp.plan_eval_rollouts = 1;
        }
        "reward_free" => {
            cfg.env = "sparse_hill".into();
            cfg.pcmlp.reward_free = true;
            cfg.pcmlp.bonus_value = 1.0;
            cfg.pcmlp.bonus_coeff = 5.0;
            cfg.pcmlp.mle_samples = 384;
            cfg.pcmlp.cov_samples = 32;
            cfg.pcmlp.sgd_step_size = 1.0;
            cfg.pcmlp.mppi_samples = 64;
            cfg.pcmlp.mppi_horizon = 25;
            cfg.pcmlp.mppi_noise_cov = 0.5;
            cfg.pcmlp.eval_rollouts = 6;
            cfg.pcmlp.plan_eval_rollouts = 1;
        }
        other => {
            return Err(Error::config(format!(
                "unknown experiment {other:?} (expected single, bonus_decay, c_ablation, reward_free)"
            )))
        }
    }
    to_table(&cfg)
}

fn to_table(cfg: &RunConfig) -> Result<toml::Table> {
    let text = toml::to_string(cfg).map_err(|e| Error::config(e.to_string()))?;
    text.parse::<toml::Table>()
        .map_err(|e| Error::config(e.to_string()))
}

fn merge_into(base: &mut toml::Table, overlay: &toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_into(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.to_string())
}

fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut current = table;
    for p in &parts[..parts.len() - 1] {
        let entry = current
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override path {key:?} crosses a scalar")))?;
    }
    current.insert(
        parts.last().unwrap().to_string(),
        parse_override_value(raw),
    );
    Ok(())
}

/// Builds the fully-resolved configuration: experiment preset defaults, then
/// the user file, then `key=value` overrides; finally validated against the
/// schema (unknown keys rejected).
pub fn resolve_config(user_toml: &str, overrides: &[String]) -> Result<RunConfig> {
    let user: toml::Table = user_toml
        .parse()
        .map_err(|e| Error::config(format!("config parse error: {e}")))?;

    // The experiment key decides which defaults apply; overrides can set it.
    let mut experiment = user
        .get("experiment")
        .and_then(|v| v.as_str())
        .unwrap_or("single")
        .to_string();
    for o in overrides {
        if let Some(rest) = o.strip_prefix("experiment=") {
            experiment = rest.to_string();
        }
    }

    let mut table = preset_table(&experiment)?;
    merge_into(&mut table, &user);
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {o:?} is not KEY=VALUE")))?;
        apply_override(&mut table, key, value)?;
    }

    let resolved: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::config(format!("invalid configuration: {e}")))?;
    validate(&resolved)?;
    Ok(resolved)
}

pub fn render_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::config(e.to_string()))
}

fn validate(cfg: &RunConfig) -> Result<()> {
    match cfg.algorithm.as_str() {
        "pcmlp" | "odpc" => {}
        other => return Err(Error::config(format!("unknown algorithm {other:?}"))),
    }
    match cfg.pcmlp.bonus_schedule.as_str() {
        "explicit" | "theoretical-knr" | "theoretical-linmdp" => {}
        other => return Err(Error::config(format!("unknown bonus schedule {other:?}"))),
    }
    match cfg.pcmlp.bonus_form.as_str() {
        "main-text" | "clamped-half" => {}
        other => return Err(Error::config(format!("unknown bonus form {other:?}"))),
    }
    match cfg.pcmlp.planner.as_str() {
        "mppi" | "tabular" => {}
        other => return Err(Error::config(format!("unknown planner {other:?}"))),
    }
    match cfg.pcmlp.model.as_str() {
        "knr" | "linmdp" => {}
        other => return Err(Error::config(format!("unknown model family {other:?}"))),
    }
    match cfg.odpc.radius_mode.as_str() {
        "lemma" | "explicit" => {}
        other => return Err(Error::config(format!("unknown radius mode {other:?}"))),
    }
    if !(0.0..1.0).contains(&cfg.odpc.delta) || cfg.odpc.delta == 0.0 {
        return Err(Error::config("odpc.delta must lie in (0,1)"));
    }
    Ok(())
}
