//! Command-line harness: config resolution, experiment dispatch, metrics
//! and summary emission, the lemma diagnostic suite, and eluder-instance
//! evaluation.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

pub mod config;
pub mod experiments;
pub mod lemmas;
pub mod metrics;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mdp::TabularPolicy;
use crate::models::TabularTable;
use crate::odpc::{eluder_dimension, EluderInstance, EluderSearch};

pub use config::{resolve_config, RunConfig};
pub use experiments::run_experiment;
pub use lemmas::lemma_suite;
pub use metrics::{emit_metrics, parse_metrics, CsvRecord, METRICS_HEADER};

#[derive(Parser)]
#[command(
    name = "pcmlp",
    version,
    about = "Policy-cover model-based RL experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config-driven experiment; writes metrics.csv, resolved_config,
    /// and summary into the output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-path overrides, e.g. `pcmlp.iterations=5`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads (default: config, then PCMLP_THREADS, then all).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the lemma diagnostic suite and print one line per check.
    Lemmas {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the environment catalog.
    ListEnvs,
    /// Compute the distributional eluder dimension of an instance file.
    Eluder {
        #[arg(long)]
        instance: PathBuf,
    },
}

pub fn cli_run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e @ (Error::Config(_) | Error::Parse(_))) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            mut overrides,
            threads,
        } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::config(format!("cannot read {}: {e}", config.display())))?;
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            if let Some(o) = &out {
                overrides.push(format!("out_dir={}", o.display()));
            }
            if let Some(t) = threads {
                overrides.push(format!("threads={t}"));
            } else if let Ok(t) = std::env::var("PCMLP_THREADS") {
                let t: usize = t
                    .parse()
                    .map_err(|_| Error::config("PCMLP_THREADS must be an integer"))?;
                overrides.push(format!("threads={t}"));
            }
            let resolved = resolve_config(&text, &overrides)?;
            let out_dir = PathBuf::from(&resolved.out_dir);
            fs::create_dir_all(&out_dir)?;
            fs::write(
                out_dir.join("resolved_config"),
                config::render_config(&resolved)?,
            )?;
            if resolved.threads > 0 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(resolved.threads)
                    .build()
                    .map_err(|e| Error::Numeric(e.to_string()))?;
                pool.install(|| run_experiment(&resolved, &out_dir))?;
            } else {
                run_experiment(&resolved, &out_dir)?;
            }
            println!("wrote {}", out_dir.display());
            Ok(0)
        }
        Command::Lemmas { seed } => {
            let reports = lemma_suite(seed)?;
            let mut all_pass = true;
            for r in &reports {
                println!(
                    "{} {} — {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                all_pass &= r.pass;
            }
            Ok(if all_pass { 0 } else { 2 })
        }
        Command::ListEnvs => {
            for (name, desc) in crate::envs::catalog() {
                println!("{name:<16} {desc}");
            }
            Ok(0)
        }
        Command::Eluder { instance } => {
            let text = fs::read_to_string(&instance)
                .map_err(|e| Error::config(format!("cannot read {}: {e}", instance.display())))?;
            let (inst, search) = parse_eluder_instance(&text)?;
            let result = eluder_dimension(&inst, &search)?;
            println!(
                "eluder_dimension: {}{}{}",
                result.length,
                if result.capped { " (length cap reached)" } else { "" },
                if result.budget_exhausted {
                    " (node budget exhausted; lower bound)"
                } else {
                    ""
                }
            );
            Ok(0)
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EluderFile {
    epsilon: f64,
    horizon: usize,
    initial_state: usize,
    n_states: usize,
    n_actions: usize,
    truth: Vec<Vec<f64>>,
    candidates: Vec<Vec<Vec<f64>>>,
    policies: Vec<Vec<Vec<usize>>>,
    #[serde(default = "default_max_length")]
    max_length: usize,
    #[serde(default = "default_true")]
    allow_repetition: bool,
    #[serde(default = "default_budget")]
    node_budget: usize,
}

fn default_max_length() -> usize {
    16
}

fn default_true() -> bool {
    true
}

fn default_budget() -> usize {
    10_000
}

fn rows_to_table(rows: &[Vec<f64>], ns: usize, na: usize) -> Result<TabularTable> {
    let vecs = rows
        .iter()
        .map(|r| nalgebra::DVector::from_vec(r.clone()))
        .collect();
    TabularTable::new(ns, na, vecs)
}

pub fn parse_eluder_instance(text: &str) -> Result<(EluderInstance, EluderSearch)> {
    let file: EluderFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("instance file: {e}")))?;
    let truth = rows_to_table(&file.truth, file.n_states, file.n_actions)?;
    let candidates = file
        .candidates
        .iter()
        .map(|c| rows_to_table(c, file.n_states, file.n_actions))
        .collect::<Result<Vec<_>>>()?;
    let policies = file
        .policies
        .iter()
        .map(|p| TabularPolicy::new(p.clone()))
        .collect();
    let inst = EluderInstance::new(
        truth,
        candidates,
        policies,
        file.horizon,
        file.initial_state,
        file.epsilon,
    )?;
    let search = EluderSearch {
        max_length: file.max_length,
        allow_repetition: file.allow_repetition,
        node_budget: file.node_budget,
    };
    Ok((inst, search))
}
