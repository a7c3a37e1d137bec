//! Desk-scale environment catalog: synthetic regulator systems, tabular
//! finite-candidate MDPs, and a sparse-reward hill-climbing task whose
//! control cost defeats non-exploring planners.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::features::{rff_new_scaled, FeatureMap, DEFAULT_RFF_DIM};
use crate::mdp::{Action, ActionSpace, Mdp, State, Trajectory};
use crate::models::{Dynamics, KnrModel, LinearMdpModel, TabularTable, TransitionModel};
use crate::stream::StreamSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvFamily {
    Knr,
    LinMdp,
    BlackBox,
}

/// Discretization used by the coverage metric.
#[derive(Debug, Clone)]
pub enum GridSpec {
    Continuous {
        low: DVector<f64>,
        high: DVector<f64>,
        bins: Vec<usize>,
    },
    Discrete {
        n: usize,
    },
}

impl GridSpec {
    pub fn n_cells(&self) -> usize {
        match self {
            GridSpec::Continuous { bins, .. } => bins.iter().product(),
            GridSpec::Discrete { n } => *n,
        }
    }

    pub fn cell_of(&self, state: &State) -> Result<usize> {
        match self {
            GridSpec::Discrete { n } => {
                let s = state.as_index()?;
                if s >= *n {
                    return Err(Error::invalid("state outside the grid"));
                }
                Ok(s)
            }
            GridSpec::Continuous { low, high, bins } => {
                let v = state.as_vector()?;
                let mut cell = 0usize;
                for i in 0..bins.len() {
                    let t = ((v[i] - low[i]) / (high[i] - low[i])).clamp(0.0, 1.0);
                    let b = ((t * bins[i] as f64) as usize).min(bins[i] - 1);
                    cell = cell * bins[i] + b;
                }
                Ok(cell)
            }
        }
    }
}

/// Fraction of grid cells visited by any state in the trajectories.
pub fn coverage_metric(trajectories: &[Trajectory], grid: &GridSpec) -> Result<f64> {
    let mut visited = vec![false; grid.n_cells()];
    for traj in trajectories {
        for step in &traj.steps {
            visited[grid.cell_of(&step.state)?] = true;
            visited[grid.cell_of(&step.next_state)?] = true;
        }
    }
    Ok(visited.iter().filter(|v| **v).count() as f64 / grid.n_cells() as f64)
}

#[derive(Clone)]
pub struct GoalSpec {
    pub name: String,
    pub reached: Arc<dyn Fn(&State) -> bool + Send + Sync>,
}

impl GoalSpec {
    pub fn reached_in(&self, traj: &Trajectory) -> bool {
        traj.steps
            .iter()
            .any(|s| (self.reached)(&s.state) || (self.reached)(&s.next_state))
    }
}

/// A named environment plus everything the algorithms need around it: the
/// feature map, the ground truth (when synthetic), candidate sets for
/// finite-class models, a coverage grid, and a goal predicate.
#[derive(Clone)]
pub struct CatalogEnv {
    pub name: String,
    pub family: EnvFamily,
    pub mdp: Mdp,
    pub phi: FeatureMap,
    pub truth: Option<TransitionModel>,
    /// Candidate set for finite-class model fitting (tabular environments).
    pub candidates: Option<LinearMdpModel>,
    pub truth_index: Option<usize>,
    pub grid: Option<GridSpec>,
    pub goal: Option<GoalSpec>,
    /// Suggested regulator model-class parameters `(sigma, F)`.
    pub knr_defaults: Option<(f64, f64)>,
}

/// Linear system `s' = A s + B a + noise` realized as a regulator model over
/// saturating normalized `concat(s, a)` features. `A` is scaled to spectral
/// norm 0.8 and `B` to 0.4, which bounds reachable states and lets the
/// feature normalization hold deterministically.
pub fn make_linear_system(d_s: usize, d_a: usize, sigma: f64, seed: u64) -> Result<CatalogEnv> {
    make_linear_system_with(d_s, d_a, sigma, 20, seed)
}

pub fn make_linear_system_with(
    d_s: usize,
    d_a: usize,
    sigma: f64,
    horizon: usize,
    seed: u64,
) -> Result<CatalogEnv> {
    if d_s == 0 || d_a == 0 {
        return Err(Error::invalid("dimensions must be positive"));
    }
    if sigma < 0.0 {
        return Err(Error::invalid("sigma must be nonnegative"));
    }
    let mut rng = StreamSeed::new(seed).labeled("linear_system").rng();
    let mut a = DMatrix::from_fn(d_s, d_s, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let top = a.singular_values().max();
    a *= 0.8 / top;
    let mut b = DMatrix::from_fn(d_s, d_a, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let top = b.singular_values().max();
    b *= 0.4 / top;

    // Contraction bound on reachable state norms, with noise tails folded in.
    let noise_tail = sigma * ((d_s as f64).sqrt() + 6.0);
    let r_state = (0.4 * (d_a as f64).sqrt() + noise_tail) / 0.2;
    let rho = 1.5 * (r_state * r_state + d_a as f64).sqrt();

    let mut w = DMatrix::zeros(d_s, d_s + d_a);
    w.view_mut((0, 0), (d_s, d_s)).copy_from(&a);
    w.view_mut((0, d_s), (d_s, d_a)).copy_from(&b);
    w *= rho;
    let f_budget = w.norm() * 1.05;

    let phi = saturating_concat_features(d_s, d_a, rho);
    let truth = TransitionModel::Knr {
        model: KnrModel::new(w, sigma, f_budget)?,
        phi: phi.clone(),
    };

    let mut dir = DVector::from_fn(d_s, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    dir /= dir.norm();
    let s0 = State::Vector(dir * (r_state / 3.0));

    let r_sq = r_state * r_state;
    let reward = Arc::new(move |s: &State, _: &Action| {
        let n2 = s.as_vector().map(DVector::norm_squared).unwrap_or(f64::MAX);
        (1.0 - n2 / r_sq).max(0.0)
    });

    let mdp = Mdp::new(
        horizon,
        s0,
        reward,
        Dynamics::Model(truth.clone()),
        ActionSpace::Box {
            low: DVector::from_element(d_a, -1.0),
            high: DVector::from_element(d_a, 1.0),
        },
    )?;

    let env = CatalogEnv {
        name: "linear_system".into(),
        family: EnvFamily::Knr,
        mdp,
        phi,
        truth: Some(truth),
        candidates: None,
        truth_index: None,
        grid: None,
        goal: None,
        knr_defaults: Some((sigma.max(1e-3), f_budget)),
    };
    realizability_check_knr(&env)?;
    Ok(env)
}

fn saturating_concat_features(d_s: usize, d_a: usize, rho: f64) -> FeatureMap {
    FeatureMap::custom_into(d_s + d_a, move |s: &State, a: &Action, out: &mut DVector<f64>| {
        let sv = s.as_vector().expect("continuous state");
        let av = a.as_vector().expect("continuous action");
        out.rows_mut(0, sv.len()).copy_from(sv);
        out.rows_mut(sv.len(), av.len()).copy_from(av);
        let n = out.norm();
        *out /= rho.max(n);
    })
}

fn realizability_check_knr(env: &CatalogEnv) -> Result<()> {
    let Some(TransitionModel::Knr { model, phi }) = &env.truth else {
        return Err(Error::invalid("regulator env without a regulator truth"));
    };
    let mut rng = StreamSeed::new(0).labeled("realizability").rng();
    for _ in 0..32 {
        let s = match &env.mdp.initial_state {
            State::Vector(v) => State::Vector(DVector::from_fn(v.len(), |_, _| {
                rng.random::<f64>() * 2.0 - 1.0
            })),
            s => s.clone(),
        };
        let a = env.mdp.action_space.sample_uniform(&mut rng);
        let f = phi.eval(&s, &a)?;
        if f.norm() > 1.0 + 1e-12 {
            return Err(Error::invalid("feature norm exceeds 1 on probe"));
        }
        model.predict(&f)?;
    }
    Ok(())
}

pub const HILL_POWER: f64 = 0.003;
pub const HILL_GRAVITY: f64 = 0.0045;
pub const HILL_VMAX: f64 = 0.1;
pub const HILL_GOAL: f64 = 0.45;
pub const HILL_PMIN: f64 = -1.2;
pub const HILL_PMAX: f64 = 0.6;

/// Sparse-reward hill climb: 2-D `(position, velocity)` state, scalar action
/// in `[-1, 1]`, an underpowered motor, and no reward signal except a small
/// control-cost baseline until the goal position is reached (the goal
/// absorbs). Driving straight at the goal stalls; pumping the oscillation
/// succeeds in about 80 steps.
pub fn make_sparse_hill(seed: u64) -> Result<CatalogEnv> {
    make_sparse_hill_with(seed, 100, 0.0)
}

pub fn make_sparse_hill_with(seed: u64, horizon: usize, noise: f64) -> Result<CatalogEnv> {
    let step = move |s: &State, a: &Action, rng: &mut crate::mdp::RngStream| -> Result<State> {
        let sv = s.as_vector()?;
        let (p, v) = (sv[0], sv[1]);
        if p >= HILL_GOAL {
            // Absorbing goal.
            return Ok(State::Vector(DVector::from_vec(vec![HILL_GOAL, 0.0])));
        }
        let u = a.as_vector()?[0].clamp(-1.0, 1.0);
        let mut jitter = 0.0;
        if noise > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            jitter = noise * z;
        }
        let mut v2 = (v + HILL_POWER * u - HILL_GRAVITY * (3.0 * p).cos() + jitter)
            .clamp(-HILL_VMAX, HILL_VMAX);
        let mut p2 = p + v2;
        if p2 < HILL_PMIN {
            p2 = HILL_PMIN;
            v2 = v2.max(0.0);
        }
        if p2 > HILL_PMAX {
            p2 = HILL_PMAX;
        }
        Ok(State::Vector(DVector::from_vec(vec![p2, v2])))
    };

    let reward = Arc::new(|s: &State, a: &Action| {
        let sv = s.as_vector().expect("continuous state");
        if sv[0] >= HILL_GOAL {
            1.0
        } else {
            let u = a.as_vector().map(|v| v[0]).unwrap_or(0.0).clamp(-1.0, 1.0);
            0.05 * (1.0 - u * u)
        }
    });

    let mdp = Mdp::new(
        horizon,
        State::Vector(DVector::from_vec(vec![-0.5, 0.0])),
        reward,
        Dynamics::BlackBox(Arc::new(step)),
        ActionSpace::Box {
            low: DVector::from_element(1, -1.0),
            high: DVector::from_element(1, 1.0),
        },
    )?;

    // The hill is a cosine-augmented linear system, so the regulator class
    // realizes it exactly over these normalized structured features (up to
    // the clamps at the walls). A Fourier alternative is available through
    // `hill_rff_features` for misspecified-model experiments.
    let _ = seed;
    let phi = hill_structured_features();

    Ok(CatalogEnv {
        name: "sparse_hill".into(),
        family: EnvFamily::BlackBox,
        mdp,
        phi,
        truth: None,
        candidates: None,
        truth_index: None,
        grid: Some(GridSpec::Continuous {
            low: DVector::from_vec(vec![HILL_PMIN, -HILL_VMAX]),
            high: DVector::from_vec(vec![HILL_PMAX, HILL_VMAX]),
            bins: vec![12, 8],
        }),
        goal: Some(GoalSpec {
            name: "position >= 0.45".into(),
            reached: Arc::new(|s: &State| s.as_vector().map(|v| v[0] >= HILL_GOAL).unwrap_or(false)),
        }),
        knr_defaults: Some((0.01, 6.0)),
    })
}

/// Normalized `(1, p, v, a, cos(3p)) / sqrt(5)` features for the hill.
pub fn hill_structured_features() -> FeatureMap {
    FeatureMap::custom_into(5, |s: &State, a: &Action, out: &mut DVector<f64>| {
        let sv = s.as_vector().expect("continuous state");
        let (p, v) = (sv[0], sv[1]);
        let u = a.as_vector().map(|x| x[0]).unwrap_or(0.0).clamp(-1.0, 1.0);
        let inv = 1.0 / 5.0f64.sqrt();
        out[0] = inv;
        out[1] = (p / 1.2).clamp(-1.0, 1.0) * inv;
        out[2] = (v / HILL_VMAX).clamp(-1.0, 1.0) * inv;
        out[3] = u * inv;
        out[4] = (3.0 * p).cos() * inv;
    })
}

/// Fourier features over the rescaled hill inputs, for runs that want a
/// misspecified kernel model instead of the structured one.
pub fn hill_rff_features(seed: u64) -> Result<FeatureMap> {
    let shift = DVector::from_vec(vec![(HILL_PMIN + HILL_PMAX) / 2.0, 0.0, 0.0]);
    let scale = DVector::from_vec(vec![(HILL_PMAX - HILL_PMIN) / 2.0, HILL_VMAX, 1.0]);
    rff_new_scaled(DEFAULT_RFF_DIM, 1.0, &shift, &scale, seed)
}

/// Hand-scripted oscillation policy for the hill: accelerate with the
/// current velocity direction. Reaches the goal in well under 100 steps.
pub fn hill_bang_bang_policy() -> crate::mdp::FnPolicy {
    crate::mdp::FnPolicy {
        f: Arc::new(|s: &State, _| {
            let v = s.as_vector().expect("continuous state")[1];
            Action::Vector(DVector::from_element(1, if v >= 0.0 { 1.0 } else { -1.0 }))
        }),
    }
}

/// Random tabular MDP embedded as a linear MDP over one-hot features, plus a
/// finite candidate set containing the truth and decoys at a configurable
/// per-row total-variation distance. The truth sits at a seed-dependent index.
pub fn make_tabular_linmdp(
    n_states: usize,
    n_actions: usize,
    n_candidates: usize,
    decoy_tv: f64,
    horizon: usize,
    seed: u64,
) -> Result<CatalogEnv> {
    if n_states < 2 || n_actions == 0 || n_candidates == 0 {
        return Err(Error::invalid("need at least 2 states, 1 action, 1 candidate"));
    }
    if decoy_tv < 0.0 || decoy_tv > 1.0 {
        return Err(Error::invalid("decoy TV must lie in [0, 1]"));
    }
    let mut rng = StreamSeed::new(seed).labeled("tabular_linmdp").rng();

    // Truth: random rows with mass bounded away from the simplex corners so
    // decoy transfers stay feasible.
    let rows: Vec<DVector<f64>> = (0..n_states * n_actions)
        .map(|_| {
            let mut v = DVector::from_fn(n_states, |_, _| 0.2 - f64::ln(rng.random::<f64>()));
            v /= v.sum();
            v
        })
        .collect();
    let truth_table = TabularTable::new(n_states, n_actions, rows.clone())?;

    // Decoys: move decoy_tv mass from each row's argmax to a decoy-specific
    // receiver, giving an exact per-row TV of decoy_tv against the truth.
    let truth_index = rng.random_range(0..n_candidates);
    let mut tables: Vec<Vec<DVector<f64>>> = Vec::with_capacity(n_candidates);
    let mut decoy_id = 0usize;
    for ci in 0..n_candidates {
        if ci == truth_index {
            tables.push(rows.clone());
            continue;
        }
        let mut decoy_rows = rows.clone();
        for row in &mut decoy_rows {
            let donor = row.argmax().0;
            let receiver = (donor + 1 + decoy_id % (n_states - 1)) % n_states;
            if row[donor] < decoy_tv {
                return Err(Error::invalid("row too flat for the requested TV gap"));
            }
            row[donor] -= decoy_tv;
            row[receiver] += decoy_tv;
        }
        tables.push(decoy_rows);
        decoy_id += 1;
    }

    let d = n_states * n_actions;
    let candidates: Vec<DMatrix<f64>> = tables
        .iter()
        .map(|rows| {
            let mut mu = DMatrix::zeros(n_states, d);
            for (pair, row) in rows.iter().enumerate() {
                for (sp, p) in row.iter().enumerate() {
                    mu[(sp, pair)] = *p;
                }
            }
            mu
        })
        .collect();
    let phi = FeatureMap::OneHot {
        n_states,
        n_actions,
    };
    let linmdp = LinearMdpModel::new(candidates, truth_index, phi.clone(), n_states, n_actions)?;

    let reward_values: Vec<f64> = (0..n_states * n_actions)
        .map(|_| rng.random::<f64>())
        .collect();
    let na = n_actions;
    let reward = Arc::new(move |s: &State, a: &Action| {
        reward_values[s.as_index().unwrap() * na + a.as_index().unwrap()]
    });

    let mdp = Mdp::new(
        horizon,
        State::Index(0),
        reward,
        Dynamics::Model(TransitionModel::Tabular(truth_table.clone())),
        ActionSpace::Discrete(n_actions),
    )?;

    Ok(CatalogEnv {
        name: "tabular_linmdp".into(),
        family: EnvFamily::LinMdp,
        mdp,
        phi,
        truth: Some(TransitionModel::Tabular(truth_table)),
        candidates: Some(linmdp),
        truth_index: Some(truth_index),
        grid: Some(GridSpec::Discrete { n: n_states }),
        goal: None,
        knr_defaults: None,
    })
}

/// The named environments the CLI can instantiate, with one-line summaries.
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "linear_system",
            "stable linear dynamics with Gaussian noise; regulator model class; quadratic-in-state reward",
        ),
        (
            "sparse_hill",
            "2-D underpowered hill climb; control-cost baseline, absorbing goal reward; exploration required",
        ),
        (
            "tabular_linmdp",
            "random tabular MDP with a finite candidate set (truth + TV-separated decoys) over one-hot features",
        ),
    ]
}
