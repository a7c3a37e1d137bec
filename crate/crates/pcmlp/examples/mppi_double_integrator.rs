//! Receding-horizon MPPI on a deterministic double integrator, compared to a
//! discretized dynamic-programming optimum.
//!
//! Run with: `cargo run --release --example mppi_double_integrator`

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pcmlp::features::FeatureMap;
use pcmlp::mdp::{Action, RewardFn, State};
use pcmlp::models::{KnrModel, TransitionModel};
use pcmlp::planners::{MppiConfig, MppiPlanner};
use pcmlp::StreamSeed;

const DT: f64 = 0.1;

fn cost(x: f64, v: f64, a: f64) -> f64 {
    x * x + 0.1 * v * v + 0.1 * a * a
}

fn main() {
    // x' = x + dt v, v' = v + dt a as a regulator model over scaled features.
    let rho = 4.0;
    let w = DMatrix::from_row_slice(2, 3, &[1.0, DT, 0.0, 0.0, 1.0, DT]) * rho;
    let f = w.norm() * 1.01;
    let phi = FeatureMap::custom_into(3, move |s: &State, a: &Action, out: &mut DVector<f64>| {
        let sv = s.as_vector().unwrap();
        out[0] = sv[0] / rho;
        out[1] = sv[1] / rho;
        out[2] = a.as_vector().unwrap()[0].clamp(-1.0, 1.0) / rho;
    });
    let model = TransitionModel::Knr {
        model: KnrModel::new(w, 0.0, f).unwrap(),
        phi,
    };
    let reward: RewardFn = Arc::new(|s: &State, a: &Action| {
        let sv = s.as_vector().unwrap();
        -cost(sv[0], sv[1], a.as_vector().unwrap()[0])
    });

    let horizon = 30;
    let mut cfg = MppiConfig::defaults(1);
    cfg.n_samples = 400;
    cfg.temperature = 0.05;
    cfg.noise_cov = DMatrix::identity(1, 1) * 0.4;
    cfg.horizon = horizon;
    let mut planner = MppiPlanner::new(cfg, model, reward, horizon).unwrap();

    let mut rng = StreamSeed::new(0).rng();
    let mut state = DVector::from_vec(vec![1.0, 0.0]);
    let mut total = 0.0;
    for step in 0..horizon {
        let a = planner
            .step(&State::Vector(state.clone()), step, &mut rng)
            .unwrap();
        let u = a[0].clamp(-1.0, 1.0);
        total += cost(state[0], state[1], u);
        state = DVector::from_vec(vec![state[0] + DT * state[1], state[1] + DT * u]);
        if step % 5 == 0 {
            println!("step {step:2}: x = {:+.3}, v = {:+.3}, a = {u:+.3}", state[0], state[1]);
        }
    }
    println!("MPPI episode cost: {total:.4}");
    println!("grid-DP optimum  : {:.4}", grid_dp_cost(horizon));
}

// Backward induction on a fine (x, v) grid with bilinear interpolation.
fn grid_dp_cost(horizon: usize) -> f64 {
    let (nx, nv, na) = (161usize, 121usize, 21usize);
    let (x_lo, x_hi, v_lo, v_hi) = (-2.0f64, 2.0, -1.5, 1.5);
    let xs: Vec<f64> = (0..nx)
        .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (nx - 1) as f64)
        .collect();
    let vs: Vec<f64> = (0..nv)
        .map(|i| v_lo + (v_hi - v_lo) * i as f64 / (nv - 1) as f64)
        .collect();
    let actions: Vec<f64> = (0..na)
        .map(|i| -1.0 + 2.0 * i as f64 / (na - 1) as f64)
        .collect();
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
                    let c = cost(x, v, a) + interp(&value, x + DT * v, (v + DT * a).clamp(v_lo, v_hi));
                    best = best.min(c);
                }
                next[i * nv + j] = best;
            }
        }
        value = next;
    }
    interp(&value, 1.0, 0.0)
}
