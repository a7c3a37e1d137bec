//! Projected single-pass SGD for regulator weights: the measured risk decays
//! with the sample size.
//!
//! Run with: `cargo run --release --example fit_regulator_sgd`

use nalgebra::{DMatrix, DVector};
use pcmlp::mle::{fit_knr_sgd, KnrDataset, SgdConfig};
use pcmlp::models::state_norm_bound;
use pcmlp::StreamSeed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let d = 4;
    let d_s = 2;
    let sigma = 0.1;
    let mut rng = StreamSeed::new(42).rng();

    // Fixed feature support so the risk has an exact second-moment form.
    let support: Vec<DVector<f64>> = (0..64)
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

    println!("risk E||(W_hat - W*) phi||^2 by sample size:");
    for m in [100usize, 1_000, 10_000] {
        let data = KnrDataset {
            samples: (0..m)
                .map(|_| {
                    let phi = support[rng.random_range(0..support.len())].clone();
                    let mut y = &w_star * &phi;
                    for v in y.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v += sigma * z;
                    }
                    (phi, y)
                })
                .collect(),
        };
        let b = state_norm_bound(1.0, sigma, d_s, m, 0.01).unwrap();
        let fit = fit_knr_sgd(&data, &SgdConfig::new(1.0, b), sigma).unwrap();
        let delta = fit.weights() - &w_star;
        let risk = support
            .iter()
            .map(|p| (&delta * p).norm_squared())
            .sum::<f64>()
            / support.len() as f64;
        println!("  M = {m:6}: risk {risk:.6}  (||W_hat||_F = {:.3})", fit.weights().norm());
    }
}
