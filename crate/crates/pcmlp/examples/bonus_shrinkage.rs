//! Elliptical bonuses shrink monotonically as the policy cover accumulates
//! feature covariance, and the realized information gain stays under the
//! dimension bound.
//!
//! Run with: `cargo run --release --example bonus_shrinkage`

use nalgebra::{DMatrix, DVector};
use pcmlp::cover::{aggregate, information_gain, BonusForm, BonusSpec};
use pcmlp::StreamSeed;
use rand::Rng;

fn main() {
    let d = 6;
    let lambda = 0.1;
    let mut rng = StreamSeed::new(3).rng();
    let probes: Vec<DVector<f64>> = (0..3)
        .map(|_| {
            let v = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
            let n = v.norm();
            v / n.max(1.0)
        })
        .collect();

    let mut covs: Vec<DMatrix<f64>> = Vec::new();
    println!("cover size | bonus at 3 fixed probes | info gain (bound)");
    for n in 1..=10 {
        let v = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
        let v = &v / v.norm().max(1.0);
        covs.push(v.clone() * v.transpose());
        let spec = BonusSpec::new(
            aggregate(&covs, lambda, d).unwrap(),
            1.0,
            10.0,
            lambda,
            BonusForm::MainText,
        )
        .unwrap();
        let bonuses: Vec<f64> = probes.iter().map(|p| spec.bonus(p).unwrap()).collect();
        let gain = information_gain(&covs, lambda).unwrap();
        let bound = d as f64 * (1.0 + n as f64 / lambda).ln();
        println!(
            "    {n:2}     | {:5.2} {:5.2} {:5.2}      | {gain:6.3} ({bound:6.3})",
            bonuses[0], bonuses[1], bonuses[2]
        );
    }
}
