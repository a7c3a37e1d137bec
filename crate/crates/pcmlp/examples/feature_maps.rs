//! Random Fourier features approximating the RBF kernel, one-hot tabular
//! features, and the plain-text serialization round trip.
//!
//! Run with: `cargo run --release --example feature_maps`

use nalgebra::DVector;
use pcmlp::features::{one_hot, rff_new, FeatureMap, DEFAULT_RFF_DIM};
use pcmlp::mdp::{Action, State};

fn main() {
    let bw = 0.8;
    let x = State::Vector(DVector::from_vec(vec![0.3, -0.2]));
    let a = Action::Vector(DVector::zeros(0));

    println!("kernel approximation at d = 512 (2 phi(x).phi(y) vs RBF):");
    for dist_frac in [0.5, 1.0, 2.0] {
        let shift = bw * dist_frac / 2.0f64.sqrt();
        let y = State::Vector(DVector::from_vec(vec![0.3 + shift, -0.2 - shift]));
        let exact = (-0.5 * dist_frac * dist_frac).exp();
        let mut acc = 0.0;
        let n_maps = 50;
        for seed in 0..n_maps {
            let map = rff_new(2, 512, bw, seed).unwrap();
            acc += map.eval(&x, &a).unwrap().dot(&map.eval(&y, &a).unwrap());
        }
        println!(
            "  ||x-y|| = {:.2} bw: approx {:.4}, exact {exact:.4}",
            dist_frac,
            2.0 * acc / n_maps as f64
        );
    }

    let map = rff_new(2, DEFAULT_RFF_DIM, bw, 7).unwrap();
    let f = map.eval(&x, &a).unwrap();
    println!("default dimension {}, ||phi|| = {:.4}", map.dim(), f.norm());

    let text = map.to_text().unwrap();
    let back = FeatureMap::from_text(&text).unwrap();
    let same = (map.eval(&x, &a).unwrap() - back.eval(&x, &a).unwrap()).norm();
    println!("serialization round-trip drift: {same:.1e}");

    let v = one_hot(1, 0, 2, 2).unwrap();
    println!("one_hot(1, 0; 2x2) = {:?}", v.as_slice());
}
