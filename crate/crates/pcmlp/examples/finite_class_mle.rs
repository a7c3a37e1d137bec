//! Exact finite-class MLE over a candidate set with TV-separated decoys.
//!
//! Run with: `cargo run --release --example finite_class_mle`

use pcmlp::envs::make_tabular_linmdp;
use pcmlp::mle::{fit_linmdp_exact, IndexedDataset};
use pcmlp::StreamSeed;
use rand::Rng;

fn main() {
    let env = make_tabular_linmdp(4, 2, 4, 0.2, 3, 11).unwrap();
    let candidates = env.candidates.as_ref().unwrap();
    let truth_index = env.truth_index.unwrap();
    let truth = env.truth.as_ref().unwrap().tabular().unwrap();
    println!(
        "4 candidates over a 4-state / 2-action MDP, truth hidden at index {truth_index}"
    );

    let mut rng = StreamSeed::new(1).rng();
    for m in [10usize, 50, 500] {
        let mut data = IndexedDataset::default();
        for _ in 0..m {
            let s = rng.random_range(0..4);
            let a = rng.random_range(0..2);
            let sp = truth.sample_next(s, a, &mut rng).unwrap();
            data.samples.push((s, a, sp));
        }
        let fit = fit_linmdp_exact(&data, candidates).unwrap();
        println!(
            "  M = {m:4}: selected {} ({}), log-likelihoods {:?}",
            fit.selected,
            if fit.selected == truth_index { "truth" } else { "decoy" },
            fit.log_likelihoods
                .iter()
                .map(|l| (l * 10.0).round() / 10.0)
                .collect::<Vec<_>>()
        );
    }
}
