//! Distributional eluder dimension by brute force on hand-built instances,
//! including one written to disk in the CLI's instance format.
//!
//! Run with: `cargo run --release --example eluder_dimension`

use nalgebra::DVector;
use pcmlp::harness::parse_eluder_instance;
use pcmlp::mdp::TabularPolicy;
use pcmlp::models::TabularTable;
use pcmlp::odpc::{eluder_dimension, eluder_w_k, EluderInstance, EluderSearch};

fn chain(flips: &[(usize, usize, usize)]) -> TabularTable {
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
}

fn main() {
    let stay = TabularPolicy::new(vec![vec![0; 3]; 4]);
    let go = TabularPolicy::new(vec![vec![1; 3]; 4]);

    // Two candidates that disagree only on state 2, which only the "go"
    // policy ever occupies.
    let inst = EluderInstance::new(
        chain(&[]),
        vec![chain(&[]), chain(&[(2, 0, 2), (2, 1, 0)])],
        vec![stay, go],
        4,
        0,
        0.2,
    )
    .unwrap();
    println!("w at the empty prefix: stay = {:.3}, go = {:.3}",
        eluder_w_k(&inst, &[], 0).unwrap(),
        eluder_w_k(&inst, &[], 1).unwrap());
    let result = eluder_dimension(&inst, &EluderSearch::default()).unwrap();
    println!("one-policy-separated pair: dimension = {}", result.length);

    // The same instance through the CLI file format.
    let text = r#"
epsilon = 0.2
horizon = 4
initial_state = 0
n_states = 3
n_actions = 2
truth = [
  [1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
  [1.0, 0.0, 0.0], [0.0, 0.0, 1.0],
  [0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
]
candidates = [
  [
    [1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0], [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
  ],
  [
    [1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0], [0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0], [1.0, 0.0, 0.0],
  ],
]
policies = [
  [[0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0]],
  [[1, 1, 1], [1, 1, 1], [1, 1, 1], [1, 1, 1]],
]
"#;
    let path = std::env::temp_dir().join("eluder_instance.toml");
    std::fs::write(&path, text).unwrap();
    let (inst, search) = parse_eluder_instance(text).unwrap();
    let result = eluder_dimension(&inst, &search).unwrap();
    println!(
        "instance file {} -> dimension {} (also runnable via `pcmlp eluder --instance ...`)",
        path.display(),
        result.length
    );
}
