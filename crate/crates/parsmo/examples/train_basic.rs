//! Train a model on a small synthetic dataset and print the report.
//!
//! Run: cargo run --release -p parsmo --example train_basic

use parsmo::{build_store, train, SparseSample, TrainerConfig};

/// Two sparse clusters around +mu and -mu, deterministic.
fn two_clusters(n: usize) -> Vec<SparseSample> {
    let mut state = 0x2545F4914F6CDD1Du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut indices: Vec<u32> =
                (0..4).map(|k| 1 + 3 * k + (next() * 3.0) as u32).collect();
            indices.sort_unstable();
            indices.dedup();
            let values = indices
                .iter()
                .map(|_| label + 0.8 * (next() * 2.0 - 1.0))
                .collect();
            SparseSample {
                indices,
                values,
                label,
            }
        })
        .collect()
}

fn main() {
    let samples = two_clusters(400);
    let mut store = build_store(&samples, 1.0).expect("non-empty dataset");

    let config = TrainerConfig::new(1.0, 2.0);
    let (model, report) = train(&mut store, &config).expect("training converges");

    println!("trained on {} samples", report.n_samples);
    println!("iterations      {}", report.iterations);
    println!("support vectors {}", model.n_support());
    println!("beta            {:.6}", model.beta);
    println!("final gap       {:.6}", report.final_gap);
    println!("wall seconds    {:.3}", report.wall_seconds);

    let correct = samples
        .iter()
        .filter(|s| parsmo::predict(&model, s) == s.label)
        .count();
    println!(
        "training accuracy {:.2}%",
        100.0 * correct as f64 / samples.len() as f64
    );
}
