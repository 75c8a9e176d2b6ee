//! Sweep the worker count and show that the result is bit-identical while
//! the wall clock changes with available parallelism.
//!
//! Run: cargo run --release -p parsmo --example parallel_workers

use parsmo::{build_store, support_ids, train, SparseSample, TrainerConfig};

fn dataset(n: usize) -> Vec<SparseSample> {
    let mut state = 0xA076_1D64_78BD_642Fu64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut indices: Vec<u32> = (0..8).map(|_| 1 + (next() * 40.0) as u32).collect();
            indices.sort_unstable();
            indices.dedup();
            let values = indices
                .iter()
                .map(|_| 0.7 * label + 0.7 * (next() * 2.0 - 1.0))
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
    let samples = dataset(6000);
    println!(
        "hardware threads: {}",
        std::thread::available_parallelism().map_or(1, |n| n.get())
    );
    println!("{:>7} {:>9} {:>9} {:>12} {:>8}", "workers", "iters", "wall_s", "beta", "n_sv");

    let mut reference = None;
    for workers in [1, 2, 4, 8] {
        let mut store = build_store(&samples, 1.0).expect("non-empty dataset");
        let config = TrainerConfig::new(1.0, 2.0).with_workers(workers);
        let (model, report) = train(&mut store, &config).expect("training converges");
        println!(
            "{workers:>7} {:>9} {:>9.3} {:>12.8} {:>8}",
            report.iterations, report.wall_seconds, model.beta, report.n_support
        );
        let key = (report.iterations, model.beta.to_bits(), support_ids(&store));
        match &reference {
            None => reference = Some(key),
            Some(base) => assert_eq!(base, &key, "results must not depend on worker count"),
        }
    }
    println!("all worker counts produced identical models");
}
