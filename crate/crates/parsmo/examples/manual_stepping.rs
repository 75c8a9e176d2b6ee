//! Drive the optimizer one iteration at a time, watching the thresholds
//! close in and checking the maintained gradients against a from-scratch
//! recomputation.
//!
//! Run: cargo run --release -p parsmo --example manual_stepping

use parsmo::{build_store, Optimizer, Slack, SparseSample, TrainerConfig};

fn dataset(n: usize) -> Vec<SparseSample> {
    let mut state = 0x853C_49E6_748F_EA9Bu64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut indices: Vec<u32> = (0..4).map(|_| 1 + (next() * 10.0) as u32).collect();
            indices.sort_unstable();
            indices.dedup();
            let values = indices.iter().map(|_| label + 0.9 * (next() * 2.0 - 1.0)).collect();
            SparseSample {
                indices,
                values,
                label,
            }
        })
        .collect()
}

fn main() {
    let samples = dataset(300);
    let mut store = build_store(&samples, 2.0).expect("non-empty dataset");
    let config = TrainerConfig::new(2.0, 1.5).with_workers(2);
    let mut opt = Optimizer::new(&mut store, &config).expect("two classes present");

    println!(
        "{:>6} {:>12} {:>12} {:>10} {:>12}",
        "iter", "beta_up", "beta_low", "gap", "drift"
    );
    while !opt.converged(Slack::Final) {
        opt.iterate();
        if opt.iterations() % 50 == 0 {
            let (up, low) = opt.thresholds();
            println!(
                "{:>6} {:>12.6} {:>12.6} {:>10.6} {:>12.2e}",
                opt.iterations(),
                up,
                low,
                low - up,
                opt.gradient_drift()
            );
        }
    }
    let (up, low) = opt.thresholds();
    println!(
        "converged after {} iterations, final gap {:.6} <= 2*eps = {:.6}",
        opt.iterations(),
        low - up,
        2.0 * opt.epsilon()
    );
}
