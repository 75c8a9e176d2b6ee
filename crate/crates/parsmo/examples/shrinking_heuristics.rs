//! Compare shrinking heuristics against the no-shrinking baseline on one
//! dataset: total time, reconstruction time, and model agreement.
//!
//! Run: cargo run --release -p parsmo --example shrinking_heuristics

use parsmo::{build_store, support_ids, train, Heuristic, SparseSample, TrainerConfig};

fn noisy_clusters(n: usize) -> Vec<SparseSample> {
    let mut state = 0x9E3779B97F4A7C15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut indices: Vec<u32> = (0..6).map(|_| 1 + (next() * 24.0) as u32).collect();
            indices.sort_unstable();
            indices.dedup();
            let values = indices
                .iter()
                .map(|_| 0.8 * label + 0.9 * (next() * 2.0 - 1.0))
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
    let samples = noisy_clusters(3000);
    let mut store = build_store(&samples, 2.0).expect("non-empty dataset");

    println!(
        "{:<12} {:>8} {:>9} {:>9} {:>7} {:>6}  agrees",
        "heuristic", "iters", "total_s", "recon_s", "recons", "n_sv"
    );

    let mut baseline: Option<(Vec<usize>, f64)> = None;
    for heuristic in [
        Heuristic::Original,
        "single1000".parse().unwrap(),
        "single5pc".parse().unwrap(),
        "multi500".parse().unwrap(),
        "multi5pc".parse().unwrap(),
    ] {
        let config = TrainerConfig::new(2.0, 2.0).with_heuristic(heuristic);
        let (model, report) = train(&mut store, &config).expect("training converges");
        let ids = support_ids(&store);
        let agrees = match &baseline {
            None => {
                baseline = Some((ids, model.beta));
                "-".to_string()
            }
            Some((base_ids, base_beta)) => {
                let ok = &ids == base_ids && (model.beta - base_beta).abs() <= 1e-6;
                if ok { "yes".into() } else { "NO".into() }
            }
        };
        println!(
            "{:<12} {:>8} {:>9.3} {:>9.3} {:>7} {:>6}  {agrees}",
            heuristic.name(),
            report.iterations,
            report.wall_seconds,
            report.recon_seconds,
            report.recon_count,
            report.n_support
        );
    }
}
