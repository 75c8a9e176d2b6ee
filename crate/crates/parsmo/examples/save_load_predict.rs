//! Persist a trained model to disk, reload it, and verify prediction parity.
//!
//! Run: cargo run --release -p parsmo --example save_load_predict

use parsmo::{
    build_store, evaluate, load_model_file, predict, save_model_file, train, SparseSample,
    TrainerConfig,
};

fn dataset(n: usize, seed: u64) -> Vec<SparseSample> {
    let mut state = seed | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut indices: Vec<u32> = (0..5).map(|_| 1 + (next() * 15.0) as u32).collect();
            indices.sort_unstable();
            indices.dedup();
            let values = indices.iter().map(|_| label + 0.6 * (next() * 2.0 - 1.0)).collect();
            SparseSample {
                indices,
                values,
                label,
            }
        })
        .collect()
}

fn main() {
    let train_set = dataset(500, 7);
    let test_set = dataset(200, 8);

    let mut store = build_store(&train_set, 4.0).expect("non-empty dataset");
    let config = TrainerConfig::new(4.0, 2.0).with_heuristic("multi5pc".parse().unwrap());
    let (mut model, report) = train(&mut store, &config).expect("training converges");
    model.meta.iterations = report.iterations;

    let path = std::env::temp_dir().join("parsmo_example.model");
    save_model_file(&model, &path).expect("model written");
    let loaded = load_model_file(&path).expect("model read back");
    assert_eq!(loaded, model, "round trip is lossless");

    let mismatches = test_set
        .iter()
        .filter(|z| predict(&model, z) != predict(&loaded, z))
        .count();
    println!("model file:        {}", path.display());
    println!("support vectors:   {}", model.n_support());
    println!("prediction parity: {} mismatches on {} points", mismatches, test_set.len());
    println!(
        "test accuracy:     {:.2}%",
        100.0 * evaluate(&loaded, &test_set).expect("non-empty test set")
    );
}
