//! Memory footprint of the CSR prototype layout versus dense storage at a
//! few sparsity levels.
//!
//! Run: cargo run --release -p parsmo --example csr_density

use parsmo::{density_report, SparseSample};

fn dataset(n: usize, d: u32, nnz: usize) -> Vec<SparseSample> {
    (0..n)
        .map(|i| {
            let stride = (d as usize / nnz).max(1) as u32;
            let indices: Vec<u32> = (0..nnz as u32)
                .map(|k| 1 + (k * stride + i as u32 % stride) % d)
                .collect();
            let mut indices = indices;
            indices.sort_unstable();
            indices.dedup();
            let values = vec![1.0; indices.len()];
            SparseSample {
                indices,
                values,
                label: if i % 2 == 0 { 1.0 } else { -1.0 },
            }
        })
        .collect()
}

fn main() {
    println!(
        "{:>9} {:>6} {:>8} {:>12} {:>12} {:>10}",
        "density", "d", "samples", "dense_bytes", "csr_bytes", "conserved"
    );
    for (d, nnz) in [(1000, 20), (1000, 100), (1000, 300), (1000, 900)] {
        let samples = dataset(2000, d, nnz);
        let report = density_report(&samples).expect("non-empty dataset");
        println!(
            "{:>8.1}% {:>6} {:>8} {:>12} {:>12} {:>9.1}%",
            100.0 * report.nonzero_fraction,
            report.n_features,
            report.n_samples,
            report.dense_bytes,
            report.csr_bytes,
            100.0 * report.percent_conserved
        );
    }
}
