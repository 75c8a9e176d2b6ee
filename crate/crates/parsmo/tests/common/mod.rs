//! Shared test utilities: an independent dense QP reference solver and a
//! seeded synthetic dataset generator.
//!
//! The reference solver deliberately avoids every code path of the library
//! under test: samples are expanded to dense vectors, the kernel matrix is
//! computed from dense norms, and the dual is maximized by projected
//! gradient ascent with an exact bisection projection onto the feasible set.

#![allow(dead_code)]

use parsmo::SparseSample;
use rand::prelude::*;
use rand::rngs::StdRng;

/// Solution of the reference solver.
pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub beta: f64,
    pub kernel: Vec<Vec<f64>>,
}

fn expand_dense(samples: &[SparseSample]) -> Vec<Vec<f64>> {
    let d = samples
        .iter()
        .flat_map(|s| s.indices.iter().copied())
        .max()
        .unwrap_or(0) as usize;
    samples
        .iter()
        .map(|s| {
            let mut x = vec![0.0; d + 1];
            for (&i, &v) in s.indices.iter().zip(&s.values) {
                x[i as usize] = v;
            }
            x
        })
        .collect()
}

pub fn dense_kernel_matrix(samples: &[SparseSample], sigma2: f64) -> Vec<Vec<f64>> {
    let dense = expand_dense(samples);
    let n = dense.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let norm2: f64 = dense[i]
                .iter()
                .zip(&dense[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            k[i][j] = (-norm2 / (2.0 * sigma2)).exp();
        }
    }
    k
}

/// Exact projection of `v` onto {0 <= a <= c} intersected with {y . a = 0},
/// by bisection on the multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let clamp_at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let dot = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(&ai, &yi)| ai * yi).sum() };

    let bound = v.iter().fold(0.0f64, |m, &x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dot(&clamp_at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clamp_at(0.5 * (lo + hi))
}

pub fn dual_objective_dense(alpha: &[f64], y: &[f64], kernel: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Projected gradient ascent on the dual with a fixed 1/L step.
pub fn solve_reference_qp(samples: &[SparseSample], c: f64, sigma2: f64) -> OracleSolution {
    let n = samples.len();
    let y: Vec<f64> = samples.iter().map(|s| s.label).collect();
    let kernel = dense_kernel_matrix(samples, sigma2);

    // Gershgorin bound on the largest eigenvalue of Q = (y y^T) o K.
    let lipschitz = (0..n)
        .map(|i| (0..n).map(|j| kernel[i][j].abs()).sum::<f64>())
        .fold(1.0f64, f64::max);
    let step = 1.0 / lipschitz;

    let mut alpha = vec![0.0; n];
    let mut best = f64::NEG_INFINITY;
    let mut stalled = 0;
    for round in 0..400_000 {
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let qrow: f64 = (0..n)
                .map(|j| y[i] * y[j] * kernel[i][j] * alpha[j])
                .sum();
            v.push(alpha[i] + step * (1.0 - qrow));
        }
        alpha = project(&v, &y, c);
        if round % 64 == 0 {
            let obj = dual_objective_dense(&alpha, &y, &kernel);
            if obj - best <= 1e-13 * (1.0 + best.abs()) {
                stalled += 1;
                if stalled > 12 {
                    break;
                }
            } else {
                stalled = 0;
                best = obj;
            }
        }
    }

    let objective = dual_objective_dense(&alpha, &y, &kernel);
    let beta = oracle_beta(&alpha, &y, &kernel, c);
    OracleSolution {
        alpha,
        objective,
        beta,
        kernel,
    }
}

/// Bias from the KKT conditions of the reference solution: the mean of
/// `sum_j alpha_j y_j K_ij - y_i` over free support vectors, falling back to
/// the threshold midpoint when none are free.
fn oracle_beta(alpha: &[f64], y: &[f64], kernel: &[Vec<f64>], c: f64) -> f64 {
    let n = alpha.len();
    let margin = 1e-8 * c;
    let gamma = |i: usize| -> f64 {
        (0..n)
            .map(|j| alpha[j] * y[j] * kernel[i][j])
            .sum::<f64>()
            - y[i]
    };
    let free: Vec<usize> = (0..n)
        .filter(|&i| alpha[i] > margin && alpha[i] < c - margin)
        .collect();
    if !free.is_empty() {
        return free.iter().map(|&i| gamma(i)).sum::<f64>() / free.len() as f64;
    }
    let mut up = f64::INFINITY;
    let mut low = f64::NEG_INFINITY;
    for i in 0..n {
        let g = gamma(i);
        let at_zero = alpha[i] <= margin;
        if (y[i] > 0.0 && at_zero) || (y[i] < 0.0 && !at_zero) {
            up = up.min(g);
        } else {
            low = low.max(g);
        }
    }
    0.5 * (up + low)
}

/// Seeded sparse two-cluster dataset. `noise` relative to the cluster
/// separation controls how many samples violate the margin.
pub fn synth_dataset(
    n: usize,
    d: u32,
    nnz: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Vec<SparseSample> {
    let mut rng = StdRng::seed_from_u64(seed);
    let nnz = nnz.min(d as usize).max(1);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut indices: Vec<u32> = rand::seq::index::sample(&mut rng, d as usize, nnz)
                .into_iter()
                .map(|k| k as u32 + 1)
                .collect();
            indices.sort_unstable();
            let scale = separation / (nnz as f64).sqrt();
            let values = indices
                .iter()
                .map(|_| {
                    let gauss: f64 = standard_normal(&mut rng);
                    label * scale + noise * scale * gauss
                })
                .collect();
            SparseSample {
                indices,
                values,
                label,
            }
        })
        .collect()
}

fn standard_normal(rng: &mut StdRng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// The random small instances used by the acceptance criteria: mixed sizes,
/// dimensions, densities, and C values, guaranteed to contain both classes.
pub fn small_instances(count: usize, seed: u64) -> Vec<(Vec<SparseSample>, f64, f64)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let c_choices = [0.5, 1.0, 8.0];
    (0..count)
        .map(|k| {
            let n = rng.gen_range(8..=40);
            let d = rng.gen_range(3..=8);
            let nnz = rng.gen_range(1..=d as usize);
            let noise = rng.gen_range(0.3..1.2);
            let c = c_choices[k % c_choices.len()];
            let sigma2 = rng.gen_range(0.5..4.0);
            let samples = synth_dataset(n, d, nnz, 2.0, noise, seed.wrapping_add(k as u64 * 7919));
            (samples, c, sigma2)
        })
        .collect()
}

/// Exact sum of y_i * alpha_i using the solver's dyadic alpha grid: scaled
/// values are integers, so the i128 accumulation is exact.
pub fn exact_constraint_sum(store: &parsmo::PrototypeStore) -> i128 {
    let scale = (1u64 << 40) as f64;
    let mut acc: i128 = 0;
    for i in 0..store.n_samples() {
        let scaled = store.alpha(i) * scale;
        assert_eq!(scaled.fract(), 0.0, "alpha off the dyadic grid");
        acc += (scaled as i128) * (store.label(i) as i128);
    }
    acc
}

/// Recompute the two thresholds over the full sample set from the store's
/// final multipliers, using a dense kernel matrix independent of the solver.
/// `c` must be dyadic so boundary comparisons are exact.
pub fn full_set_thresholds_dense(
    samples: &[SparseSample],
    store: &parsmo::PrototypeStore,
    c: f64,
    kernel: &[Vec<f64>],
) -> (f64, f64) {
    let n = samples.len();
    let gamma: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| store.alpha(j) * samples[j].label * kernel[i][j])
                .sum::<f64>()
                - samples[i].label
        })
        .collect();
    let mut beta_up = f64::INFINITY;
    let mut beta_low = f64::NEG_INFINITY;
    for i in 0..n {
        let alpha = store.alpha(i);
        let y = samples[i].label;
        let at_zero = alpha == 0.0;
        let at_c = alpha == c;
        let free = !at_zero && !at_c;
        if free || (y > 0.0 && at_zero) || (y < 0.0 && at_c) {
            beta_up = beta_up.min(gamma[i]);
        }
        if free || (y > 0.0 && at_c) || (y < 0.0 && at_zero) {
            beta_low = beta_low.max(gamma[i]);
        }
    }
    (beta_up, beta_low)
}
