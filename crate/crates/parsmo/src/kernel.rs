//! Sparse inner products and the Gaussian RBF kernel.
//!
//! Kernel values are recomputed on demand; there is no kernel cache. With the
//! per-sample self dot products precomputed once at load, one RBF evaluation
//! costs a single sparse dot plus an `exp`.

use crate::data::{PrototypeStore, SelfDotTable};
use crate::error::ConfigError;

/// Gaussian kernel parameters: K(x, y) = exp(-||x - y||^2 / (2 * sigma2)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub sigma2: f64,
}

impl KernelParams {
    pub fn new(sigma2: f64) -> Result<Self, ConfigError> {
        if !(sigma2 > 0.0) {
            return Err(ConfigError::InvalidSigma2(sigma2));
        }
        Ok(KernelParams { sigma2 })
    }
}

/// Inner product of two CSR feature slices laid out as (index, value) pairs
/// with strictly increasing indices.
///
/// Two-pointer merge: advance the side with the smaller index, accumulate on
/// index matches. Empty slices are legal and contribute nothing.
#[inline]
pub fn sparse_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s1 = 0;
    let mut s2 = 0;
    let mut dp = 0.0;
    while s1 < a.len() && s2 < b.len() {
        let ia = a[s1];
        let ib = b[s2];
        if ia == ib {
            dp += a[s1 + 1] * b[s2 + 1];
            s1 += 2;
            s2 += 2;
        } else if ia < ib {
            s1 += 2;
        } else {
            s2 += 2;
        }
    }
    dp
}

/// Squared Euclidean distance from precomputed self dots and one sparse dot.
/// Clamped at zero so rounding on near-duplicates cannot produce a negative
/// distance (and thus a kernel value above 1).
#[inline]
pub fn squared_distance(self_a: f64, self_b: f64, dot_ab: f64) -> f64 {
    (self_a + self_b - 2.0 * dot_ab).max(0.0)
}

/// RBF kernel between feature rows given their self dot products.
#[inline]
pub fn rbf_rows(a: &[f64], b: &[f64], self_a: f64, self_b: f64, params: KernelParams) -> f64 {
    let d2 = squared_distance(self_a, self_b, sparse_dot(a, b));
    (-d2 / (2.0 * params.sigma2)).exp()
}

/// RBF kernel between two stored samples.
///
/// Operands are ordered by sample id so that k(i, j) and k(j, i) evaluate the
/// exact same floating-point expression.
pub fn rbf(
    i: usize,
    j: usize,
    params: KernelParams,
    store: &PrototypeStore,
    self_dots: &SelfDotTable,
) -> f64 {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    rbf_rows(
        store.features(lo),
        store.features(hi),
        self_dots.get(lo),
        self_dots.get(hi),
        params,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_store, SparseSample};
    use proptest::prelude::*;

    fn row(pairs: &[(u32, f64)]) -> Vec<f64> {
        pairs
            .iter()
            .flat_map(|&(i, v)| [f64::from(i), v])
            .collect()
    }

    #[test]
    fn dot_single_matching_index() {
        let a = row(&[(1, 2.0), (3, 1.0)]);
        let b = row(&[(3, 4.0)]);
        assert_eq!(sparse_dot(&a, &b), 4.0);
    }

    #[test]
    fn dot_disjoint_supports() {
        let a = row(&[(1, 1.0)]);
        let b = row(&[(2, 5.0)]);
        assert_eq!(sparse_dot(&a, &b), 0.0);
        assert_eq!(sparse_dot(&a, &[]), 0.0);
        assert_eq!(sparse_dot(&[], &[]), 0.0);
    }

    #[test]
    fn dot_with_self() {
        let x = row(&[(1, 3.0), (2, 4.0)]);
        assert_eq!(sparse_dot(&x, &x), 25.0);
    }

    fn toy_store(samples: &[SparseSample]) -> (PrototypeStore, SelfDotTable) {
        let store = build_store(samples, 1.0).unwrap();
        let dots = SelfDotTable::build(&store);
        (store, dots)
    }

    fn sample(pairs: &[(u32, f64)], label: f64) -> SparseSample {
        SparseSample {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
            label,
        }
    }

    #[test]
    fn rbf_of_sample_with_itself_is_one() {
        let (store, dots) = toy_store(&[sample(&[(1, 0.3), (7, -2.0)], 1.0)]);
        let params = KernelParams::new(2.0).unwrap();
        assert_eq!(rbf(0, 0, params, &store, &dots), 1.0);
    }

    #[test]
    fn rbf_at_distance_sqrt_two_sigma2() {
        // ||x - y||^2 = 2 sigma2 gives exactly exp(-1)
        let (store, dots) = toy_store(&[
            sample(&[(1, 2.0)], 1.0),
            sample(&[(1, 4.0)], -1.0),
        ]);
        let params = KernelParams::new(2.0).unwrap(); // 2 sigma2 = 4 = (4-2)^2
        let k = rbf(0, 1, params, &store, &dots);
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_sigma2() {
        assert!(KernelParams::new(0.0).is_err());
        assert!(KernelParams::new(-1.0).is_err());
        assert!(KernelParams::new(f64::NAN).is_err());
    }

    /// Dense oracle: expand each sparse row and compute the norm directly.
    fn dense_rbf(a: &SparseSample, b: &SparseSample, sigma2: f64) -> f64 {
        let d = 16;
        let mut xa = vec![0.0; d];
        let mut xb = vec![0.0; d];
        for (&i, &v) in a.indices.iter().zip(&a.values) {
            xa[i as usize] = v;
        }
        for (&i, &v) in b.indices.iter().zip(&b.values) {
            xb[i as usize] = v;
        }
        let norm2: f64 = xa.iter().zip(&xb).map(|(p, q)| (p - q) * (p - q)).sum();
        (-norm2 / (2.0 * sigma2)).exp()
    }

    prop_compose! {
        fn arb_pairs()(m in prop::collection::btree_map(1u32..8, -3.0f64..3.0, 0..6)) -> Vec<(u32, f64)> {
            m.into_iter().collect()
        }
    }

    proptest! {
        #[test]
        fn rbf_matches_dense_oracle(pa in arb_pairs(), pb in arb_pairs(), sigma2 in 0.2f64..8.0) {
            let a = sample(&pa, 1.0);
            let b = sample(&pb, -1.0);
            let (store, dots) = toy_store(&[a.clone(), b.clone()]);
            let params = KernelParams::new(sigma2).unwrap();
            let ours = rbf(0, 1, params, &store, &dots);
            let oracle = dense_rbf(&a, &b, sigma2);
            let denom = oracle.abs().max(1e-30);
            prop_assert!((ours - oracle).abs() / denom < 1e-12);
        }

        #[test]
        fn rbf_is_symmetric_and_bounded(pa in arb_pairs(), pb in arb_pairs(), sigma2 in 0.2f64..8.0) {
            let (store, dots) = toy_store(&[sample(&pa, 1.0), sample(&pb, -1.0)]);
            let params = KernelParams::new(sigma2).unwrap();
            let kij = rbf(0, 1, params, &store, &dots);
            let kji = rbf(1, 0, params, &store, &dots);
            prop_assert_eq!(kij.to_bits(), kji.to_bits());
            prop_assert!(kij > 0.0 && kij <= 1.0);
            prop_assert_eq!(rbf(0, 0, params, &store, &dots), 1.0);
        }

        #[test]
        fn sparse_dot_matches_dense(pa in arb_pairs(), pb in arb_pairs()) {
            let a = sample(&pa, 1.0);
            let b = sample(&pb, 1.0);
            let mut dense = 0.0;
            for (&i, &v) in a.indices.iter().zip(&a.values) {
                if let Some(pos) = b.indices.iter().position(|&j| j == i) {
                    dense += v * b.values[pos];
                }
            }
            let ra = row(&pa);
            let rb = row(&pb);
            prop_assert!((sparse_dot(&ra, &rb) - dense).abs() < 1e-12);
        }
    }
}
