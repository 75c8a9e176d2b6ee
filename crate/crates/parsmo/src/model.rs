//! Model persistence, classification, and accuracy evaluation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::data::{PrototypeStore, SparseSample};
use crate::error::ModelError;
use crate::kernel::{rbf_rows, sparse_dot, KernelParams};
use crate::smo::TrainerConfig;

/// Training metadata carried by a persisted model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub c: f64,
    pub epsilon: f64,
    pub heuristic: String,
    pub iterations: u64,
}

/// A trained classifier: the support vectors with their signed coefficients
/// `alpha_i * y_i`, the bias, and the kernel width.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub sigma2: f64,
    pub beta: f64,
    pub meta: ModelMeta,
    coefficients: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    self_dots: Vec<f64>,
}

impl SvmModel {
    fn assemble(
        sigma2: f64,
        beta: f64,
        meta: ModelMeta,
        coefficients: Vec<f64>,
        vectors: Vec<Vec<f64>>,
    ) -> Self {
        let self_dots = vectors.iter().map(|v| sparse_dot(v, v)).collect();
        SvmModel {
            sigma2,
            beta,
            meta,
            coefficients,
            vectors,
            self_dots,
        }
    }

    pub fn n_support(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Support vector feature rows as (index, value) cell pairs.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Raw decision value `sum_i coeff_i K(sv_i, z) - beta`.
    pub fn decision_value(&self, z: &SparseSample) -> f64 {
        let params = KernelParams { sigma2: self.sigma2 };
        let z_cells = z.feature_cells();
        let z_self = sparse_dot(&z_cells, &z_cells);
        let mut acc = 0.0;
        for ((coeff, sv), &sv_self) in self
            .coefficients
            .iter()
            .zip(&self.vectors)
            .zip(&self.self_dots)
        {
            acc += coeff * rbf_rows(sv, &z_cells, sv_self, z_self, params);
        }
        acc - self.beta
    }
}

/// Collect the support vectors (alpha > 0) of a trained store.
pub fn extract_model(
    store: &PrototypeStore,
    beta: f64,
    config: &TrainerConfig,
) -> Result<SvmModel, ModelError> {
    let mut coefficients = Vec::new();
    let mut vectors = Vec::new();
    for i in 0..store.n_samples() {
        let alpha = store.alpha(i);
        if alpha > 0.0 {
            coefficients.push(alpha * store.label(i));
            vectors.push(store.features(i).to_vec());
        }
    }
    if coefficients.is_empty() {
        return Err(ModelError::NoSupportVectors);
    }
    Ok(SvmModel::assemble(
        config.sigma2,
        beta,
        ModelMeta {
            c: config.c,
            epsilon: config.epsilon,
            heuristic: config.heuristic.name().to_string(),
            iterations: 0,
        },
        coefficients,
        vectors,
    ))
}

/// Ascending ids of the samples with alpha > 0 in a trained store.
pub fn support_ids(store: &PrototypeStore) -> Vec<usize> {
    (0..store.n_samples())
        .filter(|&i| store.alpha(i) > 0.0)
        .collect()
}

/// Classify one point: sign of the decision value, with sgn(0) = +1.
pub fn predict(model: &SvmModel, z: &SparseSample) -> f64 {
    if model.decision_value(z) >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Fraction of correctly classified test samples.
pub fn evaluate(model: &SvmModel, testset: &[SparseSample]) -> Result<f64, ModelError> {
    if testset.is_empty() {
        return Err(ModelError::EmptyTestSet);
    }
    let correct = testset
        .par_iter()
        .filter(|s| predict(model, s) == s.label)
        .count();
    Ok(correct as f64 / testset.len() as f64)
}

/// Write the model as plain text. All floats print in shortest round-trip
/// form, so `load(save(m))` reproduces every numeric field bit for bit.
pub fn save_model<W: Write>(model: &SvmModel, sink: &mut W) -> Result<(), ModelError> {
    writeln!(sink, "svm_model v1")?;
    writeln!(sink, "kernel rbf")?;
    writeln!(sink, "sigma2 {}", model.sigma2)?;
    writeln!(sink, "beta {}", model.beta)?;
    writeln!(sink, "c {}", model.meta.c)?;
    writeln!(sink, "eps {}", model.meta.epsilon)?;
    writeln!(sink, "heuristic {}", model.meta.heuristic)?;
    writeln!(sink, "iterations {}", model.meta.iterations)?;
    writeln!(sink, "nsv {}", model.n_support())?;
    for (coeff, row) in model.coefficients.iter().zip(&model.vectors) {
        write!(sink, "{coeff}")?;
        for pair in row.chunks_exact(2) {
            write!(sink, " {}:{}", pair[0] as u64, pair[1])?;
        }
        writeln!(sink)?;
    }
    Ok(())
}

pub fn save_model_file(model: &SvmModel, path: &Path) -> Result<(), ModelError> {
    let mut out = BufWriter::new(File::create(path)?);
    save_model(model, &mut out)?;
    out.flush()?;
    Ok(())
}

fn header_value<'a>(
    line: Option<(usize, String)>,
    key: &str,
) -> Result<(usize, String), ModelError> {
    let (no, text) = line.ok_or(ModelError::Truncated {
        expected: 1,
        found: 0,
    })?;
    let rest = text
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| ModelError::Malformed {
            line: no,
            reason: format!("expected `{key} <value>`, got `{text}`"),
        })?;
    let _ = &rest;
    Ok((no, rest.to_string()))
}

fn parse_num<T: std::str::FromStr>(no: usize, value: &str) -> Result<T, ModelError> {
    value.parse().map_err(|_| ModelError::Malformed {
        line: no,
        reason: format!("bad number `{value}`"),
    })
}

/// Read a model written by [`save_model`].
pub fn load_model<R: BufRead>(source: R) -> Result<SvmModel, ModelError> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|text| (i + 1, text)));
    let mut next = || -> Result<Option<(usize, String)>, ModelError> {
        lines.next().transpose().map_err(ModelError::Io)
    };

    let (no, magic) = next()?.ok_or(ModelError::Truncated {
        expected: 1,
        found: 0,
    })?;
    if magic != "svm_model v1" {
        return Err(if magic.starts_with("svm_model") {
            ModelError::VersionMismatch(magic)
        } else {
            ModelError::Malformed {
                line: no,
                reason: "missing `svm_model v1` header".into(),
            }
        });
    }
    let (no, kernel) = header_value(next()?, "kernel")?;
    if kernel != "rbf" {
        return Err(ModelError::Malformed {
            line: no,
            reason: format!("unsupported kernel `{kernel}`"),
        });
    }
    let (no, v) = header_value(next()?, "sigma2")?;
    let sigma2: f64 = parse_num(no, &v)?;
    let (no, v) = header_value(next()?, "beta")?;
    let beta: f64 = parse_num(no, &v)?;
    let (no, v) = header_value(next()?, "c")?;
    let c: f64 = parse_num(no, &v)?;
    let (no, v) = header_value(next()?, "eps")?;
    let epsilon: f64 = parse_num(no, &v)?;
    let (_, heuristic) = header_value(next()?, "heuristic")?;
    let (no, v) = header_value(next()?, "iterations")?;
    let iterations: u64 = parse_num(no, &v)?;
    let (no, v) = header_value(next()?, "nsv")?;
    let nsv: usize = parse_num(no, &v)?;

    let mut coefficients = Vec::with_capacity(nsv);
    let mut vectors = Vec::with_capacity(nsv);
    for _ in 0..nsv {
        let Some((no, text)) = next()? else {
            return Err(ModelError::Truncated {
                expected: nsv,
                found: coefficients.len(),
            });
        };
        let mut tokens = text.split_ascii_whitespace();
        let coeff_tok = tokens.next().ok_or(ModelError::Truncated {
            expected: nsv,
            found: coefficients.len(),
        })?;
        let coeff: f64 = parse_num(no, coeff_tok)?;
        let mut row = Vec::new();
        let mut last_idx = 0u64;
        for tok in tokens {
            let (i_str, v_str) = tok.split_once(':').ok_or_else(|| ModelError::Malformed {
                line: no,
                reason: format!("bad feature token `{tok}`"),
            })?;
            let idx: u64 = parse_num(no, i_str)?;
            let val: f64 = parse_num(no, v_str)?;
            if idx == 0 || idx <= last_idx {
                return Err(ModelError::Malformed {
                    line: no,
                    reason: format!("feature indices must be increasing, got {idx}"),
                });
            }
            last_idx = idx;
            row.push(idx as f64);
            row.push(val);
        }
        coefficients.push(coeff);
        vectors.push(row);
    }
    if coefficients.is_empty() {
        return Err(ModelError::NoSupportVectors);
    }
    Ok(SvmModel::assemble(
        sigma2,
        beta,
        ModelMeta {
            c,
            epsilon,
            heuristic,
            iterations,
        },
        coefficients,
        vectors,
    ))
}

pub fn load_model_file(path: &Path) -> Result<SvmModel, ModelError> {
    load_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_store;

    fn sample(pairs: &[(u32, f64)], label: f64) -> SparseSample {
        SparseSample {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
            label,
        }
    }

    fn arbitrary_model() -> SvmModel {
        SvmModel::assemble(
            16.0,
            -0.12345678901234567,
            ModelMeta {
                c: 8.0,
                epsilon: 1e-3,
                heuristic: "multi5pc".into(),
                iterations: 4242,
            },
            vec![0.3333333333333333, -7.25, 1e-9],
            vec![
                vec![1.0, 0.1, 7.0, -2.5],
                vec![2.0, 1.0 / 3.0],
                vec![],
            ],
        )
    }

    #[test]
    fn extraction_requires_support_vectors() {
        let store = build_store(&[sample(&[(1, 1.0)], 1.0)], 1.0).unwrap();
        let config = TrainerConfig::new(1.0, 1.0);
        assert!(matches!(
            extract_model(&store, 0.0, &config),
            Err(ModelError::NoSupportVectors)
        ));
    }

    #[test]
    fn extraction_collects_positive_alphas_with_signed_coefficients() {
        let mut store = build_store(
            &[
                sample(&[(1, 1.0)], 1.0),
                sample(&[(1, 2.0)], -1.0),
                sample(&[(1, 3.0)], 1.0),
            ],
            4.0,
        )
        .unwrap();
        store.set_alpha(0, 2.0);
        store.set_alpha(1, 0.5);
        let config = TrainerConfig::new(4.0, 1.0);
        let model = extract_model(&store, 0.25, &config).unwrap();
        assert_eq!(model.n_support(), 2);
        assert_eq!(model.coefficients(), &[2.0, -0.5]);
        assert_eq!(support_ids(&store), vec![0, 1]);
    }

    #[test]
    fn dominant_single_support_vector_wins() {
        let model = SvmModel::assemble(
            1.0,
            0.01,
            ModelMeta {
                c: 10.0,
                epsilon: 1e-3,
                heuristic: "original".into(),
                iterations: 1,
            },
            vec![5.0],
            vec![vec![1.0, 1.0]],
        );
        let z = sample(&[(1, 1.0)], 1.0);
        assert_eq!(predict(&model, &z), 1.0);
    }

    #[test]
    fn zero_decision_value_maps_to_positive() {
        // Two symmetric support vectors, query equidistant: decision = 0.
        let model = SvmModel::assemble(
            1.0,
            0.0,
            ModelMeta {
                c: 1.0,
                epsilon: 1e-3,
                heuristic: "original".into(),
                iterations: 1,
            },
            vec![1.0, -1.0],
            vec![vec![1.0, 1.0], vec![1.0, -1.0]],
        );
        let z = sample(&[], -1.0);
        assert_eq!(model.decision_value(&z), 0.0);
        assert_eq!(predict(&model, &z), 1.0);
    }

    #[test]
    fn evaluate_rejects_empty_test_set() {
        assert!(matches!(
            evaluate(&arbitrary_model(), &[]),
            Err(ModelError::EmptyTestSet)
        ));
    }

    #[test]
    fn save_load_round_trips_bitwise() {
        let model = arbitrary_model();
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        let loaded = load_model(buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded.beta.to_bits(), model.beta.to_bits());
        for (a, b) in loaded.coefficients().iter().zip(model.coefficients()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn corrupted_header_is_rejected() {
        let model = arbitrary_model();
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let bad = text.replacen("svm_model v1", "svm_model v9", 1);
        assert!(matches!(
            load_model(bad.as_bytes()),
            Err(ModelError::VersionMismatch(_))
        ));

        let bad = text.replacen("sigma2 ", "sigma2x ", 1);
        assert!(matches!(
            load_model(bad.as_bytes()),
            Err(ModelError::Malformed { .. })
        ));
    }

    #[test]
    fn truncated_support_vectors_are_rejected() {
        let model = arbitrary_model();
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            load_model(truncated.as_bytes()),
            Err(ModelError::Truncated { .. })
        ));
    }

    #[test]
    fn predictions_agree_after_reload() {
        let model = arbitrary_model();
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        let loaded = load_model(buf.as_slice()).unwrap();
        for k in 0..100 {
            let x = (k as f64 * 0.39).sin() * 3.0;
            let w = (k as f64 * 1.7).cos() * 2.0;
            let z = sample(&[(1, x), (7, w)], 1.0);
            assert_eq!(predict(&model, &z), predict(&loaded, &z));
            assert_eq!(
                model.decision_value(&z).to_bits(),
                loaded.decision_value(&z).to_bits()
            );
        }
    }
}
