//! Dataset parsing and the CSR prototype store.
//!
//! Samples are kept in one flat cell array. Each sample row starts with a
//! 4-cell header holding the per-sample optimizer state, followed by the
//! sparse features as (index, value) pairs:
//!
//! ```text
//! [alpha, set_code, gradient, label, idx1, val1, idx2, val2, ...]
//! ```
//!
//! A separate row-pointer array gives each sample's start offset, so row `i`
//! spans `cells[row_ptr[i]..row_ptr[i + 1]]`. Keeping the optimizer state
//! co-located with the features means one contiguous read per sample in the
//! training hot loop.

use crate::error::DataError;
use crate::kernel::sparse_dot;
use crate::smo::classify_index;

/// Cell offset of the Lagrange multiplier within a sample header.
pub const ALPHA: usize = 0;
/// Cell offset of the index-set membership code.
pub const SET_CODE: usize = 1;
/// Cell offset of the maintained gradient value.
pub const GRADIENT: usize = 2;
/// Cell offset of the class label.
pub const LABEL: usize = 3;
/// Number of header cells preceding the features of each sample.
pub const HEADER_CELLS: usize = 4;

/// How raw labels are mapped to the internal {+1, -1} classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    /// Accept only +1 / -1 labels.
    #[default]
    Strict,
    /// Map 0 to -1 and 1 to +1.
    ZeroOne,
}

impl LabelPolicy {
    fn name(self) -> &'static str {
        match self {
            LabelPolicy::Strict => "strict",
            LabelPolicy::ZeroOne => "zero-one",
        }
    }

    fn map(self, raw: f64) -> Option<f64> {
        match self {
            LabelPolicy::Strict if raw == 1.0 || raw == -1.0 => Some(raw),
            LabelPolicy::ZeroOne if raw == 0.0 => Some(-1.0),
            LabelPolicy::ZeroOne if raw == 1.0 => Some(1.0),
            _ => None,
        }
    }
}

/// One parsed sample: sorted sparse features plus a {+1, -1} label.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSample {
    /// 1-based feature ids, strictly increasing.
    pub indices: Vec<u32>,
    /// Feature values, same length as `indices`.
    pub values: Vec<f64>,
    /// Class label, +1.0 or -1.0.
    pub label: f64,
}

impl SparseSample {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Features as flat (index, value) cells, the row layout of the store.
    pub fn feature_cells(&self) -> Vec<f64> {
        self.indices
            .iter()
            .zip(&self.values)
            .flat_map(|(&i, &v)| [f64::from(i), v])
            .collect()
    }
}

fn parse_line(line: usize, content: &str) -> Result<Option<(f64, Vec<u32>, Vec<f64>)>, DataError> {
    let mut tokens = content.split_ascii_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let raw_label: f64 = label_tok.parse().map_err(|_| DataError::MalformedToken {
        line,
        token: label_tok.to_string(),
    })?;
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for tok in tokens {
        let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| DataError::MalformedToken {
            line,
            token: tok.to_string(),
        })?;
        let index: u32 = idx_str.parse().map_err(|_| DataError::MalformedToken {
            line,
            token: tok.to_string(),
        })?;
        let value: f64 = val_str.parse().map_err(|_| DataError::MalformedToken {
            line,
            token: tok.to_string(),
        })?;
        if index == 0 {
            return Err(DataError::ZeroIndex { line });
        }
        if let Some(&last) = indices.last() {
            if index <= last {
                return Err(DataError::NonIncreasingIndex { line, index });
            }
        }
        indices.push(index);
        values.push(value);
    }
    Ok(Some((raw_label, indices, values)))
}

fn strip_comment(raw_line: &str) -> &str {
    match raw_line.find('#') {
        Some(pos) => &raw_line[..pos],
        None => raw_line,
    }
}

/// Parse svmlight/libsvm text: one `label idx:val idx:val ...` per line,
/// 1-based indices, `#` starts a comment that runs to end of line. Blank
/// lines are skipped.
pub fn parse_svmlight(text: &str, policy: LabelPolicy) -> Result<Vec<SparseSample>, DataError> {
    let mut samples = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let Some((raw_label, indices, values)) = parse_line(line, strip_comment(raw_line))? else {
            continue;
        };
        let label = policy.map(raw_label).ok_or_else(|| DataError::UnmappableLabel {
            line,
            label: format!("{raw_label}"),
            policy: policy.name(),
        })?;
        samples.push(SparseSample {
            indices,
            values,
            label,
        });
    }
    Ok(samples)
}

/// Parse svmlight text whose labels may be placeholders (e.g. all zeros for
/// unlabeled prediction input). Returns the samples plus whether every label
/// was a genuine +1/-1; placeholder labels are stored as +1.
pub fn parse_svmlight_lenient(text: &str) -> Result<(Vec<SparseSample>, bool), DataError> {
    let mut samples = Vec::new();
    let mut labeled = true;
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let Some((raw_label, indices, values)) = parse_line(line, strip_comment(raw_line))? else {
            continue;
        };
        let label = if raw_label == 1.0 || raw_label == -1.0 {
            raw_label
        } else {
            labeled = false;
            1.0
        };
        samples.push(SparseSample {
            indices,
            values,
            label,
        });
    }
    Ok((samples, labeled))
}

/// Flat CSR store of all samples with co-located optimizer state.
#[derive(Debug, Clone)]
pub struct PrototypeStore {
    cells: Vec<f64>,
    row_ptr: Vec<usize>,
    n_samples: usize,
}

/// Build the store from parsed samples, initializing the optimizer state:
/// alpha = 0, gradient = -label, and the index-set code for (alpha = 0, y).
pub fn build_store(samples: &[SparseSample], c: f64) -> Result<PrototypeStore, DataError> {
    if samples.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let total_cells: usize = samples
        .iter()
        .map(|s| HEADER_CELLS + 2 * s.nnz())
        .sum();
    let mut cells = Vec::with_capacity(total_cells);
    let mut row_ptr = Vec::with_capacity(samples.len() + 1);
    row_ptr.push(0);
    for sample in samples {
        let y = sample.label;
        cells.push(0.0);
        cells.push(classify_index(0.0, y, c).code());
        cells.push(-y);
        cells.push(y);
        for (&idx, &val) in sample.indices.iter().zip(&sample.values) {
            cells.push(f64::from(idx));
            cells.push(val);
        }
        row_ptr.push(cells.len());
    }
    Ok(PrototypeStore {
        cells,
        row_ptr,
        n_samples: samples.len(),
    })
}

impl PrototypeStore {
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Row-pointer array; entry `i` is the cell offset of sample `i`.
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    /// Mutable header view plus read-only feature cells of sample `i`.
    pub fn sample_view(&mut self, i: usize) -> Result<(&mut [f64], &[f64]), DataError> {
        if i >= self.n_samples {
            return Err(DataError::SampleOutOfRange {
                id: i,
                n: self.n_samples,
            });
        }
        let row = &mut self.cells[self.row_ptr[i]..self.row_ptr[i + 1]];
        let (header, features) = row.split_at_mut(HEADER_CELLS);
        Ok((header, &*features))
    }

    /// Feature cells of sample `i` as (index, value) pairs.
    pub fn features(&self, i: usize) -> &[f64] {
        &self.cells[self.row_ptr[i] + HEADER_CELLS..self.row_ptr[i + 1]]
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.cells[self.row_ptr[i] + ALPHA]
    }

    pub fn set_code(&self, i: usize) -> f64 {
        self.cells[self.row_ptr[i] + SET_CODE]
    }

    pub fn gradient(&self, i: usize) -> f64 {
        self.cells[self.row_ptr[i] + GRADIENT]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.cells[self.row_ptr[i] + LABEL]
    }

    pub fn set_alpha(&mut self, i: usize, alpha: f64) {
        self.cells[self.row_ptr[i] + ALPHA] = alpha;
    }

    pub fn set_set_code(&mut self, i: usize, code: f64) {
        self.cells[self.row_ptr[i] + SET_CODE] = code;
    }

    pub fn set_gradient(&mut self, i: usize, gradient: f64) {
        self.cells[self.row_ptr[i] + GRADIENT] = gradient;
    }

    /// Row pointers and raw cells together, for partitioned mutable access
    /// by the parallel engine.
    pub(crate) fn ptr_and_cells_mut(&mut self) -> (&[usize], &mut [f64]) {
        (&self.row_ptr, &mut self.cells)
    }

    #[cfg(test)]
    pub(crate) fn cells(&self) -> &[f64] {
        &self.cells
    }
}

/// Precomputed self inner products, one per sample.
///
/// Caching `<x_i, x_i>` turns every RBF evaluation into a single sparse dot
/// instead of three, without a kernel cache.
#[derive(Debug, Clone)]
pub struct SelfDotTable(Vec<f64>);

impl SelfDotTable {
    pub fn build(store: &PrototypeStore) -> Self {
        let dots = (0..store.n_samples())
            .map(|i| {
                let row = store.features(i);
                sparse_dot(row, row)
            })
            .collect();
        SelfDotTable(dots)
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Memory footprint comparison between dense and CSR storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub n_samples: usize,
    /// Feature space dimensionality, taken as the largest feature id seen.
    pub n_features: u32,
    /// Fraction of nonzero entries in the dense view, in [0, 1].
    pub nonzero_fraction: f64,
    pub dense_bytes: usize,
    pub csr_bytes: usize,
    /// 1 - csr/dense when positive, else 0.
    pub percent_conserved: f64,
}

const CELL_BYTES: usize = std::mem::size_of::<f64>();

pub fn density_report(samples: &[SparseSample]) -> Result<DensityReport, DataError> {
    if samples.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let n = samples.len();
    let d = samples
        .iter()
        .flat_map(|s| s.indices.last().copied())
        .max()
        .unwrap_or(0);
    let nnz_total: usize = samples.iter().map(SparseSample::nnz).sum();
    let dense_bytes = n * d as usize * CELL_BYTES;
    let csr_bytes: usize = samples
        .iter()
        .map(|s| (HEADER_CELLS + 2 * s.nnz()) * CELL_BYTES)
        .sum::<usize>()
        + (n + 1) * CELL_BYTES;
    let nonzero_fraction = if d == 0 {
        0.0
    } else {
        nnz_total as f64 / (n as f64 * f64::from(d))
    };
    let percent_conserved = if dense_bytes > 0 {
        (1.0 - csr_bytes as f64 / dense_bytes as f64).max(0.0)
    } else {
        0.0
    };
    Ok(DensityReport {
        n_samples: n,
        n_features: d,
        nonzero_fraction,
        dense_bytes,
        csr_bytes,
        percent_conserved,
    })
}
