//! Partitioned data-parallel execution with deterministic reductions.
//!
//! Samples are split into contiguous per-worker ranges. Each parallel region
//! gives every worker mutable access to the cells of its own samples only;
//! everything else it reads is immutable shared data (the row-pointer array,
//! self-dot table, and the broadcast pair rows). Reductions over per-worker
//! results always run in ascending worker order, so the floating-point
//! outcome is independent of thread scheduling: for a fixed worker count the
//! result is bitwise reproducible, and the reduction rules (lowest-id
//! tie-breaks) make it identical across worker counts as well.

use crate::data::{PrototypeStore, SelfDotTable, ALPHA, GRADIENT, HEADER_CELLS, LABEL, SET_CODE};
use rayon::prelude::*;

/// Contiguous range of sample ids owned by one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    pub worker: usize,
    pub start: usize,
    pub end: usize,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }
}

/// Split `n` samples into `workers` contiguous balanced ranges. Sizes differ
/// by at most one, with the larger ranges first; surplus workers get empty
/// ranges when `workers > n`.
pub fn make_partitions(n: usize, workers: usize) -> Vec<Partition> {
    let w = workers.max(1);
    let base = n / w;
    let remainder = n % w;
    let mut parts = Vec::with_capacity(w);
    let mut start = 0;
    for q in 0..w {
        let len = base + usize::from(q < remainder);
        parts.push(Partition {
            worker: q,
            start,
            end: start + len,
        });
        start += len;
    }
    parts
}

/// Mutable view over the cells of one worker's samples.
///
/// Accessors take global sample ids; out-of-partition ids are a logic error
/// (checked in debug builds).
pub struct PartitionCells<'a> {
    part: Partition,
    base: usize,
    row_ptr: &'a [usize],
    cells: &'a mut [f64],
}

impl PartitionCells<'_> {
    #[inline]
    fn offset(&self, i: usize) -> usize {
        debug_assert!(self.part.contains(i), "sample {i} not owned by this worker");
        self.row_ptr[i] - self.base
    }

    pub fn partition(&self) -> Partition {
        self.part
    }

    #[inline]
    pub fn alpha(&self, i: usize) -> f64 {
        self.cells[self.offset(i) + ALPHA]
    }

    #[inline]
    pub fn set_alpha(&mut self, i: usize, alpha: f64) {
        let at = self.offset(i) + ALPHA;
        self.cells[at] = alpha;
    }

    #[inline]
    pub fn set_code(&self, i: usize) -> f64 {
        self.cells[self.offset(i) + SET_CODE]
    }

    #[inline]
    pub fn set_set_code(&mut self, i: usize, code: f64) {
        let at = self.offset(i) + SET_CODE;
        self.cells[at] = code;
    }

    #[inline]
    pub fn gradient(&self, i: usize) -> f64 {
        self.cells[self.offset(i) + GRADIENT]
    }

    #[inline]
    pub fn set_gradient(&mut self, i: usize, gradient: f64) {
        let at = self.offset(i) + GRADIENT;
        self.cells[at] = gradient;
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.cells[self.offset(i) + LABEL]
    }

    #[inline]
    pub fn features(&self, i: usize) -> &[f64] {
        let lo = self.offset(i) + HEADER_CELLS;
        let hi = self.row_ptr[i + 1] - self.base;
        &self.cells[lo..hi]
    }
}

fn split_views<'a>(store: &'a mut PrototypeStore, parts: &[Partition]) -> Vec<PartitionCells<'a>> {
    let n = store.n_samples();
    let (row_ptr, cells) = store.ptr_and_cells_mut();
    let mut views = Vec::with_capacity(parts.len());
    let mut rest = cells;
    let mut consumed = 0;
    for part in parts {
        debug_assert!(part.end <= n);
        let base = row_ptr[part.start];
        let end_cell = row_ptr[part.end];
        debug_assert_eq!(base, consumed);
        let (mine, tail) = rest.split_at_mut(end_cell - base);
        rest = tail;
        consumed = end_cell;
        views.push(PartitionCells {
            part: *part,
            base,
            row_ptr,
            cells: mine,
        });
    }
    views
}

/// Run `body` once per non-empty partition with mutable access to the
/// partition's own cells. Returns per-worker results in worker order
/// (`None` for empty partitions, whose body is never invoked). All workers
/// complete before this returns; a panicking body propagates after the
/// remaining workers quiesce.
pub fn parallel_for_samples<R, F>(
    store: &mut PrototypeStore,
    parts: &[Partition],
    body: F,
) -> Vec<Option<R>>
where
    F: Fn(&mut PartitionCells<'_>) -> R + Sync,
    R: Send,
{
    let mut views = split_views(store, parts);
    if parts.iter().filter(|p| !p.is_empty()).count() <= 1 {
        views
            .iter_mut()
            .map(|v| (!v.part.is_empty()).then(|| body(v)))
            .collect()
    } else {
        views
            .par_iter_mut()
            .map(|v| (!v.part.is_empty()).then(|| body(v)))
            .collect()
    }
}

/// Read-only companion of [`parallel_for_samples`] for work that only needs
/// shared access (gradient reconstruction, evaluation). Same ordering and
/// barrier semantics.
pub fn parallel_map<R, F>(parts: &[Partition], body: F) -> Vec<Option<R>>
where
    F: Fn(&Partition) -> R + Sync,
    R: Send,
{
    if parts.iter().filter(|p| !p.is_empty()).count() <= 1 {
        parts
            .iter()
            .map(|p| (!p.is_empty()).then(|| body(p)))
            .collect()
    } else {
        parts
            .par_iter()
            .map(|p| (!p.is_empty()).then(|| body(p)))
            .collect()
    }
}

/// One worker's threshold candidates: the minimum eligible gradient
/// (up side) and maximum eligible gradient (low side) over its samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalExtrema {
    pub up: Option<(f64, usize)>,
    pub low: Option<(f64, usize)>,
}

impl LocalExtrema {
    /// Offer a candidate for beta_up = min gradient. First strictly smaller
    /// value wins; equal values keep the earlier (lower) id.
    #[inline]
    pub fn observe_up(&mut self, gamma: f64, id: usize) {
        match self.up {
            Some((best, _)) if gamma >= best => {}
            _ => self.up = Some((gamma, id)),
        }
    }

    /// Offer a candidate for beta_low = max gradient.
    #[inline]
    pub fn observe_low(&mut self, gamma: f64, id: usize) {
        match self.low {
            Some((best, _)) if gamma <= best => {}
            _ => self.low = Some((gamma, id)),
        }
    }
}

/// Globally reduced thresholds and their worst-violator sample ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedPair {
    pub beta_up: f64,
    pub i_up: usize,
    pub beta_low: f64,
    pub i_low: usize,
}

impl SelectedPair {
    pub fn gap(&self) -> f64 {
        self.beta_low - self.beta_up
    }
}

/// Combine per-worker extrema in ascending worker order. Ties on the value
/// keep the lowest sample id. Returns `None` when either side has no
/// candidate anywhere (degenerate state).
pub fn reduce_extrema(locals: &[Option<LocalExtrema>]) -> Option<SelectedPair> {
    let mut up: Option<(f64, usize)> = None;
    let mut low: Option<(f64, usize)> = None;
    for local in locals.iter().flatten() {
        if let Some((v, id)) = local.up {
            up = match up {
                Some((bv, bid)) if bv < v || (bv == v && bid < id) => Some((bv, bid)),
                _ => Some((v, id)),
            };
        }
        if let Some((v, id)) = local.low {
            low = match low {
                Some((bv, bid)) if bv > v || (bv == v && bid < id) => Some((bv, bid)),
                _ => Some((v, id)),
            };
        }
    }
    match (up, low) {
        (Some((beta_up, i_up)), Some((beta_low, i_low))) => Some(SelectedPair {
            beta_up,
            i_up,
            beta_low,
            i_low,
        }),
        _ => None,
    }
}

/// The working pair's rows and self dots, materialized once per iteration so
/// every worker reads identical data without touching other partitions.
#[derive(Debug, Clone)]
pub struct PairBroadcast {
    pub i_up: usize,
    pub i_low: usize,
    pub up_row: Vec<f64>,
    pub low_row: Vec<f64>,
    pub up_self_dot: f64,
    pub low_self_dot: f64,
}

/// Publish the selected pair to all workers.
pub fn share_pair(
    store: &PrototypeStore,
    self_dots: &SelfDotTable,
    i_up: usize,
    i_low: usize,
) -> PairBroadcast {
    PairBroadcast {
        i_up,
        i_low,
        up_row: store.features(i_up).to_vec(),
        low_row: store.features(i_low).to_vec(),
        up_self_dot: self_dots.get(i_up),
        low_self_dot: self_dots.get(i_low),
    }
}
