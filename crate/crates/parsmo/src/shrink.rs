//! Adaptive sample elimination and gradient reconstruction.
//!
//! Shrinking removes samples that the elimination rule predicts will not
//! contribute to the hyperplane, freezing their multipliers. Their gradients
//! go stale, so before optimality can be declared every eliminated sample's
//! gradient is reconstructed from scratch and the thresholds are recomputed
//! over the full set; false-positive eliminations then rejoin the working
//! set. The single heuristics reconstruct once (at the loose 20-epsilon
//! point) and finish without shrinking; the multi heuristics keep shrinking
//! and reconstructing until the post-reconstruction check passes at
//! 2 epsilon.

use std::time::Instant;

use crate::data::{PrototypeStore, SelfDotTable};
use crate::error::{ConfigError, TrainError};
use crate::kernel::{rbf, KernelParams};
use crate::model::{extract_model, SvmModel};
use crate::parallel::{parallel_map, reduce_extrema, LocalExtrema, Partition, SelectedPair};
use crate::smo::{
    compute_beta, IndexSet, Optimizer, PhaseExit, Slack, TrainReport, TrainerConfig,
};

/// When the shrink counter starts: after a fixed iteration count, or after a
/// fraction of the sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trigger {
    /// Shrink every k iterations.
    Iterations(u64),
    /// Shrink every ceil(fraction * n_samples) iterations.
    SampleFraction(f64),
}

/// How often gradients are reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconMode {
    /// One reconstruction at the loose threshold, then optimization
    /// continues without shrinking.
    Single,
    /// Shrinking stays on; reconstruction runs at every inner convergence
    /// until the full-set check passes.
    Multi,
}

/// A named shrinking strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Heuristic {
    /// No shrinking.
    Original,
    Shrink { trigger: Trigger, mode: ReconMode },
}

impl Heuristic {
    /// The thirteen named strategies, in table order.
    pub fn all() -> [Heuristic; 13] {
        use ReconMode::{Multi, Single};
        use Trigger::{Iterations, SampleFraction};
        [
            Heuristic::Original,
            Heuristic::Shrink { trigger: Iterations(2), mode: Single },
            Heuristic::Shrink { trigger: Iterations(500), mode: Single },
            Heuristic::Shrink { trigger: Iterations(1000), mode: Single },
            Heuristic::Shrink { trigger: SampleFraction(0.05), mode: Single },
            Heuristic::Shrink { trigger: SampleFraction(0.10), mode: Single },
            Heuristic::Shrink { trigger: SampleFraction(0.50), mode: Single },
            Heuristic::Shrink { trigger: Iterations(2), mode: Multi },
            Heuristic::Shrink { trigger: Iterations(500), mode: Multi },
            Heuristic::Shrink { trigger: Iterations(1000), mode: Multi },
            Heuristic::Shrink { trigger: SampleFraction(0.05), mode: Multi },
            Heuristic::Shrink { trigger: SampleFraction(0.10), mode: Multi },
            Heuristic::Shrink { trigger: SampleFraction(0.50), mode: Multi },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Heuristic::Original => "original",
            Heuristic::Shrink { trigger, mode } => {
                use ReconMode::{Multi, Single};
                use Trigger::{Iterations, SampleFraction};
                match (trigger, mode) {
                    (Iterations(2), Single) => "single2",
                    (Iterations(500), Single) => "single500",
                    (Iterations(1000), Single) => "single1000",
                    (SampleFraction(f), Single) if *f == 0.05 => "single5pc",
                    (SampleFraction(f), Single) if *f == 0.10 => "single10pc",
                    (SampleFraction(f), Single) if *f == 0.50 => "single50pc",
                    (Iterations(2), Multi) => "multi2",
                    (Iterations(500), Multi) => "multi500",
                    (Iterations(1000), Multi) => "multi1000",
                    (SampleFraction(f), Multi) if *f == 0.05 => "multi5pc",
                    (SampleFraction(f), Multi) if *f == 0.10 => "multi10pc",
                    (SampleFraction(f), Multi) if *f == 0.50 => "multi50pc",
                    _ => "custom",
                }
            }
        }
    }

    pub fn is_shrinking(&self) -> bool {
        !matches!(self, Heuristic::Original)
    }
}

impl std::str::FromStr for Heuristic {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Heuristic::all()
            .into_iter()
            .find(|h| h.name() == s.to_ascii_lowercase())
            .ok_or_else(|| ConfigError::UnknownHeuristic(s.to_string()))
    }
}

impl std::fmt::Display for Heuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Resolved shrink schedule: the iteration interval and a countdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkSchedule {
    pub trigger: Trigger,
    pub mode: ReconMode,
    pub initial_interval: u64,
    pub counter: u64,
}

/// Resolve a heuristic against the dataset size. `None` for `Original`
/// (shrinking disabled).
pub fn resolve_schedule(
    heuristic: Heuristic,
    n_samples: usize,
) -> Result<Option<ShrinkSchedule>, ConfigError> {
    match heuristic {
        Heuristic::Original => Ok(None),
        Heuristic::Shrink { trigger, mode } => {
            let initial_interval = match trigger {
                Trigger::Iterations(k) => k.max(1),
                Trigger::SampleFraction(f) => {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(ConfigError::InvalidFraction(f));
                    }
                    (f * n_samples as f64).ceil() as u64
                }
            }
            .max(1);
            Ok(Some(ShrinkSchedule {
                trigger,
                mode,
                initial_interval,
                counter: initial_interval,
            }))
        }
    }
}

impl ShrinkSchedule {
    /// Count one iteration down; true when a shrink pass is due.
    pub fn tick(&mut self) -> bool {
        self.counter = self.counter.saturating_sub(1);
        self.counter == 0
    }

    /// Reset after a pass: the minimum of the heuristic interval and the
    /// surviving active-set size.
    pub fn reset(&mut self, active_len: usize) {
        self.counter = self.initial_interval.min(active_len as u64).max(1);
    }

    pub fn reset_to_initial(&mut self) {
        self.counter = self.initial_interval;
    }
}

/// Ordered working set of sample ids; the complement is the eliminated set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    ids: Vec<usize>,
    n_total: usize,
}

impl ActiveSet {
    pub fn full(n: usize) -> Self {
        ActiveSet {
            ids: (0..n).collect(),
            n_total: n,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.ids.len() == self.n_total
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn contains(&self, i: usize) -> bool {
        self.ids.binary_search(&i).is_ok()
    }

    /// Active ids within [lo, hi), for per-partition iteration.
    pub fn ids_in_range(&self, lo: usize, hi: usize) -> &[usize] {
        let a = self.ids.partition_point(|&i| i < lo);
        let b = self.ids.partition_point(|&i| i < hi);
        &self.ids[a..b]
    }

    /// The eliminated complement, ascending.
    pub fn eliminated(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_total - self.ids.len());
        let mut next = self.ids.iter().copied().peekable();
        for i in 0..self.n_total {
            if next.peek() == Some(&i) {
                next.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn reset_full(&mut self) {
        self.ids = (0..self.n_total).collect();
    }

    pub(crate) fn replace_ids(&mut self, ids: Vec<usize>) {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        self.ids = ids;
    }
}

/// Elimination rule: a bound sample may be dropped when its gradient lies
/// strictly beyond the matching threshold. Free samples are never dropped.
#[inline]
pub fn shrink_test(set: IndexSet, gamma: f64, beta_up: f64, beta_low: f64) -> bool {
    match set {
        IndexSet::PositiveAtBound | IndexSet::NegativeAtZero => gamma < beta_up,
        IndexSet::PositiveAtZero | IndexSet::NegativeAtBound => gamma > beta_low,
        IndexSet::Free => false,
    }
}

/// Test every active sample against the elimination rule and drop the ones
/// that satisfy it; the schedule counter resets to
/// `min(initial_interval, |active after pass|)`.
pub fn shrink_pass(
    store: &PrototypeStore,
    parts: &[Partition],
    active: &mut ActiveSet,
    beta_up: f64,
    beta_low: f64,
    schedule: &mut ShrinkSchedule,
) {
    let kept_lists = parallel_map(parts, |p| {
        let mut kept = Vec::new();
        for &i in active.ids_in_range(p.start, p.end) {
            let set = IndexSet::from_code(store.set_code(i));
            if !shrink_test(set, store.gradient(i), beta_up, beta_low) {
                kept.push(i);
            }
        }
        kept
    });
    let ids: Vec<usize> = kept_lists.into_iter().flatten().flatten().collect();
    active.replace_ids(ids);
    schedule.reset(active.len());
}

/// Recompute the gradient of every eliminated sample from the current
/// multipliers, then re-reduce the thresholds over the full sample set.
/// Returns the full-set selection, or `None` when an eligible side is empty.
pub fn reconstruct_gradients(
    store: &mut PrototypeStore,
    self_dots: &SelfDotTable,
    params: KernelParams,
    parts: &[Partition],
    active: &ActiveSet,
) -> Option<SelectedPair> {
    let eliminated = active.eliminated();
    let contributors: Vec<usize> = (0..store.n_samples())
        .filter(|&j| store.alpha(j) > 0.0)
        .collect();

    if !eliminated.is_empty() {
        let shared: &PrototypeStore = store;
        let fresh = parallel_map(parts, |p| {
            let a = eliminated.partition_point(|&i| i < p.start);
            let b = eliminated.partition_point(|&i| i < p.end);
            let mut out = Vec::with_capacity(b - a);
            for &i in &eliminated[a..b] {
                let mut acc = 0.0;
                for &j in &contributors {
                    acc += shared.alpha(j)
                        * shared.label(j)
                        * rbf(i, j, params, shared, self_dots);
                }
                out.push((i, acc - shared.label(i)));
            }
            out
        });
        for (i, gamma) in fresh.into_iter().flatten().flatten() {
            store.set_gradient(i, gamma);
        }
    }

    let shared: &PrototypeStore = store;
    let locals: Vec<Option<LocalExtrema>> = parallel_map(parts, |p| {
        let mut ext = LocalExtrema::default();
        for i in p.start..p.end {
            let code = IndexSet::from_code(shared.set_code(i));
            let g = shared.gradient(i);
            if code.eligible_up() {
                ext.observe_up(g, i);
            }
            if code.eligible_low() {
                ext.observe_low(g, i);
            }
        }
        ext
    });
    reduce_extrema(&locals)
}

/// After a reconstruction in multi mode, eliminated samples whose fresh
/// gradient no longer satisfies the elimination rule rejoin the active set.
fn reactivate(store: &PrototypeStore, active: &mut ActiveSet, beta_up: f64, beta_low: f64) {
    let rejoining: Vec<usize> = active
        .eliminated()
        .into_iter()
        .filter(|&i| {
            let set = IndexSet::from_code(store.set_code(i));
            !shrink_test(set, store.gradient(i), beta_up, beta_low)
        })
        .collect();
    if rejoining.is_empty() {
        return;
    }
    let mut merged = Vec::with_capacity(active.len() + rejoining.len());
    let mut a = active.ids().iter().copied().peekable();
    let mut b = rejoining.into_iter().peekable();
    loop {
        match (a.peek(), b.peek()) {
            (Some(&x), Some(&y)) if x < y => merged.push(a.next().unwrap()),
            (Some(_), Some(_)) => merged.push(b.next().unwrap()),
            (Some(_), None) => merged.push(a.next().unwrap()),
            (None, Some(_)) => merged.push(b.next().unwrap()),
            (None, None) => break,
        }
    }
    active.replace_ids(merged);
}

struct ReconStats {
    seconds: f64,
    count: u32,
}

fn reconstruct_into(opt: &mut Optimizer<'_>, stats: &mut ReconStats) -> bool {
    let t = Instant::now();
    let (store, self_dots, params, parts, active) = opt.split_for_reconstruction();
    let selection = reconstruct_gradients(store, self_dots, params, parts, active);
    stats.seconds += t.elapsed().as_secs_f64();
    stats.count += 1;
    match selection {
        Some(sel) => {
            opt.adopt(sel);
            true
        }
        // No violator pair exists anywhere: vacuously optimal.
        None => false,
    }
}

/// Train with the configured shrinking heuristic.
pub fn train_shrinking(
    store: &mut PrototypeStore,
    config: &TrainerConfig,
) -> Result<(SvmModel, TrainReport), TrainError> {
    let Some(mut schedule) = resolve_schedule(config.heuristic, store.n_samples())? else {
        return Err(TrainError::Config(ConfigError::UnknownHeuristic(
            "original heuristic has no shrink schedule; use train_original".into(),
        )));
    };
    let start = Instant::now();
    let mut opt = Optimizer::new(store, config)?;
    let mut recon = ReconStats {
        seconds: 0.0,
        count: 0,
    };

    // Loose phase: shrink-enabled optimization down to 20 epsilon.
    let exit = opt.run_phase(Slack::Loose, |o| {
        if schedule.tick() {
            o.shrink_now(&mut schedule);
        }
    })?;
    let _ = exit; // any exit reason proceeds to reconstruction

    match schedule.mode {
        ReconMode::Single => {
            let selectable = reconstruct_into(&mut opt, &mut recon);
            if selectable && !opt.converged(Slack::Final) {
                // False positives exist: re-activate everything and finish
                // without shrinking.
                opt.active_mut().reset_full();
                schedule.reset_to_initial();
                let exit = opt.run_phase(Slack::Final, |_| {})?;
                if exit == PhaseExit::NoProgress && !opt.converged(Slack::Final) {
                    let (beta_up, beta_low) = opt.thresholds();
                    return Err(TrainError::Stalled {
                        iterations: opt.iterations(),
                        beta_up,
                        beta_low,
                    });
                }
            }
        }
        ReconMode::Multi => {
            let mut last_recon_iterations = None;
            loop {
                let selectable = reconstruct_into(&mut opt, &mut recon);
                if !selectable {
                    break;
                }
                let (beta_up, beta_low) = opt.thresholds();
                if opt.converged(Slack::Final) {
                    break;
                }
                if last_recon_iterations == Some(opt.iterations()) {
                    return Err(TrainError::Stalled {
                        iterations: opt.iterations(),
                        beta_up,
                        beta_low,
                    });
                }
                last_recon_iterations = Some(opt.iterations());
                reactivate_in(&mut opt, beta_up, beta_low);
                schedule.reset(opt.active().len());
                opt.run_phase(Slack::Final, |o| {
                    if schedule.tick() {
                        o.shrink_now(&mut schedule);
                    }
                })?;
            }
        }
    }

    let (beta_up, beta_low) = opt.thresholds();
    let iterations = opt.iterations();
    let train_seconds = (start.elapsed().as_secs_f64() - recon.seconds).max(0.0);
    let beta = compute_beta(store, beta_up, beta_low);
    let model = extract_model(store, beta, config).map_err(|_| TrainError::Stalled {
        iterations,
        beta_up,
        beta_low,
    })?;
    let report = TrainReport {
        n_samples: store.n_samples(),
        iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
        train_seconds,
        recon_seconds: recon.seconds,
        recon_count: recon.count,
        n_support: model.n_support(),
        beta,
        final_gap: beta_low - beta_up,
        heuristic: config.heuristic.name().to_string(),
        workers: config.workers,
        converged: true,
    };
    Ok((model, report))
}

fn reactivate_in(opt: &mut Optimizer<'_>, beta_up: f64, beta_low: f64) {
    let (store, active) = opt.split_for_reactivation();
    reactivate(store, active, beta_up, beta_low);
}

/// Train with the configured heuristic, dispatching between the original
/// and shrinking loops.
pub fn train(
    store: &mut PrototypeStore,
    config: &TrainerConfig,
) -> Result<(SvmModel, TrainReport), TrainError> {
    if config.heuristic.is_shrinking() {
        train_shrinking(store, config)
    } else {
        crate::smo::train_original(store, config)
    }
}
