//! SMO step primitives and the no-shrinking training loop.
//!
//! Each iteration optimizes the two worst KKT violators analytically, then
//! updates the maintained gradient of every active sample in parallel and
//! re-selects the violator pair from per-worker extrema. Termination is the
//! two-threshold criterion `beta_up + 2 * epsilon >= beta_low`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{PrototypeStore, SelfDotTable};
use crate::error::{ConfigError, TrainError};
use crate::kernel::{rbf, rbf_rows, KernelParams};
use crate::model::{extract_model, SvmModel};
use crate::parallel::{
    make_partitions, parallel_for_samples, reduce_extrema, share_pair, LocalExtrema, Partition,
    SelectedPair,
};
use crate::shrink::{ActiveSet, Heuristic};

/// Index-set membership of a sample, determined by (alpha, label).
///
/// The five sets partition all samples: `Free` holds the unbounded
/// multipliers, the other four the samples stuck at a box boundary.
/// Threshold eligibility follows the set: beta_up ranges over
/// I0 ∪ I1 ∪ I2, beta_low over I0 ∪ I3 ∪ I4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexSet {
    /// I0: 0 < alpha < C.
    Free,
    /// I1: y = +1, alpha = 0.
    PositiveAtZero,
    /// I2: y = -1, alpha = C.
    NegativeAtBound,
    /// I3: y = +1, alpha = C.
    PositiveAtBound,
    /// I4: y = -1, alpha = 0.
    NegativeAtZero,
}

impl IndexSet {
    /// Numeric code stored in the sample header cell.
    pub fn code(self) -> f64 {
        match self {
            IndexSet::Free => 0.0,
            IndexSet::PositiveAtZero => 1.0,
            IndexSet::NegativeAtBound => 2.0,
            IndexSet::PositiveAtBound => 3.0,
            IndexSet::NegativeAtZero => 4.0,
        }
    }

    pub fn from_code(code: f64) -> IndexSet {
        match code as u8 {
            0 => IndexSet::Free,
            1 => IndexSet::PositiveAtZero,
            2 => IndexSet::NegativeAtBound,
            3 => IndexSet::PositiveAtBound,
            4 => IndexSet::NegativeAtZero,
            _ => panic!("invalid index-set code {code}"),
        }
    }

    #[inline]
    pub fn eligible_up(self) -> bool {
        matches!(
            self,
            IndexSet::Free | IndexSet::PositiveAtZero | IndexSet::NegativeAtBound
        )
    }

    #[inline]
    pub fn eligible_low(self) -> bool {
        matches!(
            self,
            IndexSet::Free | IndexSet::PositiveAtBound | IndexSet::NegativeAtZero
        )
    }

    #[inline]
    pub fn is_free(self) -> bool {
        matches!(self, IndexSet::Free)
    }
}

/// Classify a sample into its index set from (alpha, label, C).
///
/// Boundary tests are exact: the alpha update writes exact 0 or C when it
/// clips, so set membership is well defined in floating point.
#[inline]
pub fn classify_index(alpha: f64, y: f64, c: f64) -> IndexSet {
    if alpha <= 0.0 {
        if y > 0.0 {
            IndexSet::PositiveAtZero
        } else {
            IndexSet::NegativeAtZero
        }
    } else if alpha >= c {
        if y > 0.0 {
            IndexSet::PositiveAtBound
        } else {
            IndexSet::NegativeAtBound
        }
    } else {
        IndexSet::Free
    }
}

/// Alpha values live on a dyadic grid of this resolution.
///
/// Every stored multiplier is an integer multiple of 2^-40, and C is rounded
/// to the grid once up front. Sums and differences of grid values in the box
/// are then exact in f64 (the scaled integers stay far below 2^53 for any
/// practical C), which makes the pairwise update conserve
/// `sum(alpha_i * y_i) = 0` exactly rather than up to rounding. The grid is
/// ~9e-13, four orders of magnitude below the default tolerance, so
/// convergence behavior is unaffected.
const ALPHA_GRID_SCALE: f64 = (1u64 << 40) as f64;

#[inline]
pub(crate) fn snap_to_grid(x: f64) -> f64 {
    (x * ALPHA_GRID_SCALE).round() / ALPHA_GRID_SCALE
}

/// Trainer hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainerConfig {
    /// Regularization parameter, positive. Rounded to the alpha grid at
    /// training time.
    pub c: f64,
    /// Gaussian kernel width sigma^2, positive.
    pub sigma2: f64,
    /// Convergence tolerance, positive.
    pub epsilon: f64,
    /// Shrinking heuristic; `Heuristic::Original` disables shrinking.
    pub heuristic: Heuristic,
    /// Logical worker count for partitioned parallel regions.
    pub workers: usize,
    /// Hard iteration cap across all training phases.
    pub max_iterations: u64,
}

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;

impl TrainerConfig {
    pub fn new(c: f64, sigma2: f64) -> Self {
        TrainerConfig {
            c,
            sigma2,
            epsilon: DEFAULT_EPSILON,
            heuristic: Heuristic::Original,
            workers: default_workers(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_heuristic(mut self, heuristic: Heuristic) -> Self {
        self.heuristic = heuristic;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.c > 0.0) {
            return Err(ConfigError::InvalidC(self.c));
        }
        if !(self.sigma2 > 0.0) {
            return Err(ConfigError::InvalidSigma2(self.sigma2));
        }
        if !(self.epsilon > 0.0) {
            return Err(ConfigError::InvalidEpsilon(self.epsilon));
        }
        if self.workers == 0 {
            return Err(ConfigError::InvalidWorkers);
        }
        Ok(())
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(std::num::NonZeroUsize::get)
        .unwrap_or(1)
}

/// Result of one pairwise alpha update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub new_alpha_up: f64,
    pub new_alpha_low: f64,
    pub delta_up: f64,
    pub delta_low: f64,
    /// Whether the unconstrained solution was clipped to the box.
    pub clipped: bool,
}

impl StepOutcome {
    /// False when the pair cannot move (degenerate pair); the driver should
    /// stop or reselect.
    pub fn made_progress(&self) -> bool {
        self.delta_low != 0.0
    }
}

/// Second-derivative term of the two-variable subproblem. For the RBF kernel
/// the self-kernels are 1, so rho = 2 * K(low, up) - 2 <= 0.
pub fn compute_rho(
    i_low: usize,
    i_up: usize,
    params: KernelParams,
    store: &PrototypeStore,
    self_dots: &SelfDotTable,
) -> f64 {
    rho_from_kernel(rbf(i_low, i_up, params, store, self_dots))
}

#[inline]
pub(crate) fn rho_from_kernel(k_up_low: f64) -> f64 {
    2.0 * k_up_low - 2.0
}

/// Optimize the (up, low) pair analytically and clip jointly to the box
/// along the constraint line, so `sum(alpha_i * y_i)` is conserved exactly.
///
/// `rho` is clamped to at most -1e-12: with the RBF kernel rho is zero only
/// for duplicate samples, where the clamp yields a zero step and the
/// degenerate-pair signal fires.
pub fn update_alphas(
    alpha_up: f64,
    y_up: f64,
    gamma_up: f64,
    alpha_low: f64,
    y_low: f64,
    gamma_low: f64,
    rho: f64,
    c: f64,
) -> StepOutcome {
    let rho = rho.min(-1e-12);
    let unconstrained = alpha_low - y_low * (gamma_up - gamma_low) / rho;
    let s = y_up * y_low;
    let (lo, hi) = if s < 0.0 {
        (
            (alpha_low - alpha_up).max(0.0),
            (c + alpha_low - alpha_up).min(c),
        )
    } else {
        (
            (alpha_low + alpha_up - c).max(0.0),
            (alpha_low + alpha_up).min(c),
        )
    };
    // Empty feasible segment collapses to a point.
    let hi = hi.max(lo);
    let new_alpha_low = snap_to_grid(unconstrained.clamp(lo, hi));
    debug_assert!((lo..=hi).contains(&new_alpha_low));
    let delta_low = new_alpha_low - alpha_low;
    let delta_up = -s * delta_low;
    let new_alpha_up = alpha_up + delta_up;
    debug_assert!((0.0..=c).contains(&new_alpha_up));
    StepOutcome {
        new_alpha_up,
        new_alpha_low,
        delta_up,
        delta_low,
        clipped: unconstrained < lo || unconstrained > hi,
    }
}

/// Incremental gradient update for one sample after a pair step.
#[inline]
pub fn update_gradient(
    gamma: f64,
    y_up: f64,
    delta_up: f64,
    k_up: f64,
    y_low: f64,
    delta_low: f64,
    k_low: f64,
) -> f64 {
    gamma + y_up * delta_up * k_up + y_low * delta_low * k_low
}

/// Tolerance slack used by a training phase: the loose multiple drives the
/// shrink phase, the final one the optimality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slack {
    /// 2 * epsilon, the optimality criterion.
    Final,
    /// 20 * epsilon, the loose shrink-phase criterion.
    Loose,
}

impl Slack {
    #[inline]
    pub fn multiplier(self) -> f64 {
        match self {
            Slack::Final => 2.0,
            Slack::Loose => 20.0,
        }
    }
}

/// True iff `beta_up + slack * epsilon >= beta_low` (inclusive).
#[inline]
pub fn check_termination(beta_up: f64, beta_low: f64, epsilon: f64, slack: Slack) -> bool {
    beta_up + slack.multiplier() * epsilon >= beta_low
}

/// Worst-violator scan over the given active ids, with lowest-id tie-breaks.
/// Returns `None` when either eligible set is empty (degenerate state,
/// treated as converged).
pub fn select_working_set(store: &PrototypeStore, active: &[usize]) -> Option<SelectedPair> {
    let mut ext = LocalExtrema::default();
    for &i in active {
        let code = IndexSet::from_code(store.set_code(i));
        let g = store.gradient(i);
        if code.eligible_up() {
            ext.observe_up(g, i);
        }
        if code.eligible_low() {
            ext.observe_low(g, i);
        }
    }
    reduce_extrema(&[Some(ext)])
}

/// Hyperplane threshold at convergence: mean gradient over the free set, or
/// the threshold midpoint when no sample is free.
pub fn compute_beta(store: &PrototypeStore, beta_up: f64, beta_low: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..store.n_samples() {
        if IndexSet::from_code(store.set_code(i)).is_free() {
            sum += store.gradient(i);
            count += 1;
        }
    }
    if count > 0 {
        sum / count as f64
    } else {
        (beta_low + beta_up) / 2.0
    }
}

/// What one call to [`Optimizer::iterate`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationOutcome {
    /// Pair optimized, gradients updated, new pair selected.
    Stepped,
    /// The selected pair could not move (zero step after clipping).
    NoProgress,
    /// One eligible set is empty; no violator pair exists in the active set.
    SideEmpty,
}

/// How a training phase ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseExit {
    /// The slack criterion is satisfied on the active set.
    Converged,
    /// Degenerate pair: no step possible from the current selection.
    NoProgress,
    /// No violator pair selectable in the active set.
    SideEmpty,
}

pub(crate) struct PairState {
    pub i_up: usize,
    pub i_low: usize,
    pub gamma_up: f64,
    pub gamma_low: f64,
}

/// Step-at-a-time SMO driver over a prototype store.
///
/// Owns the optimizer state of one training run: the partitioning, the
/// active set, the current violator pair, and the two thresholds. The
/// trainers in this module and the shrinking module drive it; it is public
/// for callers that want manual stepping.
pub struct Optimizer<'a> {
    store: &'a mut PrototypeStore,
    self_dots: SelfDotTable,
    params: KernelParams,
    c: f64,
    epsilon: f64,
    parts: Vec<Partition>,
    active: ActiveSet,
    pair: PairState,
    beta_up: f64,
    beta_low: f64,
    iterations: u64,
    max_iterations: u64,
}

impl<'a> Optimizer<'a> {
    /// Validate config, reset the per-sample optimizer state, and set up the
    /// bootstrap pair (lowest-id positive as i_low, lowest-id negative as
    /// i_up).
    pub fn new(store: &'a mut PrototypeStore, config: &TrainerConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let c = snap_to_grid(config.c);
        let n = store.n_samples();
        let mut first_pos = None;
        let mut first_neg = None;
        for i in 0..n {
            let y = store.label(i);
            store.set_alpha(i, 0.0);
            store.set_gradient(i, -y);
            store.set_set_code(i, classify_index(0.0, y, c).code());
            if y > 0.0 && first_pos.is_none() {
                first_pos = Some(i);
            }
            if y < 0.0 && first_neg.is_none() {
                first_neg = Some(i);
            }
        }
        let (Some(i_low), Some(i_up)) = (first_pos, first_neg) else {
            return Err(TrainError::MissingClass);
        };
        let params = KernelParams::new(config.sigma2)?;
        let self_dots = SelfDotTable::build(store);
        let parts = make_partitions(n, config.workers);
        Ok(Optimizer {
            store,
            self_dots,
            params,
            c,
            epsilon: config.epsilon,
            parts,
            active: ActiveSet::full(n),
            pair: PairState {
                i_up,
                i_low,
                gamma_up: 1.0,
                gamma_low: -1.0,
            },
            // True initial extrema: every gradient is -y, so the eligible
            // minimum is -1 (a positive sample) and the maximum +1.
            beta_up: -1.0,
            beta_low: 1.0,
            iterations: 0,
            max_iterations: config.max_iterations,
        })
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.beta_up, self.beta_low)
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub(crate) fn active_mut(&mut self) -> &mut ActiveSet {
        &mut self.active
    }

    /// The working pair selected for the next iteration, as (i_up, i_low).
    pub fn current_pair(&self) -> (usize, usize) {
        (self.pair.i_up, self.pair.i_low)
    }

    /// Adopt an externally computed selection (post-reconstruction).
    pub(crate) fn adopt(&mut self, sel: SelectedPair) {
        self.adopt_selection(sel);
    }

    /// Run one shrink pass at the current thresholds and reset the counter.
    pub(crate) fn shrink_now(&mut self, schedule: &mut crate::shrink::ShrinkSchedule) {
        let (beta_up, beta_low) = (self.beta_up, self.beta_low);
        crate::shrink::shrink_pass(
            self.store,
            &self.parts,
            &mut self.active,
            beta_up,
            beta_low,
            schedule,
        );
    }

    /// Mutable store plus the shared context needed by gradient
    /// reconstruction, borrowed simultaneously.
    pub(crate) fn split_for_reconstruction(
        &mut self,
    ) -> (
        &mut PrototypeStore,
        &SelfDotTable,
        KernelParams,
        &[Partition],
        &ActiveSet,
    ) {
        (
            self.store,
            &self.self_dots,
            self.params,
            &self.parts,
            &self.active,
        )
    }

    pub(crate) fn split_for_reactivation(&mut self) -> (&PrototypeStore, &mut ActiveSet) {
        (self.store, &mut self.active)
    }

    fn adopt_selection(&mut self, sel: SelectedPair) {
        self.beta_up = sel.beta_up;
        self.beta_low = sel.beta_low;
        self.pair = PairState {
            i_up: sel.i_up,
            i_low: sel.i_low,
            gamma_up: sel.beta_up,
            gamma_low: sel.beta_low,
        };
    }

    pub fn converged(&self, slack: Slack) -> bool {
        check_termination(self.beta_up, self.beta_low, self.epsilon, slack)
    }

    /// One SMO iteration: optimize the current pair, update all active
    /// gradients in parallel, reduce the new extrema.
    pub fn iterate(&mut self) -> IterationOutcome {
        let i_up = self.pair.i_up;
        let i_low = self.pair.i_low;
        let y_up = self.store.label(i_up);
        let y_low = self.store.label(i_low);
        let alpha_up = self.store.alpha(i_up);
        let alpha_low = self.store.alpha(i_low);

        let bcast = share_pair(self.store, &self.self_dots, i_up, i_low);
        let k_up_low = rbf_rows(
            &bcast.up_row,
            &bcast.low_row,
            bcast.up_self_dot,
            bcast.low_self_dot,
            self.params,
        );
        let step = update_alphas(
            alpha_up,
            y_up,
            self.pair.gamma_up,
            alpha_low,
            y_low,
            self.pair.gamma_low,
            rho_from_kernel(k_up_low),
            self.c,
        );
        if !step.made_progress() {
            return IterationOutcome::NoProgress;
        }

        let up_code = classify_index(step.new_alpha_up, y_up, self.c).code();
        let low_code = classify_index(step.new_alpha_low, y_low, self.c).code();
        let params = self.params;
        let active = &self.active;
        let self_dots = &self.self_dots;
        let locals = parallel_for_samples(self.store, &self.parts, |view| {
            let p = view.partition();
            let mut ext = LocalExtrema::default();
            for &i in active.ids_in_range(p.start, p.end) {
                if i == bcast.i_up {
                    view.set_alpha(i, step.new_alpha_up);
                    view.set_set_code(i, up_code);
                }
                if i == bcast.i_low {
                    view.set_alpha(i, step.new_alpha_low);
                    view.set_set_code(i, low_code);
                }
                let self_dot = self_dots.get(i);
                let k_up = rbf_rows(
                    view.features(i),
                    &bcast.up_row,
                    self_dot,
                    bcast.up_self_dot,
                    params,
                );
                let k_low = rbf_rows(
                    view.features(i),
                    &bcast.low_row,
                    self_dot,
                    bcast.low_self_dot,
                    params,
                );
                let g = update_gradient(
                    view.gradient(i),
                    y_up,
                    step.delta_up,
                    k_up,
                    y_low,
                    step.delta_low,
                    k_low,
                );
                view.set_gradient(i, g);
                let code = IndexSet::from_code(view.set_code(i));
                if code.eligible_up() {
                    ext.observe_up(g, i);
                }
                if code.eligible_low() {
                    ext.observe_low(g, i);
                }
            }
            ext
        });
        self.iterations += 1;

        match reduce_extrema(&locals) {
            Some(sel) => {
                self.adopt_selection(sel);
                IterationOutcome::Stepped
            }
            None => IterationOutcome::SideEmpty,
        }
    }

    /// Run iterations until the slack criterion holds on the active set.
    /// `after_iteration` runs once per completed step (shrink bookkeeping).
    pub(crate) fn run_phase<F>(
        &mut self,
        slack: Slack,
        mut after_iteration: F,
    ) -> Result<PhaseExit, TrainError>
    where
        F: FnMut(&mut Self),
    {
        while !self.converged(slack) {
            if self.iterations >= self.max_iterations {
                return Err(TrainError::NonConvergence {
                    iterations: self.iterations,
                    beta_up: self.beta_up,
                    beta_low: self.beta_low,
                });
            }
            match self.iterate() {
                IterationOutcome::Stepped => after_iteration(self),
                IterationOutcome::NoProgress => return Ok(PhaseExit::NoProgress),
                IterationOutcome::SideEmpty => return Ok(PhaseExit::SideEmpty),
            }
        }
        Ok(PhaseExit::Converged)
    }

    /// Max |maintained gradient - recomputed gradient| over active samples.
    /// Diagnostic; O(active * support vectors).
    pub fn gradient_drift(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &i in self.active.ids() {
            let fresh = self.recompute_gradient(i);
            worst = worst.max((self.store.gradient(i) - fresh).abs());
        }
        worst
    }

    pub(crate) fn recompute_gradient(&self, i: usize) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.store.n_samples() {
            let alpha = self.store.alpha(j);
            if alpha > 0.0 {
                acc += alpha
                    * self.store.label(j)
                    * rbf(i, j, self.params, self.store, &self.self_dots);
            }
        }
        acc - self.store.label(i)
    }
}

/// Dual objective `sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`
/// at the store's current multipliers.
pub fn dual_objective(
    store: &PrototypeStore,
    params: KernelParams,
    self_dots: &SelfDotTable,
) -> f64 {
    let contributors: Vec<usize> = (0..store.n_samples())
        .filter(|&i| store.alpha(i) > 0.0)
        .collect();
    let linear: f64 = contributors.iter().map(|&i| store.alpha(i)).sum();
    let mut quad = 0.0;
    for &i in &contributors {
        let wi = store.alpha(i) * store.label(i);
        for &j in &contributors {
            let wj = store.alpha(j) * store.label(j);
            quad += wi * wj * rbf(i, j, params, store, self_dots);
        }
    }
    linear - 0.5 * quad
}

/// Machine-readable training summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_samples: usize,
    pub iterations: u64,
    pub wall_seconds: f64,
    pub train_seconds: f64,
    pub recon_seconds: f64,
    pub recon_count: u32,
    pub n_support: usize,
    pub beta: f64,
    /// beta_low - beta_up at termination.
    pub final_gap: f64,
    pub heuristic: String,
    pub workers: usize,
    pub converged: bool,
}

/// Train without shrinking: the full sample set stays active throughout.
pub fn train_original(
    store: &mut PrototypeStore,
    config: &TrainerConfig,
) -> Result<(SvmModel, TrainReport), TrainError> {
    let start = Instant::now();
    let mut opt = Optimizer::new(store, config)?;
    let exit = opt.run_phase(Slack::Final, |_| {})?;
    let (beta_up, beta_low) = opt.thresholds();
    let iterations = opt.iterations();
    if exit == PhaseExit::NoProgress && !opt.converged(Slack::Final) {
        return Err(TrainError::Stalled {
            iterations,
            beta_up,
            beta_low,
        });
    }
    let train_seconds = start.elapsed().as_secs_f64();
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
        recon_seconds: 0.0,
        recon_count: 0,
        n_support: model.n_support(),
        beta,
        final_gap: beta_low - beta_up,
        heuristic: Heuristic::Original.name().to_string(),
        workers: config.workers,
        converged: true,
    };
    Ok((model, report))
}
