//! Parallel SMO training for support vector machines with adaptive shrinking.
//!
//! The solver keeps every sample in a flat CSR array with the per-sample
//! optimizer state (multiplier, index-set code, gradient, label) co-located
//! ahead of the features, recomputes kernel values on demand instead of
//! caching them, and runs the per-iteration gradient updates data-parallel
//! over contiguous sample partitions with deterministic reductions: results
//! are identical for any worker count.
//!
//! Shrinking eliminates samples that a decision rule predicts will stay at
//! their bounds, under a configurable schedule (every k iterations, or every
//! fraction-of-dataset iterations). Eliminated gradients are reconstructed
//! before optimality is declared, either once (`single*` heuristics) or
//! repeatedly with shrinking kept active (`multi*` heuristics).
//!
//! Start with [`parse_svmlight`] and [`build_store`], then [`train`]:
//!
//! ```
//! use parsmo::{build_store, parse_svmlight, train, LabelPolicy, TrainerConfig};
//!
//! let text = "+1 1:2.0\n+1 1:1.5\n-1 1:-1.0\n-1 1:-2.0\n";
//! let samples = parse_svmlight(text, LabelPolicy::Strict).unwrap();
//! let mut store = build_store(&samples, 1.0).unwrap();
//! let config = TrainerConfig::new(1.0, 1.0).with_workers(1);
//! let (model, report) = train(&mut store, &config).unwrap();
//! assert!(report.converged);
//! assert!(model.n_support() > 0);
//! ```
//!
//! The `examples/` directory has one runnable example per capability; the
//! `parsmo` binary wraps the same calls behind `train`, `predict`, and
//! `bench` subcommands.

pub mod cli;
pub mod data;
pub mod error;
pub mod kernel;
pub mod model;
pub mod parallel;
pub mod shrink;
pub mod smo;

pub use data::{
    build_store, density_report, parse_svmlight, parse_svmlight_lenient, DensityReport,
    LabelPolicy, PrototypeStore, SelfDotTable, SparseSample,
};
pub use error::{ConfigError, DataError, ModelError, TrainError};
pub use kernel::{rbf, sparse_dot, KernelParams};
pub use model::{
    evaluate, extract_model, load_model, load_model_file, predict, save_model, save_model_file,
    support_ids, SvmModel,
};
pub use parallel::{make_partitions, parallel_for_samples, reduce_extrema, share_pair, Partition};
pub use shrink::{
    resolve_schedule, shrink_pass, shrink_test, train, train_shrinking, ActiveSet, Heuristic,
    ReconMode, ShrinkSchedule, Trigger,
};
pub use smo::{
    check_termination, classify_index, compute_beta, compute_rho, dual_objective,
    select_working_set, train_original, update_alphas, update_gradient, IndexSet, Optimizer,
    Slack, StepOutcome, TrainReport, TrainerConfig,
};
