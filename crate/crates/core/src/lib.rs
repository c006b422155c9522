//! Prior-weighted sensing-matrix design and prior-aware sparse recovery.
//!
//! The crate designs sensing matrices that match a weighted Gram target
//! in closed form, recovers sparse codes with probability-biased greedy
//! pursuit, and runs seeded Monte Carlo comparisons against baselines.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod experiments;
pub mod io;
mod linalg;
pub mod metrics;
pub mod model;
pub mod prior;
pub mod recovery;
pub mod rng;
pub mod synthetic;

pub use design::{design_baseline, design_pwdsmd, pwdsmd_objective, DesignParams, DesignReport};
pub use error::{Error, Result};
pub use experiments::{
    default_config, emit_csv, run_case, run_case_with_workers, CaseConfig, CaseId,
};
pub use model::{
    equivalent_dictionary, gram, DesignKind, Dictionary, EquivalentDictionary, GramMatrix,
    GramSource, SensingMatrix, SignalBatch, SparseSignal,
};
pub use prior::{extract_prior, weight_matrix, PriorProfile};
pub use recovery::{lw_omp, omp, pdomp, recover, RecoveryConfig, RecoveryKind, RecoveryResult};
pub use rng::Seed;
