//! Derived personal valuations from randomized experiments.
//!
//! A representation `H` (orthonormal rows) partitions contexts into level
//! sets `{H x = v}`. The search looks for representations whose level sets
//! contain many test/control pairs, the eligible level sets (those with a
//! significant test-vs-control difference) become the model, and each context
//! is valued by a weighted average of the effects of the eligible level sets
//! containing it.

pub mod data;
pub mod linalg;
pub mod search;
pub mod stats;
pub mod synth;
pub mod validation;
pub mod valuation;

pub use data::{
    chronological_split, discretize, ingest_csv, write_csv, Arm, DataError, DiscretizationConfig,
    DiscretizationRule, Discretized, ExperimentDataset, Instance, Schema,
};
pub use linalg::{gram_schmidt, LinalgError, Matrix};
pub use search::{
    build_pair_matrix, objective_value, search_all, search_next_h, search_pairs, AcceptedRepresentation, NextH,
    PairMatrix, Representation, SearchConfig, SearchError, SearchReport, SearchTrace,
};
pub use stats::{is_eligible, welch_statistic, ArmStats, EligibilityConfig, StatsError};
pub use synth::{generate_synthetic, MetricKind, PlantedDirection, Synthetic, SyntheticConfig, SynthError};
pub use validation::{
    incremental_metric, quartile_groups, run_validation, spearman, QuartileReport, ValidationError, ValidationRun,
};
pub use valuation::{
    dpv, enumerate_subpopulations, fit_model, read_model, score_dataset, valuation, write_model, EligibleSet,
    Subpopulation, Valuation, ValuationError,
};
