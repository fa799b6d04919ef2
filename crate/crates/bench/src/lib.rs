//! Fixtures shared by the benchmarks.

use dpv_core::{build_pair_matrix, generate_synthetic, ExperimentDataset, PairMatrix, SyntheticConfig};

/// A planted-effect dataset with `n` instances and `f` binary features.
pub fn planted_dataset(n: usize, f: usize, seed: u64) -> ExperimentDataset {
    let cfg = SyntheticConfig {
        n_instances: n,
        num_features: f,
        seed,
        ..Default::default()
    };
    generate_synthetic(&cfg).expect("valid synthetic config").dataset
}

/// Pair columns for a planted dataset, capped at `cap`.
pub fn planted_pairs(n: usize, f: usize, cap: usize, seed: u64) -> PairMatrix {
    build_pair_matrix(&planted_dataset(n, f, seed), cap, seed).expect("both arms populated")
}
