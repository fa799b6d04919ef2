mod common;

use common::{canonical, exact_partition, int_dataset, int_matrix, to_matrix};
use dpv_core::{enumerate_subpopulations, gram_schmidt, Representation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn partition(m: &[Vec<i64>], ds: &dpv_core::ExperimentDataset) -> Vec<Vec<usize>> {
    let h = Representation::new(gram_schmidt(&to_matrix(m)).unwrap()).unwrap();
    let groups = enumerate_subpopulations(&h, 0, ds, 1e-6).unwrap();
    canonical(groups.into_iter().map(|g| g.members).collect())
}

fn multiply(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    a.iter()
        .map(|row| (0..b[0].len()).map(|j| row.iter().zip(b).map(|(x, r)| x * r[j]).sum()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn orthonormalization_keeps_the_partition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = rng.random_range(2..=5);
        let k = rng.random_range(1..f);
        let ds = int_dataset(&mut rng, 20, 20, f, 3);
        let m = int_matrix(&mut rng, k, f);
        prop_assert_eq!(partition(&m, &ds), exact_partition(&m, &ds));
    }

    #[test]
    fn equal_row_spaces_give_equal_partitions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = rng.random_range(3..=5);
        let k = rng.random_range(1..f);
        let ds = int_dataset(&mut rng, 20, 20, f, 3);
        let m = int_matrix(&mut rng, k, f);
        let mix = int_matrix(&mut rng, k, k);
        prop_assert_eq!(partition(&multiply(&mix, &m), &ds), partition(&m, &ds));
    }

    #[test]
    fn contained_row_space_coarsens(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = rng.random_range(3..=5);
        let k = rng.random_range(2..f);
        let ds = int_dataset(&mut rng, 20, 20, f, 3);
        let m = int_matrix(&mut rng, k, f);
        let sub = multiply(&int_matrix(&mut rng, k - 1, k), &m);
        let fine = partition(&m, &ds);
        let coarse = partition(&sub, &ds);
        for g in &fine {
            prop_assert!(coarse.iter().any(|c| g.iter().all(|i| c.contains(i))));
        }
    }
}
