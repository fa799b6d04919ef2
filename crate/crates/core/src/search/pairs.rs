use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Representation, SearchError};
use crate::data::{Arm, ExperimentDataset};
use crate::linalg::{dot, Matrix};

/// Columns per parallel work unit. Partial results are always combined in
/// chunk order, so reductions do not depend on the thread count.
pub(crate) const CHUNK: usize = 4096;

/// Differences `x_T(i) - x_C(j)` over test/control pairs, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    f: usize,
    columns: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    sampled: bool,
    total_pairs: u64,
}

impl PairMatrix {
    /// Builds a pair matrix from explicit columns. Mostly useful in tests.
    pub fn from_columns(f: usize, columns: &[Vec<f64>]) -> Self {
        assert!(f > 0 && columns.iter().all(|c| c.len() == f));
        Self {
            f,
            columns: columns.concat(),
            pairs: (0..columns.len()).map(|k| (k, k)).collect(),
            sampled: false,
            total_pairs: columns.len() as u64,
        }
    }

    pub fn num_features(&self) -> usize {
        self.f
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k * self.f..(k + 1) * self.f]
    }

    /// Dataset positions `(test instance, control instance)` of each column.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Instance ids of each column's pair.
    pub fn pair_ids<'a>(&self, dataset: &'a ExperimentDataset) -> Vec<(&'a str, &'a str)> {
        let inst = dataset.instances();
        self.pairs
            .iter()
            .map(|&(t, c)| (inst[t].id.as_str(), inst[c].id.as_str()))
            .collect()
    }

    pub fn sampled(&self) -> bool {
        self.sampled
    }

    /// `|T| · |C|`, whether or not every pair is materialized.
    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }

    pub(crate) fn column_chunks(&self) -> impl IndexedParallelIterator<Item = (usize, &[f64])> {
        let f = self.f;
        self.columns
            .par_chunks(CHUNK * f)
            .enumerate()
            .map(move |(c, block)| (c * CHUNK, block))
    }

    pub(crate) fn column_norms(&self) -> Vec<f64> {
        self.columns
            .chunks(self.f)
            .map(|c| dot(c, c).sqrt())
            .collect()
    }

    /// `max_i |H_i · Z_k|` for every column.
    pub(crate) fn row_max_abs(&self, h: &Matrix) -> Vec<f64> {
        let f = self.f;
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(CHUNK)
            .zip(self.columns.par_chunks(CHUNK * f))
            .for_each(|(dst, block)| {
                for (d, z) in dst.iter_mut().zip(block.chunks(f)) {
                    *d = (0..h.rows()).map(|i| dot(h.row(i), z).abs()).fold(0.0, f64::max);
                }
            });
        out
    }
}

/// Enumerates all `|T|·|C|` pairs when that fits in `pair_cap`, otherwise draws
/// exactly `pair_cap` distinct pairs uniformly with a seeded generator. Columns
/// are kept in lexicographic `(test, control)` order either way.
pub fn build_pair_matrix(
    train: &ExperimentDataset,
    pair_cap: usize,
    seed: u64,
) -> Result<PairMatrix, SearchError> {
    let tests = train.arm_indices(Arm::Test);
    let controls = train.arm_indices(Arm::Control);
    if tests.is_empty() {
        return Err(SearchError::EmptyArm(Arm::Test));
    }
    if controls.is_empty() {
        return Err(SearchError::EmptyArm(Arm::Control));
    }
    if pair_cap == 0 {
        return Err(SearchError::InvalidConfig {
            field: "pair_cap",
            reason: "must be positive".into(),
        });
    }
    let f = train.num_features();
    let total = tests.len() as u64 * controls.len() as u64;
    let nc = controls.len();
    let (flat, sampled): (Vec<usize>, bool) = if total <= pair_cap as u64 {
        ((0..total as usize).collect(), false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, total as usize, pair_cap).into_vec();
        picked.sort_unstable();
        (picked, true)
    };

    let inst = train.instances();
    let mut columns = Vec::with_capacity(flat.len() * f);
    let mut pairs = Vec::with_capacity(flat.len());
    for k in flat {
        let (t, c) = (tests[k / nc], controls[k % nc]);
        columns.extend(inst[t].context.iter().zip(&inst[c].context).map(|(a, b)| a - b));
        pairs.push((t, c));
    }
    Ok(PairMatrix {
        f,
        columns,
        pairs,
        sampled,
        total_pairs: total,
    })
}

/// Number of pairs collapsed by `H`: `Σ_k 1{‖H Z_k‖_∞ ≤ zero_tol}`.
///
/// With `zero_tol = 0` on an unsampled pair matrix this is `|P|` times the
/// size-weighted mean of `|T∩S|·|C∩S|/|S|` over the subpopulations of `H`.
pub fn objective_value(h: &Representation, z: &PairMatrix, zero_tol: f64) -> usize {
    count_collapsed(h.matrix(), z, zero_tol)
}

pub(crate) fn count_collapsed(h: &Matrix, z: &PairMatrix, zero_tol: f64) -> usize {
    let f = z.f;
    z.columns
        .par_chunks(CHUNK * f)
        .map(|block| {
            block
                .chunks(f)
                .filter(|col| (0..h.rows()).all(|i| dot(h.row(i), col).abs() <= zero_tol))
                .count()
        })
        .sum()
}
