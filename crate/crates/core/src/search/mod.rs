//! Greedy search for orthonormal representations whose level sets pair up as
//! many test/control instances as possible.

mod pairs;
mod step;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Arm, ExperimentDataset};
use crate::linalg::{gram_schmidt, LinalgError, Matrix};

pub use pairs::{build_pair_matrix, objective_value, PairMatrix};
pub use step::{
    exclusion_margin, initial_h, lagrangian_gradient, projected_step, update_slacks, SearchState,
    Slacks,
};

use step::{initial_h_from, max_active, random_start, satisfies_margin, MAX_DOUBLINGS};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("training data has no {0} instances")]
    EmptyArm(Arm),
    #[error("invalid search config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("representation must have 1 <= K < F rows, got K = {k}, F = {f}")]
    InvalidShape { k: usize, f: usize },
    #[error("representation rows are not orthonormal (error {0:.3e})")]
    NotOrthonormal(f64),
    #[error("projected gradient vanished")]
    ZeroProjectedGradient,
    #[error("no initial {k}-row representation clears the exclusion margin")]
    InitializationFailed { k: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A `K × F` matrix with orthonormal rows, `1 ≤ K < F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Representation(Matrix);

impl Representation {
    pub const ORTHONORMAL_TOL: f64 = 1e-9;

    pub fn new(h: Matrix) -> Result<Self, SearchError> {
        if h.rows() == 0 || h.rows() >= h.cols() {
            return Err(SearchError::InvalidShape {
                k: h.rows(),
                f: h.cols(),
            });
        }
        let err = h.orthonormality_error();
        if err.is_nan() || err > Self::ORTHONORMAL_TOL {
            return Err(SearchError::NotOrthonormal(err));
        }
        Ok(Self(h))
    }

    /// Gram-Schmidt, then validate.
    pub fn orthonormalize(m: &Matrix) -> Result<Self, SearchError> {
        Self::new(gram_schmidt(m)?)
    }

    pub fn identity_block(k: usize, f: usize) -> Result<Self, SearchError> {
        Self::new(Matrix::identity_block(k, f))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.rows()
    }

    pub fn f(&self) -> usize {
        self.0.cols()
    }

    /// `H x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k()).map(|i| crate::linalg::dot(self.0.row(i), x)).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Representation {
    type Error = SearchError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, SearchError> {
        Self::new(Matrix::from_rows(&rows)?)
    }
}

impl From<Representation> for Vec<Vec<f64>> {
    fn from(r: Representation) -> Self {
        r.0.to_rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Row counts to sweep, ascending.
    pub k_values: Vec<usize>,
    /// Minimum squared distance of a new representation's rows from every
    /// earlier row space.
    pub margin: f64,
    pub step_size: f64,
    /// Pairs whose projection exceeds this fraction of the current maximum
    /// are released from the collapse constraint.
    pub slack_threshold: f64,
    /// Stop once every active pair projects below this.
    pub tolerance: f64,
    pub penalty: f64,
    pub max_iters: usize,
    /// Total representations accepted across the whole sweep.
    pub max_matrices: usize,
    pub min_objective_fraction: f64,
    pub pair_cap: usize,
    /// Fresh initializations tried before a search gives up.
    pub max_restarts: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k_values: vec![1, 2],
            margin: 0.01,
            step_size: 0.05,
            slack_threshold: 0.8,
            tolerance: 1e-9,
            penalty: 0.5,
            max_iters: 500,
            max_matrices: 20,
            min_objective_fraction: 0.05,
            pair_cap: 200_000,
            max_restarts: 10,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |field, reason: &str| {
            Err(SearchError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if self.k_values.is_empty() {
            return bad("k_values", "must not be empty");
        }
        if self.k_values.contains(&0) {
            return bad("k_values", "row counts must be positive");
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k_values", "must be strictly ascending");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin", "must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size", "must be positive");
        }
        if !(self.slack_threshold > 0.0 && self.slack_threshold < 1.0) {
            return bad("slack_threshold", "must lie in (0, 1)");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance", "must be positive");
        }
        if !self.penalty.is_finite() {
            return bad("penalty", "must be finite");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be positive");
        }
        if !(self.min_objective_fraction > 0.0 && self.min_objective_fraction < 1.0) {
            return bad("min_objective_fraction", "must lie in (0, 1)");
        }
        if self.pair_cap == 0 {
            return bad("pair_cap", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextH {
    Found {
        representation: Representation,
        objective: usize,
    },
    NotFound,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchTrace {
    /// Initializations tried.
    pub attempts: usize,
    /// Iterations summed over attempts.
    pub iterations: usize,
    /// Worst `|HHᵀ - I|` seen after any Gram-Schmidt step.
    pub max_orthonormality_error: f64,
}

enum Run {
    Converged(Representation),
    Failed,
}

/// Runs the slack/gradient loop from `h`.
fn run_from(
    h: Representation,
    priors: &[Representation],
    z: &PairMatrix,
    norms: &[f64],
    cfg: &SearchConfig,
    trace: &mut SearchTrace,
) -> Run {
    let mut state = SearchState::new(h, z, priors.to_vec());
    for it in 0..cfg.max_iters {
        trace.iterations += 1;
        state.iteration = it;
        let mags = z.row_max_abs(state.h.matrix());
        state.max = max_active(&mags, &state.active);
        if state.max < cfg.tolerance {
            return Run::Converged(state.h);
        }
        let grad = lagrangian_gradient(&state, z, cfg);
        let longest = norms
            .iter()
            .zip(&state.active)
            .filter(|(_, a)| **a)
            .map(|(n, _)| *n)
            .fold(0.0, f64::max);
        let eps = cfg.step_size.min(state.max / longest);
        let stepped = match projected_step(&state.h, &grad, eps) {
            Ok(m) => m,
            Err(_) if it > 0 => return Run::Converged(state.h),
            Err(_) => return Run::Failed,
        };
        let Ok(h) = Representation::orthonormalize(&stepped) else {
            return Run::Failed;
        };
        trace.max_orthonormality_error = trace
            .max_orthonormality_error
            .max(h.matrix().orthonormality_error());
        let slacks = update_slacks(&h, z, cfg.slack_threshold, Some(state.max));
        // An empty active set would stop the search with nothing collapsed.
        if slacks.active.iter().any(|&a| a) {
            state.active = slacks.active;
        }
        state.h = h;
    }
    Run::Failed
}

/// Searches for the next `k`-row representation given the accepted `priors`.
///
/// A run that stalls, exhausts `max_iters`, violates the exclusion margin or
/// collapses no pair is retried from a further perturbed start, up to
/// `max_restarts` times.
pub fn search_next_h(
    priors: &[Representation],
    z: &PairMatrix,
    k: usize,
    cfg: &SearchConfig,
) -> Result<(NextH, SearchTrace), SearchError> {
    let f = z.num_features();
    if k == 0 || k >= f {
        return Err(SearchError::InvalidShape { k, f });
    }
    let norms = z.column_norms();
    let mut trace = SearchTrace::default();
    let mut next_exp = 0u32;
    let mut random_fallback = false;
    while trace.attempts <= cfg.max_restarts && next_exp <= MAX_DOUBLINGS {
        let start = if random_fallback {
            let base = priors.last().expect("fallback only with priors").matrix();
            random_start(base, priors, cfg, next_exp)
        } else {
            match initial_h_from(priors, k, f, cfg, z, next_exp) {
                Ok(found) => Some(found),
                Err(SearchError::InitializationFailed { .. }) if priors.last().is_some_and(|p| p.k() == k) => {
                    random_fallback = true;
                    next_exp = 1;
                    continue;
                }
                Err(SearchError::InitializationFailed { .. }) => None,
                Err(e) => return Err(e),
            }
        };
        let Some((h0, used)) = start else {
            break;
        };
        trace.attempts += 1;
        next_exp = used + 1;
        if let Run::Converged(h) = run_from(h0, priors, z, &norms, cfg, &mut trace) {
            let objective = objective_value(&h, z, cfg.tolerance);
            if objective >= 1 && satisfies_margin(&h, priors, cfg.margin) {
                return Ok((
                    NextH::Found {
                        representation: h,
                        objective,
                    },
                    trace,
                ));
            }
        }
    }
    Ok((NextH::NotFound, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptedRepresentation {
    pub representation: Representation,
    pub objective: usize,
    /// Position in the sweep, starting at 0.
    pub order_index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub accepted: Vec<AcceptedRepresentation>,
    pub columns: usize,
    pub total_pairs: u64,
    pub sampled: bool,
    pub traces: Vec<SearchTrace>,
}

impl SearchReport {
    pub fn representations(&self) -> Vec<Representation> {
        self.accepted.iter().map(|a| a.representation.clone()).collect()
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        self.traces
            .iter()
            .map(|t| t.max_orthonormality_error)
            .fold(0.0, f64::max)
    }
}

/// Builds the pair matrix for `train` and sweeps `cfg.k_values`.
pub fn search_all(train: &ExperimentDataset, cfg: &SearchConfig) -> Result<SearchReport, SearchError> {
    cfg.validate()?;
    let z = build_pair_matrix(train, cfg.pair_cap, cfg.seed)?;
    search_pairs(&z, cfg)
}

/// The sweep over an existing pair matrix. Within each `K`, searching stops at
/// the first miss or low-objective result; priors carry across `K`.
pub fn search_pairs(z: &PairMatrix, cfg: &SearchConfig) -> Result<SearchReport, SearchError> {
    cfg.validate()?;
    let f = z.num_features();
    if let Some(&k) = cfg.k_values.iter().find(|&&k| k >= f) {
        return Err(SearchError::InvalidShape { k, f });
    }
    let floor = cfg.min_objective_fraction * z.len() as f64;
    let mut accepted: Vec<AcceptedRepresentation> = Vec::new();
    let mut priors: Vec<Representation> = Vec::new();
    let mut traces = Vec::new();
    'sweep: for &k in &cfg.k_values {
        while accepted.len() < cfg.max_matrices {
            let (next, trace) = search_next_h(&priors, z, k, cfg)?;
            traces.push(trace);
            let NextH::Found {
                representation,
                objective,
            } = next
            else {
                continue 'sweep;
            };
            if (objective as f64) < floor {
                continue 'sweep;
            }
            priors.push(representation.clone());
            accepted.push(AcceptedRepresentation {
                representation,
                objective,
                order_index: accepted.len(),
                seed: cfg.seed,
            });
        }
        break;
    }
    Ok(SearchReport {
        accepted,
        columns: z.len(),
        total_pairs: z.total_pairs(),
        sampled: z.sampled(),
        traces,
    })
}
