//! Single steps of the Lagrangian search: gradient, projected update, slack
//! update and initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::pairs::PairMatrix;
use super::{Representation, SearchConfig, SearchError};
use crate::linalg::{dot, Matrix};

/// Current iterate of the search for the next representation.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub h: Representation,
    /// Slack variables `a_k`; `true` means pair `k` is meant to be collapsed.
    pub active: Vec<bool>,
    pub priors: Vec<Representation>,
    pub iteration: usize,
    pub max: f64,
}

impl SearchState {
    pub fn new(h: Representation, z: &PairMatrix, priors: Vec<Representation>) -> Self {
        Self {
            h,
            active: vec![true; z.len()],
            priors,
            iteration: 0,
            max: f64::INFINITY,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of the relaxed objective with respect to `H`, before projection.
///
/// Row `i` is `Δ_i + μ [H Σ_j (I - H_jᵀ H_j)]_i` where
/// `Δ_i = Σ_k -sign(H_i · Z_k) a_k Z_kᵀ` and the sum over `j` runs over the
/// priors. `sign(0) = 0`, so already-collapsed pairs contribute nothing.
pub fn lagrangian_gradient(state: &SearchState, z: &PairMatrix, cfg: &SearchConfig) -> Matrix {
    let h = state.h.matrix();
    let mut grad = pair_gradient(h, z, &state.active);
    if !state.priors.is_empty() {
        let penalty = prior_penalty(h, &state.priors);
        grad = grad.add_scaled(&penalty, cfg.penalty);
    }
    grad
}

fn pair_gradient(h: &Matrix, z: &PairMatrix, active: &[bool]) -> Matrix {
    let (k, f) = (h.rows(), h.cols());
    let partials: Vec<Vec<f64>> = z
        .column_chunks()
        .map(|(start, block)| {
            let mut acc = vec![0.0; k * f];
            for (offset, col) in block.chunks(f).enumerate() {
                if !active[start + offset] {
                    continue;
                }
                for i in 0..k {
                    let s = sign(dot(h.row(i), col));
                    if s == 0.0 {
                        continue;
                    }
                    for (a, zv) in acc[i * f..(i + 1) * f].iter_mut().zip(col) {
                        *a -= s * zv;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; k * f];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Matrix::from_row_major(k, f, total)
}

/// `H Σ_j (I - H_jᵀ H_j)`.
fn prior_penalty(h: &Matrix, priors: &[Representation]) -> Matrix {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for prior in priors {
        let p = prior.matrix();
        let coeffs = h.matmul(&p.transpose());
        let inside = coeffs.matmul(p);
        out = out.add_scaled(h, 1.0).add_scaled(&inside, -1.0);
    }
    out
}

/// `H + ε G/‖G‖_F` with `G = grad (I - HᵀH)`. The result is not yet
/// orthonormal.
pub fn projected_step(h: &Representation, grad: &Matrix, epsilon: f64) -> Result<Matrix, SearchError> {
    let g = h.matrix().project_out_row_space(grad);
    let norm = g.frobenius_norm();
    if norm < 1e-14 {
        return Err(SearchError::ZeroProjectedGradient);
    }
    Ok(h.matrix().add_scaled(&g, epsilon / norm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slacks {
    pub active: Vec<bool>,
    /// The `MAX` the threshold was taken against.
    pub max: f64,
}

/// Sets `a_k = 0` exactly when `max_i |H_i · Z_k| > θ · MAX`.
///
/// `MAX` defaults to the largest such magnitude over all pairs. The search
/// loop passes the `MAX` of the previous iterate's active pairs instead, so
/// that the active set tightens geometrically.
pub fn update_slacks(h: &Representation, z: &PairMatrix, theta: f64, max: Option<f64>) -> Slacks {
    let mags = z.row_max_abs(h.matrix());
    let max = max.unwrap_or_else(|| mags.iter().copied().fold(0.0, f64::max));
    let threshold = theta * max;
    Slacks {
        active: mags.iter().map(|&m| m <= threshold).collect(),
        max,
    }
}

/// `Σ_j H_j (I - PᵀP) H_jᵀ`: squared distance of `H`'s rows from the row
/// space of `P`. Zero iff `R(H) ⊆ R(P)`.
pub fn exclusion_margin(h: &Representation, prior: &Representation) -> f64 {
    let (h, p) = (h.matrix(), prior.matrix());
    let mut total = 0.0;
    for j in 0..h.rows() {
        let row = h.row(j);
        let in_space: f64 = (0..p.rows()).map(|i| dot(row, p.row(i)).powi(2)).sum();
        total += dot(row, row) - in_space;
    }
    total
}

pub(crate) fn satisfies_margin(h: &Representation, priors: &[Representation], d: f64) -> bool {
    priors.iter().all(|p| exclusion_margin(h, p) > d)
}

/// Largest doubling exponent tried when perturbing an initial iterate.
pub(crate) const MAX_DOUBLINGS: u32 = 10;

/// Starting iterate for the next search.
///
/// With no priors this is `[I_K | 0]`. Otherwise the last prior is pushed
/// along the projected gradient (every pair active) by `ε`, doubling `ε` up to
/// ten times until the exclusion margin holds against all priors. When the
/// last prior has a different row count the identity block is used, with a
/// seeded random perturbation if the plain block violates the margin.
pub fn initial_h(
    priors: &[Representation],
    k: usize,
    f: usize,
    cfg: &SearchConfig,
    z: &PairMatrix,
) -> Result<Representation, SearchError> {
    initial_h_from(priors, k, f, cfg, z, 0).map(|(h, _)| h)
}

/// As [`initial_h`], starting the doubling schedule at `first`. Returns the
/// exponent that produced the iterate so a restart can continue past it.
pub(crate) fn initial_h_from(
    priors: &[Representation],
    k: usize,
    f: usize,
    cfg: &SearchConfig,
    z: &PairMatrix,
    first: u32,
) -> Result<(Representation, u32), SearchError> {
    if k == 0 || k >= f {
        return Err(SearchError::InvalidShape { k, f });
    }
    let failed = || SearchError::InitializationFailed { k };
    match priors.last() {
        Some(last) if last.k() == k => {
            let state = SearchState {
                h: last.clone(),
                active: vec![true; z.len()],
                priors: priors.to_vec(),
                iteration: 0,
                max: f64::INFINITY,
            };
            let grad = lagrangian_gradient(&state, z, cfg);
            for e in first..=MAX_DOUBLINGS {
                let eps = cfg.step_size * 2f64.powi(e as i32);
                let stepped = projected_step(last, &grad, eps).map_err(|_| failed())?;
                let Ok(h) = Representation::orthonormalize(&stepped) else {
                    continue;
                };
                if satisfies_margin(&h, priors, cfg.margin) {
                    return Ok((h, e));
                }
            }
            Err(failed())
        }
        _ => {
            let block = Matrix::identity_block(k, f);
            if first == 0 {
                let h = Representation::new(block.clone())?;
                if satisfies_margin(&h, priors, cfg.margin) {
                    return Ok((h, 0));
                }
            }
            random_start(&block, priors, cfg, first.max(1)).ok_or_else(failed)
        }
    }
}

/// Orthonormalized `base + ε 2^(e-1) R` for a seeded Gaussian `R`, for the
/// first `e ≥ first` that clears the exclusion margin.
pub(crate) fn random_start(
    base: &Matrix,
    priors: &[Representation],
    cfg: &SearchConfig,
    first: u32,
) -> Option<(Representation, u32)> {
    for e in first.max(1)..=MAX_DOUBLINGS {
        let noise = seeded_gaussian(base.rows(), base.cols(), cfg.seed, priors.len(), e);
        let eps = cfg.step_size * 2f64.powi(e as i32 - 1);
        let Ok(h) = Representation::orthonormalize(&base.add_scaled(&noise, eps)) else {
            continue;
        };
        if satisfies_margin(&h, priors, cfg.margin) {
            return Some((h, e));
        }
    }
    None
}

fn seeded_gaussian(k: usize, f: usize, seed: u64, n: usize, attempt: u32) -> Matrix {
    let stream = (n as u64) << 32 | (k as u64) << 8 | attempt as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let data = (0..k * f).map(|_| StandardNormal.sample(&mut rng)).collect();
    Matrix::from_row_major(k, f, data)
}

pub(crate) fn max_active(mags: &[f64], active: &[bool]) -> f64 {
    mags.par_iter()
        .zip(active.par_iter())
        .filter(|(_, a)| **a)
        .map(|(m, _)| *m)
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(rows: &[Vec<f64>]) -> Representation {
        Representation::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn gradient_empty_sums() {
        let z = PairMatrix::from_columns(3, &[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]]);
        let mut state = SearchState::new(rep(&[vec![1.0, 0.0, 0.0]]), &z, vec![]);
        state.active = vec![false, false];
        let g = lagrangian_gradient(&state, &z, &SearchConfig::default());
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_sign_zero_convention() {
        let z = PairMatrix::from_columns(2, &[vec![1.0, 0.0]]);
        let state = SearchState::new(rep(&[vec![0.0, 1.0]]), &z, vec![]);
        let g = lagrangian_gradient(&state, &z, &SearchConfig::default());
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn gradient_signs() {
        let z = PairMatrix::from_columns(2, &[vec![1.0, 2.0], vec![-3.0, 1.0]]);
        let state = SearchState::new(rep(&[vec![1.0, 0.0]]), &z, vec![]);
        let g = lagrangian_gradient(&state, &z, &SearchConfig::default());
        // -(+1)(1,2) - (-1)(-3,1)
        assert_eq!(g.as_slice(), &[-4.0, -1.0]);
    }

    #[test]
    fn gradient_prior_penalty() {
        // H (I - H1ᵀH1) = (0,1) diag(0,1) = (0,1), scaled by μ.
        let z = PairMatrix::from_columns(2, &[vec![3.0, 0.0]]);
        let prior = rep(&[vec![1.0, 0.0]]);
        let mut state = SearchState::new(rep(&[vec![0.0, 1.0]]), &z, vec![prior]);
        state.active = vec![false];
        let g = lagrangian_gradient(&state, &z, &SearchConfig::default());
        assert_eq!(g.as_slice(), &[0.0, 0.5]);
    }

    #[test]
    fn step_examples() {
        let h = rep(&[vec![1.0, 0.0]]);
        let grad = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let stepped = projected_step(&h, &grad, 0.1).unwrap();
        assert_eq!(stepped.as_slice(), &[1.0, 0.1]);
        let inside = Matrix::from_rows(&[vec![2.0, 0.0]]).unwrap();
        assert!(matches!(
            projected_step(&h, &inside, 0.1),
            Err(SearchError::ZeroProjectedGradient)
        ));
        let q = Representation::orthonormalize(&stepped).unwrap();
        assert!(q.matrix().orthonormality_error() < 1e-9);
    }

    #[test]
    fn step_length_is_epsilon() {
        let h = rep(&[vec![0.6, 0.8, 0.0], vec![0.0, 0.0, 1.0]]);
        let grad = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.3, 0.1, -4.0]]).unwrap();
        let stepped = projected_step(&h, &grad, 0.05).unwrap();
        let delta = stepped.add_scaled(h.matrix(), -1.0);
        assert!((delta.frobenius_norm() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn slack_rule() {
        let z = PairMatrix::from_columns(2, &[vec![1.0, 9.0], vec![0.4, -1.0], vec![-0.6, 0.0]]);
        let h = rep(&[vec![1.0, 0.0]]);
        let s = update_slacks(&h, &z, 0.5, None);
        assert_eq!(s.max, 1.0);
        assert_eq!(s.active, vec![false, true, false]);

        let zero = PairMatrix::from_columns(2, &[vec![0.0, 1.0], vec![0.0, 2.0]]);
        let s = update_slacks(&h, &zero, 0.5, None);
        assert_eq!(s.max, 0.0);
        assert_eq!(s.active, vec![true, true]);

        let s = update_slacks(&h, &z, 1.0 - 1e-12, None);
        assert_eq!(s.active, vec![false, true, true]);
    }

    #[test]
    fn margin_values() {
        let p = rep(&[vec![1.0, 0.0, 0.0]]);
        assert!(exclusion_margin(&p, &p).abs() < 1e-15);
        let q = rep(&[vec![0.0, 1.0, 0.0]]);
        assert!((exclusion_margin(&q, &p) - 1.0).abs() < 1e-15);
        let plane = rep(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert!(exclusion_margin(&p, &plane).abs() < 1e-15);
        assert!((exclusion_margin(&plane, &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_initialization_is_identity_block() {
        let z = PairMatrix::from_columns(4, &[vec![1.0, 0.0, 0.0, 0.0]]);
        let h = initial_h(&[], 2, 4, &SearchConfig::default(), &z).unwrap();
        assert_eq!(h.matrix().as_slice(), &[1., 0., 0., 0., 0., 1., 0., 0.]);
    }

    #[test]
    fn perturbed_initialization() {
        // Pairs push the e1 row toward (0, 1): Δ = -sign(z1) z over both columns.
        let z = PairMatrix::from_columns(2, &[vec![1.0, -1.0], vec![-2.0, 1.0]]);
        let prior = rep(&[vec![1.0, 0.0]]);
        let cfg = SearchConfig::default();
        let h = initial_h(std::slice::from_ref(&prior), 1, 2, &cfg, &z).unwrap();
        assert!(h.matrix()[(0, 1)].abs() > 0.0);
        assert!(exclusion_margin(&h, &prior) > cfg.margin);
        assert!(h.matrix().orthonormality_error() < 1e-9);
    }

    #[test]
    fn zero_gradient_initialization_fails() {
        let z = PairMatrix::from_columns(2, &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let prior = rep(&[vec![1.0, 0.0]]);
        let err = initial_h(&[prior], 1, 2, &SearchConfig::default(), &z).unwrap_err();
        assert!(matches!(err, SearchError::InitializationFailed { k: 1 }));
    }

    #[test]
    fn shape_mismatch_falls_back_to_identity() {
        let z = PairMatrix::from_columns(3, &[vec![1.0, 1.0, 1.0]]);
        let prior = rep(&[vec![1.0, 0.0, 0.0]]);
        let cfg = SearchConfig::default();
        let h = initial_h(std::slice::from_ref(&prior), 2, 3, &cfg, &z).unwrap();
        assert_eq!(h.matrix().as_slice(), &[1., 0., 0., 0., 1., 0.]);

        // The identity row alone sits inside the prior; the fallback perturbs it.
        let plane = rep(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let h = initial_h(std::slice::from_ref(&plane), 1, 3, &cfg, &z).unwrap();
        assert!(exclusion_margin(&h, &plane) > cfg.margin);
    }
}
