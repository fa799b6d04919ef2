#![allow(dead_code)]

use std::collections::BTreeMap;

use dpv_core::{Arm, ExperimentDataset, Instance, Matrix, Representation};
use rand::seq::SliceRandom;
use rand::Rng;

/// Small integer-feature dataset with the given arm sizes.
pub fn int_dataset<R: Rng>(rng: &mut R, n_test: usize, n_control: usize, f: usize, levels: i64) -> ExperimentDataset {
    let mut arms: Vec<Arm> = std::iter::repeat_n(Arm::Test, n_test)
        .chain(std::iter::repeat_n(Arm::Control, n_control))
        .collect();
    arms.shuffle(rng);
    let instances = arms
        .into_iter()
        .enumerate()
        .map(|(i, arm)| Instance {
            id: format!("r{i}"),
            timestamp: i as i64,
            arm,
            metric: rng.random_range(-3.0..3.0),
            context: (0..f).map(|_| rng.random_range(0..levels) as f64).collect(),
        })
        .collect();
    ExperimentDataset::new((0..f).map(|j| format!("f{j}")).collect(), instances).unwrap()
}

/// `k` rows of a random `f × f` orthogonal matrix whose entries are 0, ±1 or
/// ±1/2, so products with integer vectors are exact in floating point. Also
/// returns the rows scaled by 2 as integers.
pub fn dyadic_orthonormal<R: Rng>(rng: &mut R, f: usize, k: usize) -> (Representation, Vec<Vec<i64>>) {
    const HADAMARD: [[i64; 4]; 4] = [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]];
    let mut coords: Vec<usize> = (0..f).collect();
    coords.shuffle(rng);
    let mut doubled: Vec<Vec<i64>> = Vec::new();
    let mut rest = &coords[..];
    while !rest.is_empty() {
        if rest.len() >= 4 && rng.random_bool(0.5) {
            let block = &rest[..4];
            for h in HADAMARD {
                let mut row = vec![0i64; f];
                for (c, s) in block.iter().zip(h) {
                    row[*c] = s;
                }
                doubled.push(row);
            }
            rest = &rest[4..];
        } else {
            let mut row = vec![0i64; f];
            row[rest[0]] = 2;
            doubled.push(row);
            rest = &rest[1..];
        }
    }
    doubled.shuffle(rng);
    doubled.truncate(k);
    for row in &mut doubled {
        if rng.random_bool(0.5) {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let rows: Vec<Vec<f64>> = doubled.iter().map(|r| r.iter().map(|&v| v as f64 / 2.0).collect()).collect();
    let rep = Representation::new(Matrix::from_rows(&rows).unwrap()).unwrap();
    (rep, doubled)
}

/// Random integer `k × f` matrix of full row rank.
pub fn int_matrix<R: Rng>(rng: &mut R, k: usize, f: usize) -> Vec<Vec<i64>> {
    loop {
        let m: Vec<Vec<i64>> = (0..k).map(|_| (0..f).map(|_| rng.random_range(-3..=3)).collect()).collect();
        if rank(&m) == k {
            return m;
        }
    }
}

/// Rank over the rationals via fraction-free elimination.
pub fn rank(m: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let cols = a.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..a.len()).find(|&i| a[i][c] != 0) else {
            continue;
        };
        a.swap(r, p);
        for i in 0..a.len() {
            if i != r && a[i][c] != 0 {
                let (x, y) = (a[r][c], a[i][c]);
                let pivot = a[r].clone();
                for (v, p) in a[i].iter_mut().zip(&pivot) {
                    *v = *v * x - p * y;
                }
                let g = a[i].iter().fold(0i128, |g, &v| gcd(g, v.abs()));
                if g > 1 {
                    a[i].iter_mut().for_each(|v| *v /= g);
                }
            }
        }
        r += 1;
    }
    r
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn to_matrix(m: &[Vec<i64>]) -> Matrix {
    Matrix::from_rows(&m.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect::<Vec<_>>()).unwrap()
}

pub fn int_product(m: &[Vec<i64>], x: &[f64]) -> Vec<i64> {
    m.iter()
        .map(|r| r.iter().zip(x).map(|(&a, &b)| a * b as i64).sum())
        .collect()
}

/// Exact partition by the integer key `M x`, as sorted member lists.
pub fn exact_partition(m: &[Vec<i64>], dataset: &ExperimentDataset) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (i, inst) in dataset.instances().iter().enumerate() {
        groups.entry(int_product(m, &inst.context)).or_default().push(i);
    }
    canonical(groups.into_values().collect())
}

pub fn canonical(mut groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    groups.iter_mut().for_each(|g| g.sort_unstable());
    groups.sort();
    groups
}
