//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use noisy_ar::numerics::{BandedSpdMatrix, BlockTridiagonalSpdMatrix, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Dense solve by LU with full pivoting.
pub fn dense_solve(m: &DenseMatrix, rhs: &[f64]) -> Vec<f64> {
    let lu = to_na(m).full_piv_lu();
    lu.solve(&DVector::from_column_slice(rhs))
        .expect("oracle matrix is invertible")
        .as_slice()
        .to_vec()
}

/// Ridge solution through the normal equations, solved with full pivoting.
pub fn ridge_oracle(design: &DenseMatrix, targets: &[f64], lambda: f64) -> Vec<f64> {
    let x = to_na(design);
    let n = x.ncols();
    let normal = x.transpose() * &x + DMatrix::identity(n, n) * lambda;
    let rhs = x.transpose() * DVector::from_column_slice(targets);
    normal
        .full_piv_lu()
        .solve(&rhs)
        .expect("invertible")
        .as_slice()
        .to_vec()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::new(rows, cols, random_vec(rng, rows * cols)).unwrap()
}

/// Random symmetric banded matrix made positive definite by diagonal
/// dominance.
pub fn random_banded_spd(rng: &mut impl Rng, dim: usize, bandwidth: usize) -> BandedSpdMatrix {
    let mut m = BandedSpdMatrix::zeros(dim, bandwidth);
    let mut row_sums = vec![0.0; dim];
    for i in 0..dim {
        for j in i.saturating_sub(bandwidth)..i {
            let v: f64 = rng.random_range(-1.0..1.0);
            m.set(i, j, v);
            row_sums[i] += v.abs();
            row_sums[j] += v.abs();
        }
    }
    for (i, s) in row_sums.iter().enumerate() {
        m.set(i, i, s + rng.random_range(0.1..1.0));
    }
    m
}

/// Random block-tridiagonal SPD matrix: each diagonal block is a random
/// Gram matrix shifted by the norms of its neighbouring off-diagonal blocks.
pub fn random_block_spd(
    rng: &mut impl Rng,
    num_blocks: usize,
    block_dim: usize,
) -> BlockTridiagonalSpdMatrix {
    let lower: Vec<DenseMatrix> = (0..num_blocks.saturating_sub(1))
        .map(|_| random_matrix(rng, block_dim, block_dim))
        .collect();
    let diagonal = (0..num_blocks)
        .map(|i| {
            let g = random_matrix(rng, block_dim, block_dim);
            let mut d = to_na(&g) * to_na(&g).transpose();
            let shift =
                0.1 + if i > 0 {
                    lower[i - 1].frobenius_norm()
                } else {
                    0.0
                } + if i + 1 < num_blocks {
                    lower[i].frobenius_norm()
                } else {
                    0.0
                };
            for k in 0..block_dim {
                d[(k, k)] += shift;
            }
            // exact symmetry
            let d = (&d + d.transpose()) * 0.5;
            DenseMatrix::new(block_dim, block_dim, d.transpose().as_slice().to_vec()).unwrap()
        })
        .collect();
    BlockTridiagonalSpdMatrix::new(diagonal, lower).unwrap()
}

/// Minimizer of a convex quadratic known only through evaluations, found by
/// recovering the Hessian and gradient at the origin with exact second
/// differences and solving densely with full pivoting.
pub fn quadratic_minimizer(f: impl Fn(&[f64]) -> f64, dim: usize, scale: f64) -> Vec<f64> {
    let zero = vec![0.0; dim];
    let f0 = f(&zero);
    let unit = |i: usize, s: f64| {
        let mut v = zero.clone();
        v[i] = s * scale;
        v
    };
    let fi: Vec<f64> = (0..dim).map(|i| f(&unit(i, 1.0))).collect();
    let fm: Vec<f64> = (0..dim).map(|i| f(&unit(i, -1.0))).collect();
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = (fi[i] - 2.0 * f0 + fm[i]) / (scale * scale);
        for j in 0..i {
            let mut v = unit(i, 1.0);
            v[j] = scale;
            let hij = (f(&v) - fi[i] - fi[j] + f0) / (scale * scale);
            h[(i, j)] = hij;
            h[(j, i)] = hij;
        }
    }
    let g = DVector::from_iterator(dim, (0..dim).map(|i| (fi[i] - fm[i]) / (2.0 * scale)));
    h.full_piv_lu()
        .solve(&(-g))
        .expect("positive definite")
        .as_slice()
        .to_vec()
}

/// Signature coefficient of a word (1-based letters) for a polyline, by the
/// closed form over nondecreasing segment assignments: each assignment
/// contributes the product of the assigned increments divided by the
/// factorials of its run lengths.
pub fn brute_force_word(points: &[Vec<f64>], word: &[usize]) -> f64 {
    let incs: Vec<Vec<f64>> = points
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
        .collect();
    fn rec(incs: &[Vec<f64>], word: &[usize], from: usize, acc: &mut Vec<usize>) -> f64 {
        if acc.len() == word.len() {
            let mut prod = 1.0;
            for (pos, &seg) in acc.iter().enumerate() {
                prod *= incs[seg][word[pos] - 1];
            }
            let mut run = 1usize;
            let mut denom = 1.0;
            for p in 1..acc.len() {
                if acc[p] == acc[p - 1] {
                    run += 1;
                    denom *= run as f64;
                } else {
                    run = 1;
                }
            }
            return prod / denom;
        }
        let mut total = 0.0;
        for seg in from..incs.len() {
            acc.push(seg);
            total += rec(incs, word, seg, acc);
            acc.pop();
        }
        total
    }
    if word.is_empty() {
        return 1.0;
    }
    rec(&incs, word, 0, &mut Vec::new())
}

/// All words of length `m` over `k` letters in lexicographic order.
pub fn words(k: usize, m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    words(k, m - 1)
        .into_iter()
        .flat_map(|w| {
            (1..=k).map(move |l| {
                let mut v = w.clone();
                v.push(l);
                v
            })
        })
        .collect()
}
