use super::matrix::{backward_substitute, cholesky_in_place, dot, forward_substitute, DenseMatrix};
use crate::error::{Error, Result};

/// Symmetric block-tridiagonal matrix.
///
/// `lower[i]` is the block at block-row `i + 1`, block-column `i`; the upper
/// blocks are its transposes.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonalSpdMatrix {
    block_dim: usize,
    diagonal: Vec<DenseMatrix>,
    lower: Vec<DenseMatrix>,
}

impl BlockTridiagonalSpdMatrix {
    pub fn new(diagonal: Vec<DenseMatrix>, lower: Vec<DenseMatrix>) -> Result<Self> {
        let Some(first) = diagonal.first() else {
            return Err(Error::DimensionMismatch("no diagonal blocks".into()));
        };
        let bd = first.rows();
        if lower.len() + 1 != diagonal.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} diagonal blocks need {} off-diagonal blocks, got {}",
                diagonal.len(),
                diagonal.len() - 1,
                lower.len()
            )));
        }
        for b in diagonal.iter().chain(&lower) {
            if b.shape() != (bd, bd) {
                return Err(Error::DimensionMismatch(format!(
                    "block of shape {:?}, expected {bd}x{bd}",
                    b.shape()
                )));
            }
        }
        for d in &diagonal {
            let scale = d.frobenius_norm().max(1.0);
            for i in 0..bd {
                for j in 0..i {
                    if (d[(i, j)] - d[(j, i)]).abs() > 1e-12 * scale {
                        return Err(Error::DimensionMismatch(
                            "diagonal block is not symmetric".into(),
                        ));
                    }
                }
            }
        }
        Ok(BlockTridiagonalSpdMatrix {
            block_dim: bd,
            diagonal,
            lower,
        })
    }

    /// All-zero matrix to be filled by assembly code.
    pub fn zeros(num_blocks: usize, block_dim: usize) -> Self {
        BlockTridiagonalSpdMatrix {
            block_dim,
            diagonal: vec![DenseMatrix::zeros(block_dim, block_dim); num_blocks],
            lower: vec![DenseMatrix::zeros(block_dim, block_dim); num_blocks.saturating_sub(1)],
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.diagonal.len()
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.diagonal.len()
    }

    pub fn diagonal_block(&self, i: usize) -> &DenseMatrix {
        &self.diagonal[i]
    }

    pub fn lower_block(&self, i: usize) -> &DenseMatrix {
        &self.lower[i]
    }

    pub(crate) fn diagonal_block_mut(&mut self, i: usize) -> &mut DenseMatrix {
        &mut self.diagonal[i]
    }

    pub(crate) fn lower_block_mut(&mut self, i: usize) -> &mut DenseMatrix {
        &mut self.lower[i]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let bd = self.block_dim;
        let mut m = DenseMatrix::zeros(self.dim(), self.dim());
        for (b, d) in self.diagonal.iter().enumerate() {
            for i in 0..bd {
                for j in 0..bd {
                    m[(b * bd + i, b * bd + j)] = d[(i, j)];
                }
            }
        }
        for (b, l) in self.lower.iter().enumerate() {
            for i in 0..bd {
                for j in 0..bd {
                    m[((b + 1) * bd + i, b * bd + j)] = l[(i, j)];
                    m[(b * bd + j, (b + 1) * bd + i)] = l[(i, j)];
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let bd = self.block_dim;
        let mut out = vec![0.0; self.dim()];
        for (b, d) in self.diagonal.iter().enumerate() {
            let xb = &x[b * bd..(b + 1) * bd];
            for i in 0..bd {
                out[b * bd + i] += dot(d.row(i), xb);
            }
        }
        for (b, l) in self.lower.iter().enumerate() {
            for i in 0..bd {
                for j in 0..bd {
                    let v = l[(i, j)];
                    out[(b + 1) * bd + i] += v * x[b * bd + j];
                    out[b * bd + j] += v * x[(b + 1) * bd + i];
                }
            }
        }
        out
    }
}

/// Solves a symmetric positive definite block-tridiagonal system by block
/// Cholesky (block Thomas) recursion.
pub fn solve_block_tridiagonal_spd(
    matrix: &BlockTridiagonalSpdMatrix,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let bd = matrix.block_dim;
    let nb = matrix.num_blocks();
    if rhs.len() != matrix.dim() {
        return Err(Error::DimensionMismatch(format!(
            "rhs length {} for dimension {}",
            rhs.len(),
            matrix.dim()
        )));
    }
    if rhs.iter().any(|v| !v.is_finite())
        || matrix
            .diagonal
            .iter()
            .chain(&matrix.lower)
            .any(|b| !b.is_finite())
    {
        return Err(Error::NonFinite("block-tridiagonal system"));
    }

    // factors[i] = Cholesky factor of the i-th Schur complement;
    // coupling[i] = lower[i-1] · factors[i-1]^{-T}
    let mut factors: Vec<DenseMatrix> = Vec::with_capacity(nb);
    let mut coupling: Vec<DenseMatrix> = Vec::with_capacity(nb.saturating_sub(1));
    for i in 0..nb {
        let mut schur = matrix.diagonal[i].clone();
        if i > 0 {
            let mut m = matrix.lower[i - 1].clone();
            let prev = &factors[i - 1];
            for r in 0..bd {
                forward_substitute(prev, m.row_mut(r));
            }
            for r in 0..bd {
                for c in 0..=r {
                    schur[(r, c)] -= dot(m.row(r), m.row(c));
                }
            }
            coupling.push(m);
        }
        cholesky_in_place(&mut schur).map_err(|(p, value)| Error::NotPositiveDefinite {
            pivot: i * bd + p,
            value,
        })?;
        factors.push(schur);
    }

    let mut x = rhs.to_vec();
    for i in 0..nb {
        if i > 0 {
            let (done, rest) = x.split_at_mut(i * bd);
            let prev = &done[(i - 1) * bd..];
            let m = &coupling[i - 1];
            for r in 0..bd {
                rest[r] -= dot(m.row(r), prev);
            }
        }
        forward_substitute(&factors[i], &mut x[i * bd..(i + 1) * bd]);
    }
    for i in (0..nb).rev() {
        if i + 1 < nb {
            let (head, tail) = x.split_at_mut((i + 1) * bd);
            let next = &tail[..bd];
            let m = &coupling[i];
            let cur = &mut head[i * bd..];
            for r in 0..bd {
                for c in 0..bd {
                    cur[c] -= m[(r, c)] * next[r];
                }
            }
        }
        backward_substitute(&factors[i], &mut x[i * bd..(i + 1) * bd]);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_blocks() {
        let m = BlockTridiagonalSpdMatrix::new(
            vec![DenseMatrix::identity(2); 3],
            vec![DenseMatrix::zeros(2, 2); 2],
        )
        .unwrap();
        let mut e1 = vec![0.0; 6];
        e1[0] = 1.0;
        assert_eq!(solve_block_tridiagonal_spd(&m, &e1).unwrap(), e1);
    }

    #[test]
    fn wrong_number_of_off_diagonals() {
        let r = BlockTridiagonalSpdMatrix::new(
            vec![DenseMatrix::identity(2); 3],
            vec![DenseMatrix::zeros(2, 2); 3],
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn asymmetric_diagonal_rejected() {
        let d = DenseMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(BlockTridiagonalSpdMatrix::new(vec![d], vec![]).is_err());
    }

    #[test]
    fn indefinite_second_block() {
        let one = DenseMatrix::identity(1);
        let m =
            BlockTridiagonalSpdMatrix::new(vec![one.clone(), one.clone()], vec![one.scale(2.0)])
                .unwrap();
        assert!(matches!(
            solve_block_tridiagonal_spd(&m, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }
}
