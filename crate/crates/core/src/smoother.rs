//! Normal equations of the state step.
//!
//! For fixed dynamics the loss is a convex quadratic in the denoised states,
//! so its minimizer solves one symmetric positive definite system. Scalar AR
//! states are shared delays, so the system is banded with bandwidth `r`.
//! VAR(1) and signature states are independent vectors per time step, so
//! the system is block-tridiagonal.

use crate::error::{Error, Result};
use crate::numerics::{
    solve_banded_spd, solve_block_tridiagonal_spd, BandedSpdMatrix, BlockTridiagonalSpdMatrix,
    DenseMatrix,
};
use serde::{Deserialize, Serialize};

/// Which time steps carry a measurement term in the scalar AR loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementRange {
    /// Every step `t = 1..N` is compared with its measurement.
    #[default]
    AllSteps,
    /// Only `t = r..N`; the first `r − 1` states are tied down by the
    /// dynamics term (and the ridge penalty) alone.
    FromOrder,
}

impl MeasurementRange {
    /// First 0-based index that carries a measurement term.
    pub fn first_index(self, order: usize) -> usize {
        match self {
            MeasurementRange::AllSteps => 0,
            MeasurementRange::FromOrder => order - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormalMatrix {
    Banded(BandedSpdMatrix),
    BlockTridiagonal(BlockTridiagonalSpdMatrix),
}

/// How entries of the stacked unknown vector map to time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLayout {
    /// One scalar `ŷ_t` per step, `t = 0..len`.
    ScalarSeries { len: usize },
    /// `num_blocks` consecutive state vectors of `block_dim` entries, the
    /// first belonging to 0-based step `first_step`.
    StateBlocks {
        first_step: usize,
        num_blocks: usize,
        block_dim: usize,
    },
}

/// Assembled state-step system `normal_matrix · x = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherSystem {
    pub normal_matrix: NormalMatrix,
    pub rhs: Vec<f64>,
    pub layout: StateLayout,
}

impl SmootherSystem {
    /// Scalar AR(r): minimizes
    /// `Σ_{t=r}^{N−1} (ŷ_{t+1} − θᵀx̂_t)² + ρ Σ_{t∈range} (y_t − ŷ_t)² + λ Σ_t ŷ_t²`
    /// over `ŷ_1..ŷ_N`, with `x̂_t` the newest-first delay vector.
    pub fn scalar_ar(
        theta: &[f64],
        y: &[f64],
        rho: f64,
        lambda: f64,
        range: MeasurementRange,
    ) -> Result<Self> {
        let r = theta.len();
        let n = y.len();
        check_weights(rho, lambda)?;
        if r == 0 {
            return Err(Error::InvalidConfig("order must be at least 1".into()));
        }
        if n <= r {
            return Err(Error::HorizonTooShort { len: n, order: r });
        }
        let mut m = BandedSpdMatrix::zeros(n, r);
        // residual at target t+1 touches indices t+1, t, …, t−r+1 with
        // coefficients 1, −θ₁, …, −θᵣ
        let mut coef = Vec::with_capacity(r + 1);
        coef.push(1.0);
        coef.extend(theta.iter().map(|v| -v));
        for t in r - 1..n - 1 {
            for (a, &ca) in coef.iter().enumerate() {
                let ia = t + 1 - a;
                for (b, &cb) in coef.iter().enumerate().skip(a) {
                    let ib = t + 1 - b;
                    m.add(ia, ib, ca * cb);
                }
            }
        }
        let mut rhs = vec![0.0; n];
        for t in range.first_index(r)..n {
            m.add(t, t, rho);
            rhs[t] = rho * y[t];
        }
        if lambda > 0.0 {
            for t in 0..n {
                m.add(t, t, lambda);
            }
        }
        Ok(SmootherSystem {
            normal_matrix: NormalMatrix::Banded(m),
            rhs,
            layout: StateLayout::ScalarSeries { len: n },
        })
    }

    /// Vector states `s_0..s_{M−1}` attached to steps `first_step..`, with
    /// `Σ ‖s_{i+1} − A s_i‖² + ρ Σ ‖y_i − C s_i‖² + λ Σ ‖s_i‖²`.
    ///
    /// `y` holds one measurement row per block.
    pub fn state_blocks(
        a: &DenseMatrix,
        c: &DenseMatrix,
        y: &DenseMatrix,
        first_step: usize,
        rho: f64,
        lambda: f64,
    ) -> Result<Self> {
        check_weights(rho, lambda)?;
        let bd = a.rows();
        if a.cols() != bd || c.cols() != bd || y.cols() != c.rows() {
            return Err(Error::DimensionMismatch(format!(
                "A {:?}, C {:?}, measurements {:?}",
                a.shape(),
                c.shape(),
                y.shape()
            )));
        }
        let nb = y.rows();
        if nb == 0 {
            return Err(Error::HorizonTooShort { len: 0, order: 1 });
        }
        let ata = a.tr_matmul(a)?;
        let ctc = c.tr_matmul(c)?;
        let neg_a = a.scale(-1.0);

        let mut m = BlockTridiagonalSpdMatrix::zeros(nb, bd);
        let mut rhs = vec![0.0; nb * bd];
        for i in 0..nb {
            let d = m.diagonal_block_mut(i);
            for r in 0..bd {
                for k in 0..bd {
                    let mut v = rho * ctc[(r, k)];
                    if i + 1 < nb {
                        v += ata[(r, k)];
                    }
                    d[(r, k)] = v;
                }
                if i > 0 {
                    d[(r, r)] += 1.0;
                }
                d[(r, r)] += lambda;
            }
            let cy = c.tr_mul_vec(y.row(i))?;
            for (dst, v) in rhs[i * bd..(i + 1) * bd].iter_mut().zip(cy) {
                *dst = rho * v;
            }
            if i + 1 < nb {
                *m.lower_block_mut(i) = neg_a.clone();
            }
        }
        Ok(SmootherSystem {
            normal_matrix: NormalMatrix::BlockTridiagonal(m),
            rhs,
            layout: StateLayout::StateBlocks {
                first_step,
                num_blocks: nb,
                block_dim: bd,
            },
        })
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        match &self.normal_matrix {
            NormalMatrix::Banded(m) => solve_banded_spd(m, &self.rhs),
            NormalMatrix::BlockTridiagonal(m) => solve_block_tridiagonal_spd(m, &self.rhs),
        }
    }

    pub fn dense_matrix(&self) -> DenseMatrix {
        match &self.normal_matrix {
            NormalMatrix::Banded(m) => m.to_dense(),
            NormalMatrix::BlockTridiagonal(m) => m.to_dense(),
        }
    }
}

fn check_weights(rho: f64, lambda: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "rho must be positive, got {rho}"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    Ok(())
}
