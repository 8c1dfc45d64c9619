//! Dense and structured linear algebra used by the estimators.
//!
//! Everything here is a pure function over owned or borrowed values. The
//! structured solvers (banded and block-tridiagonal Cholesky) never pivot:
//! the systems assembled by the estimators are positive definite by
//! construction, so a failed pivot means the caller assembled something
//! wrong and is reported as [`Error::NotPositiveDefinite`](crate::Error).

mod banded;
mod block;
mod lstsq;
mod matrix;
mod roots;

pub use banded::{solve_banded_spd, BandedCholesky, BandedSpdMatrix};
pub use block::{solve_block_tridiagonal_spd, BlockTridiagonalSpdMatrix};
pub use lstsq::solve_regularized_ls;
pub use matrix::DenseMatrix;
pub use roots::companion_eigenvalues;

pub(crate) use matrix::{dot, norm2};
