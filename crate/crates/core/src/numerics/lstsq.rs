use super::matrix::{backward_substitute, cholesky_in_place, forward_substitute, DenseMatrix};
use crate::error::{Error, Result};

/// Relative pivot size below which an unregularized normal matrix is treated
/// as rank-deficient.
const RANK_TOLERANCE: f64 = 64.0 * f64::EPSILON;

/// Ridge regression `argmin_W ‖design·W − targets‖²_F + lambda·‖W‖²_F`.
///
/// Solved through the normal equations `(designᵀdesign + lambda·I) W =
/// designᵀtargets` with a Cholesky factorization. At `lambda == 0` a
/// rank-deficient design is reported as [`Error::SingularSystem`]; no
/// pseudoinverse fallback is attempted.
pub fn solve_regularized_ls(
    design: &DenseMatrix,
    targets: &DenseMatrix,
    lambda: f64,
) -> Result<DenseMatrix> {
    let (m, n) = design.shape();
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch("empty design matrix".into()));
    }
    if targets.rows() != m {
        return Err(Error::DimensionMismatch(format!(
            "design has {m} rows but targets have {}",
            targets.rows()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if !design.is_finite() {
        return Err(Error::NonFinite("design matrix"));
    }
    if !targets.is_finite() {
        return Err(Error::NonFinite("targets"));
    }

    let mut normal = design.tr_matmul(design)?;
    normal.add_to_diagonal(lambda);
    let rhs = design.tr_matmul(targets)?;
    let max_diag = (0..n).map(|i| normal[(i, i)]).fold(0.0, f64::max);

    let mut factor = normal;
    cholesky_in_place(&mut factor).map_err(|_| Error::SingularSystem)?;
    if lambda == 0.0 {
        let min_pivot = (0..n).map(|i| factor[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot * min_pivot <= RANK_TOLERANCE * max_diag {
            return Err(Error::SingularSystem);
        }
    }

    let q = targets.cols();
    let mut out = DenseMatrix::zeros(n, q);
    let mut col = vec![0.0; n];
    for j in 0..q {
        for (i, c) in col.iter_mut().enumerate() {
            *c = rhs[(i, j)];
        }
        forward_substitute(&factor, &mut col);
        backward_substitute(&factor, &mut col);
        for (i, c) in col.iter().enumerate() {
            out[(i, j)] = *c;
        }
    }
    if !out.is_finite() {
        return Err(Error::SingularSystem);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design_returns_targets() {
        let w = solve_regularized_ls(
            &DenseMatrix::identity(3),
            &DenseMatrix::column_vector(&[1.0, 2.0, 3.0]),
            0.0,
        )
        .unwrap();
        for (a, b) in w.as_slice().iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_column_of_ones_gives_mean() {
        let w = solve_regularized_ls(
            &DenseMatrix::column_vector(&[1.0, 1.0]),
            &DenseMatrix::column_vector(&[1.0, 3.0]),
            0.0,
        )
        .unwrap();
        assert!((w[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_design_is_singular() {
        let design = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        let t = DenseMatrix::column_vector(&[1.0, 2.0, 3.0]);
        assert_eq!(
            solve_regularized_ls(&design, &t, 0.0),
            Err(Error::SingularSystem)
        );
        // ridge restores solvability
        assert!(solve_regularized_ls(&design, &t, 1e-3).is_ok());
    }

    #[test]
    fn rejects_nan() {
        let design = DenseMatrix::from_rows(&[[1.0], [f64::NAN]]).unwrap();
        let t = DenseMatrix::column_vector(&[1.0, 2.0]);
        assert!(matches!(
            solve_regularized_ls(&design, &t, 0.0),
            Err(Error::NonFinite(_))
        ));
    }
}
