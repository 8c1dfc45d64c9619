//! Nonlinear AR identification with signature features.
//!
//! The state at step `t` is the depth-`d` signature of the path built from
//! the window `ŷ_{t−r+1..t}` (see [`embed_to_path`]). Dynamics and
//! observation are linear in that feature space, `s_{t+1} ≈ A s_t` and
//! `y_t ≈ C s_t`, so the parameter step is two ridge regressions and the
//! state step is a block-tridiagonal solve over free signature-space
//! trajectories. The smoothed states are not projected back onto valid
//! signatures; the next iteration recomputes signatures from `ŷ_t = C ŝ_t`.
//!
//! Unlike the linear case the loss is not monotone across iterations, since
//! the features are recomputed nonlinearly from `ŷ`. Each step is still an
//! exact minimizer at fixed features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{FitResult, LossBreakdown};
use crate::model::TimeSeries;
use crate::numerics::{dot, solve_regularized_ls, DenseMatrix};
use crate::signature::{embed_to_path, signature, signature_dim};
use crate::smoother::SmootherSystem;

/// Letters per path point; fixed by [`embed_to_path`].
pub const PATH_ALPHABET: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarFitConfig {
    pub order: usize,
    pub depth: usize,
    pub rho: f64,
    /// Ridge weight on parameters and signature states. Must be positive in
    /// practice: the constant empty-word feature makes the Gram matrices
    /// ill-conditioned at zero.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Stop once `‖ŷ_new − ŷ‖ / ‖ŷ‖` falls below this.
    pub convergence_tol: f64,
}

impl NarFitConfig {
    pub fn new(order: usize, depth: usize) -> Self {
        NarFitConfig {
            order,
            depth,
            rho: 0.1,
            lambda: 1e-3,
            max_iterations: 20,
            convergence_tol: 1e-8,
        }
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::InvalidConfig(format!(
                "signature models need order >= 2, got {}",
                self.order
            )));
        }
        if self.depth == 0 {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Linear dynamics and read-out in signature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarModel {
    /// `n_s × n_s`, acting as `s_{t+1} ≈ a_sig · s_t`.
    pub a_sig: DenseMatrix,
    /// Length `n_s`, `y_t ≈ c_sig · s_t`.
    pub c_sig: Vec<f64>,
    pub order: usize,
    pub depth: usize,
}

impl NarModel {
    pub fn new(a_sig: DenseMatrix, c_sig: Vec<f64>, order: usize, depth: usize) -> Result<Self> {
        let n = signature_dim(PATH_ALPHABET, depth);
        if a_sig.shape() != (n, n) || c_sig.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "signature dimension {n} but A is {:?} and C has {} entries",
                a_sig.shape(),
                c_sig.len()
            )));
        }
        if order < 2 {
            return Err(Error::InvalidConfig("order must be at least 2".into()));
        }
        Ok(NarModel {
            a_sig,
            c_sig,
            order,
            depth,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.c_sig.len()
    }
}

/// Signature of every full window, rows `s_r..s_N` (1-based).
pub fn signature_states(y: &[f64], order: usize, depth: usize) -> Result<DenseMatrix> {
    let n = y.len();
    if order < 2 {
        return Err(Error::EmbeddingTooShort(order));
    }
    if n < order {
        return Err(Error::HorizonTooShort { len: n, order });
    }
    let dim = signature_dim(PATH_ALPHABET, depth);
    let rows = n - order + 1;
    let mut out = DenseMatrix::zeros(rows, dim);
    for j in 0..rows {
        let sig = signature(&embed_to_path(&y[j..j + order])?, depth)?;
        out.row_mut(j).copy_from_slice(sig.coefficients());
    }
    Ok(out)
}

/// Regression matrices of the parameter step.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrices {
    /// Rows `s_r..s_{N−1}`.
    pub gamma_minus: DenseMatrix,
    /// Rows `s_{r+1}..s_N`.
    pub gamma_plus: DenseMatrix,
    /// `ŷ_{r+1}..ŷ_N`, aligned with `gamma_plus`.
    pub y_plus: Vec<f64>,
}

pub fn build_sig_matrices(
    y_hat: &TimeSeries,
    order: usize,
    depth: usize,
) -> Result<SignatureMatrices> {
    let y = y_hat.scalar_values()?;
    if y.len() <= order {
        return Err(Error::HorizonTooShort {
            len: y.len(),
            order,
        });
    }
    let states = signature_states(y, order, depth)?;
    let (rows, dim) = states.shape();
    let data = states.as_slice();
    Ok(SignatureMatrices {
        gamma_minus: DenseMatrix::new(rows - 1, dim, data[..(rows - 1) * dim].to_vec())?,
        gamma_plus: DenseMatrix::new(rows - 1, dim, data[dim..].to_vec())?,
        y_plus: y[order..].to_vec(),
    })
}

/// Ridge estimates of the signature dynamics and read-out.
pub fn nar_param_step(
    mats: &SignatureMatrices,
    order: usize,
    depth: usize,
    lambda: f64,
) -> Result<NarModel> {
    let SignatureMatrices {
        gamma_minus,
        gamma_plus,
        y_plus,
    } = mats;
    if gamma_minus.shape() != gamma_plus.shape() || gamma_plus.rows() != y_plus.len() {
        return Err(Error::DimensionMismatch(
            "signature matrices disagree".into(),
        ));
    }
    // rows satisfy s_{t+1}ᵀ ≈ s_tᵀ W, so the dynamics matrix is Wᵀ
    let a_sig = solve_regularized_ls(gamma_minus, gamma_plus, lambda)?.transpose();
    let c_sig =
        solve_regularized_ls(gamma_plus, &DenseMatrix::column_vector(y_plus), lambda)?.into_vec();
    NarModel::new(a_sig, c_sig, order, depth)
}

/// Smoothed signature states `ŝ_r..ŝ_N` and the updated series.
///
/// `ŷ_t = C ŝ_t` for `t ≥ r`; the first `r − 1` values are copied from
/// `previous`.
pub fn nar_state_step(
    model: &NarModel,
    y: &TimeSeries,
    rho: f64,
    lambda: f64,
    previous: &TimeSeries,
) -> Result<(DenseMatrix, TimeSeries)> {
    let ys = y.scalar_values()?;
    let prev = previous.scalar_values()?;
    let r = model.order;
    if ys.len() != prev.len() {
        return Err(Error::DimensionMismatch(
            "previous iterate has a different length".into(),
        ));
    }
    if ys.len() <= r {
        return Err(Error::HorizonTooShort {
            len: ys.len(),
            order: r,
        });
    }
    let n_s = model.state_dim();
    let c = DenseMatrix::new(1, n_s, model.c_sig.clone())?;
    let meas = DenseMatrix::column_vector(&ys[r - 1..]);
    let system = SmootherSystem::state_blocks(&model.a_sig, &c, &meas, r - 1, rho, lambda)?;
    let blocks = system.solve()?;
    let states = DenseMatrix::new(meas.rows(), n_s, blocks)?;

    let mut yh = prev.to_vec();
    for (j, v) in yh[r - 1..].iter_mut().enumerate() {
        *v = dot(&model.c_sig, states.row(j));
    }
    Ok((states, y.with_values(DenseMatrix::column_vector(&yh))?))
}

/// Signature-space loss of smoothed states against the measurements.
pub fn evaluate_nar_loss(
    model: &NarModel,
    states: &DenseMatrix,
    y: &TimeSeries,
    rho: f64,
) -> Result<LossBreakdown> {
    let ys = y.scalar_values()?;
    let r = model.order;
    if states.rows() + r - 1 != ys.len() {
        return Err(Error::DimensionMismatch(
            "state count does not match series".into(),
        ));
    }
    let mut dynamics = 0.0;
    for j in 0..states.rows().saturating_sub(1) {
        let pred = model.a_sig.mul_vec(states.row(j))?;
        dynamics += states
            .row(j + 1)
            .iter()
            .zip(&pred)
            .map(|(s, p)| (s - p).powi(2))
            .sum::<f64>();
    }
    let measurement: f64 = (0..states.rows())
        .map(|j| (ys[r - 1 + j] - dot(&model.c_sig, states.row(j))).powi(2))
        .sum();
    let total = dynamics + rho * measurement;
    Ok(LossBreakdown {
        dynamics_term: dynamics,
        measurement_term: measurement,
        total,
        normalized: total / ys.len() as f64,
        ridge_term: 0.0,
    })
}

/// Alternating identification of the signature-space model.
pub fn fit_nar(y: &TimeSeries, config: &NarFitConfig) -> Result<FitResult<NarModel>> {
    config.validate()?;
    let ys = y.scalar_values()?;
    if ys.len() <= config.order + 1 {
        return Err(Error::HorizonTooShort {
            len: ys.len(),
            order: config.order,
        });
    }
    let mut y_hat = y.clone();
    let mut loss_history = Vec::new();
    let mut params_history = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let mats = build_sig_matrices(&y_hat, config.order, config.depth)?;
        let model = nar_param_step(&mats, config.order, config.depth, config.lambda)?;
        let (states, next) = nar_state_step(&model, y, config.rho, config.lambda, &y_hat)?;
        let mut loss = evaluate_nar_loss(&model, &states, y, config.rho)?;
        if config.lambda > 0.0 {
            let s = states.as_slice();
            loss.ridge_term = config.lambda
                * (model.a_sig.frobenius_norm().powi(2)
                    + dot(&model.c_sig, &model.c_sig)
                    + dot(s, s));
        }
        loss_history.push(loss);
        params_history.push(model);

        let old = y_hat.scalar_values()?;
        let new = next.scalar_values()?;
        let diff: f64 = old.iter().zip(new).map(|(a, b)| (a - b).powi(2)).sum();
        let change = diff.sqrt() / dot(old, old).sqrt().max(f64::MIN_POSITIVE);
        y_hat = next;
        if change < config.convergence_tol {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        params: params_history
            .last()
            .cloned()
            .expect("at least one iteration"),
        y_hat,
        iterations_run: loss_history.len(),
        loss_history,
        params_history,
        converged,
        min_eig_magnitude: None,
    })
}

/// One-step-ahead predictions `C A s_t` from the windows of `context`.
///
/// Element `j` uses the window ending at 0-based step `order − 1 + j` and
/// predicts the value one step later; the last element is a forecast past
/// the end of the context.
pub fn nar_predict_one_step(model: &NarModel, context: &TimeSeries) -> Result<Vec<f64>> {
    let ys = context.scalar_values()?;
    let states = signature_states(ys, model.order, model.depth)?;
    // Cᵀ A as a single row
    let ca = model.a_sig.tr_mul_vec(&model.c_sig)?;
    Ok((0..states.rows())
        .map(|j| dot(&ca, states.row(j)))
        .collect())
}

/// Mean squared one-step prediction error over every step of `series` that
/// has a full window behind it.
pub fn one_step_mse(model: &NarModel, series: &TimeSeries) -> Result<f64> {
    let ys = series.scalar_values()?;
    let r = model.order;
    if ys.len() <= r {
        return Err(Error::HorizonTooShort {
            len: ys.len(),
            order: r,
        });
    }
    let preds = nar_predict_one_step(model, series)?;
    let targets = &ys[r..];
    Ok(targets
        .iter()
        .zip(&preds)
        .map(|(t, p)| (t - p).powi(2))
        .sum::<f64>()
        / targets.len() as f64)
}
