//! Alternating parameter/state estimation for linear AR(r) and VAR(1) models.
//!
//! Each iteration runs a ridge least-squares parameter step on the current
//! denoised series, then re-solves the state step against the raw
//! measurements. With `lambda == 0` both steps exactly minimize the loss
//! over their own block of variables, so the loss after every iteration is
//! non-increasing. With `lambda > 0` the same holds for
//! [`LossBreakdown::objective`], which adds the ridge penalties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{delay_embed_values, ArParams, TimeSeries};
use crate::numerics::{companion_eigenvalues, dot, norm2, solve_regularized_ls, DenseMatrix};
use crate::smoother::{MeasurementRange, SmootherSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub order: usize,
    /// Weight of the measurement term relative to the dynamics term.
    pub rho: f64,
    pub lambda: f64,
    pub max_iterations: usize,
    /// Relative change of the objective below which the loop stops early.
    pub convergence_tol: f64,
    #[serde(default)]
    pub measurement_range: MeasurementRange,
}

impl FitConfig {
    pub fn new(order: usize) -> Self {
        FitConfig {
            order,
            rho: 0.1,
            lambda: 0.0,
            max_iterations: 100,
            convergence_tol: 1e-10,
            measurement_range: MeasurementRange::AllSteps,
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

    pub fn convergence_tol(mut self, tol: f64) -> Self {
        self.convergence_tol = tol;
        self
    }

    pub fn measurement_range(mut self, range: MeasurementRange) -> Self {
        self.measurement_range = range;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidConfig("order must be at least 1".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "convergence_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Loss terms after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Sum of squared one-step model residuals of the denoised states.
    pub dynamics_term: f64,
    /// Sum of squared differences between measurements and denoised values.
    pub measurement_term: f64,
    /// `dynamics_term + rho · measurement_term`.
    pub total: f64,
    /// `total / N`.
    pub normalized: f64,
    /// `lambda · (‖params‖² + ‖states‖²)`; zero when unregularized.
    pub ridge_term: f64,
}

impl LossBreakdown {
    fn new(dynamics: f64, measurement: f64, rho: f64, len: usize) -> Self {
        let total = dynamics + rho * measurement;
        LossBreakdown {
            dynamics_term: dynamics,
            measurement_term: measurement,
            total,
            normalized: total / len as f64,
            ridge_term: 0.0,
        }
    }

    /// The quantity every iteration is guaranteed not to increase.
    pub fn objective(&self) -> f64 {
        self.total + self.ridge_term
    }
}

/// Output of an alternating fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<P> {
    /// Final parameters.
    pub params: P,
    /// Final denoised series.
    pub y_hat: TimeSeries,
    /// One entry per iteration, recorded after the state step.
    pub loss_history: Vec<LossBreakdown>,
    /// Parameters estimated in each iteration.
    pub params_history: Vec<P>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Smallest eigenvalue magnitude of the final transition matrix, where
    /// the model has a companion structure.
    pub min_eig_magnitude: Option<f64>,
}

impl FitResult<ArParams> {
    /// Smallest companion eigenvalue magnitude after iteration `i` (1-based).
    pub fn min_eig_after(&self, iteration: usize) -> Result<f64> {
        let p = self
            .params_history
            .get(iteration.wrapping_sub(1))
            .ok_or_else(|| Error::IndexOutOfRange(format!("iteration {iteration}")))?;
        min_eig_magnitude(p)
    }
}

pub fn min_eig_magnitude(params: &ArParams) -> Result<f64> {
    Ok(companion_eigenvalues(params.theta())?
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min))
}

/// Loss of a scalar AR model on a denoised series against measurements.
///
/// The dynamics sum runs over `t = r..N−1` (1-based); the measurement sum
/// over the steps selected by `range`.
pub fn evaluate_loss(
    params: &ArParams,
    y_hat: &TimeSeries,
    y: &TimeSeries,
    rho: f64,
    range: MeasurementRange,
) -> Result<LossBreakdown> {
    let yh = y_hat.scalar_values()?;
    let ys = y.scalar_values()?;
    if yh.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "denoised series has {} steps, measurements {}",
            yh.len(),
            ys.len()
        )));
    }
    scalar_loss(params.theta(), yh, ys, rho, range)
}

fn scalar_loss(
    theta: &[f64],
    yh: &[f64],
    ys: &[f64],
    rho: f64,
    range: MeasurementRange,
) -> Result<LossBreakdown> {
    let r = theta.len();
    let n = ys.len();
    if n <= r {
        return Err(Error::HorizonTooShort { len: n, order: r });
    }
    let mut dynamics = 0.0;
    let mut window = vec![0.0; r];
    for t in r - 1..n - 1 {
        for (k, w) in window.iter_mut().enumerate() {
            *w = yh[t - k];
        }
        let e = yh[t + 1] - dot(theta, &window);
        dynamics += e * e;
    }
    let measurement: f64 = (range.first_index(r)..n)
        .map(|t| (ys[t] - yh[t]).powi(2))
        .sum();
    Ok(LossBreakdown::new(dynamics, measurement, rho, n))
}

/// Ridge least-squares AR coefficients of a (denoised) series.
pub fn param_step(y_hat: &TimeSeries, order: usize, lambda: f64) -> Result<ArParams> {
    let (gamma, targets) = delay_embed_values(y_hat.scalar_values()?, order)?;
    let w = solve_regularized_ls(&gamma, &DenseMatrix::column_vector(&targets), lambda)?;
    ArParams::new(w.into_vec())
}

/// Denoised series minimizing the loss for fixed coefficients.
pub fn state_step(
    params: &ArParams,
    y: &TimeSeries,
    rho: f64,
    lambda: f64,
    range: MeasurementRange,
) -> Result<TimeSeries> {
    let ys = y.scalar_values()?;
    let system = SmootherSystem::scalar_ar(params.theta(), ys, rho, lambda, range)?;
    let yh = system.solve()?;
    y.with_values(DenseMatrix::column_vector(&yh))
}

struct Convergence {
    tol: f64,
    floor: f64,
    previous: Option<f64>,
}

impl Convergence {
    fn new(tol: f64, data_energy: f64) -> Self {
        Convergence {
            tol,
            floor: tol * data_energy,
            previous: None,
        }
    }

    fn update(&mut self, objective: f64) -> bool {
        let done = objective <= self.floor
            || self
                .previous
                .is_some_and(|prev| (prev - objective).abs() <= self.tol * prev);
        self.previous = Some(objective);
        done
    }
}

/// Alternating identification of a scalar AR(r) model.
///
/// Starts from `ŷ = y`, so the first iteration's coefficients are the
/// ordinary ridge least-squares estimate on the raw measurements.
pub fn fit_ar(y: &TimeSeries, config: &FitConfig) -> Result<FitResult<ArParams>> {
    config.validate()?;
    let ys = y.scalar_values()?;
    let r = config.order;
    if ys.len() <= r {
        return Err(Error::HorizonTooShort {
            len: ys.len(),
            order: r,
        });
    }
    let mut conv = Convergence::new(config.convergence_tol, config.rho * dot(ys, ys));
    let mut y_hat = y.clone();
    let mut loss_history = Vec::new();
    let mut params_history = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let params = param_step(&y_hat, r, config.lambda)?;
        y_hat = state_step(
            &params,
            y,
            config.rho,
            config.lambda,
            config.measurement_range,
        )?;
        let mut loss = evaluate_loss(&params, &y_hat, y, config.rho, config.measurement_range)?;
        if config.lambda > 0.0 {
            let yh = y_hat.scalar_values()?;
            loss.ridge_term = config.lambda * (dot(params.theta(), params.theta()) + dot(yh, yh));
        }
        loss_history.push(loss);
        params_history.push(params);
        if conv.update(loss.objective()) {
            converged = true;
            break;
        }
    }

    let params = params_history
        .last()
        .cloned()
        .expect("at least one iteration");
    let min_eig = min_eig_magnitude(&params)?;
    Ok(FitResult {
        params,
        y_hat,
        iterations_run: loss_history.len(),
        loss_history,
        params_history,
        converged,
        min_eig_magnitude: Some(min_eig),
    })
}

/// Ridge least-squares VAR(1) transition matrix from consecutive state pairs.
pub fn var1_param_step(x_hat: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    let (n, p) = x_hat.shape();
    if n < 2 {
        return Err(Error::HorizonTooShort { len: n, order: 1 });
    }
    let prev = DenseMatrix::new(n - 1, p, x_hat.as_slice()[..(n - 1) * p].to_vec())?;
    let next = DenseMatrix::new(n - 1, p, x_hat.as_slice()[p..].to_vec())?;
    // rows satisfy x_{t+1}ᵀ ≈ x_tᵀ W, hence A = Wᵀ
    Ok(solve_regularized_ls(&prev, &next, lambda)?.transpose())
}

/// Denoised multichannel states for a fixed VAR(1) matrix, with `C = I`.
pub fn var1_state_step(
    a: &DenseMatrix,
    y: &TimeSeries,
    rho: f64,
    lambda: f64,
) -> Result<TimeSeries> {
    let p = y.channels();
    if a.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!(
            "transition matrix {:?} for {p} channels",
            a.shape()
        )));
    }
    let system =
        SmootherSystem::state_blocks(a, &DenseMatrix::identity(p), y.values(), 0, rho, lambda)?;
    let x = system.solve()?;
    y.with_values(DenseMatrix::new(y.len(), p, x)?)
}

/// Multichannel loss `Σ‖x̂_{t+1} − A x̂_t‖² + ρ Σ‖y_t − x̂_t‖²`.
pub fn evaluate_var1_loss(
    a: &DenseMatrix,
    x_hat: &TimeSeries,
    y: &TimeSeries,
    rho: f64,
) -> Result<LossBreakdown> {
    let n = y.len();
    if x_hat.values().shape() != y.values().shape() {
        return Err(Error::DimensionMismatch(
            "state and measurement shapes differ".into(),
        ));
    }
    let mut dynamics = 0.0;
    for t in 0..n.saturating_sub(1) {
        let pred = a.mul_vec(x_hat.row(t))?;
        dynamics += x_hat
            .row(t + 1)
            .iter()
            .zip(&pred)
            .map(|(x, p)| (x - p).powi(2))
            .sum::<f64>();
    }
    let measurement = x_hat
        .values()
        .as_slice()
        .iter()
        .zip(y.values().as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(LossBreakdown::new(dynamics, measurement, rho, n))
}

/// Alternating identification of a VAR(1) model with identity observation.
pub fn fit_var1(y: &TimeSeries, config: &FitConfig) -> Result<FitResult<DenseMatrix>> {
    config.validate()?;
    if config.order != 1 {
        return Err(Error::InvalidConfig(format!(
            "VAR fitting supports order 1 only, got {}",
            config.order
        )));
    }
    if y.len() < 2 {
        return Err(Error::HorizonTooShort {
            len: y.len(),
            order: 1,
        });
    }
    let raw = y.values().as_slice();
    let mut conv = Convergence::new(config.convergence_tol, config.rho * dot(raw, raw));
    let mut x_hat = y.clone();
    let mut loss_history = Vec::new();
    let mut params_history = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let a = var1_param_step(x_hat.values(), config.lambda)?;
        x_hat = var1_state_step(&a, y, config.rho, config.lambda)?;
        let mut loss = evaluate_var1_loss(&a, &x_hat, y, config.rho)?;
        if config.lambda > 0.0 {
            let xs = x_hat.values().as_slice();
            loss.ridge_term = config.lambda * (a.frobenius_norm().powi(2) + dot(xs, xs));
        }
        loss_history.push(loss);
        params_history.push(a);
        if conv.update(loss.objective()) {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        params: params_history
            .last()
            .cloned()
            .expect("at least one iteration"),
        y_hat: x_hat,
        iterations_run: loss_history.len(),
        loss_history,
        params_history,
        converged,
        min_eig_magnitude: None,
    })
}

/// Reconstruction errors against a known ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `‖θ̂ − θ‖ / ‖θ‖`.
    pub e_norm_theta: f64,
    /// `(θ̂ − θ) / ‖θ‖`, per coefficient.
    pub e_theta: Vec<f64>,
    /// `‖ŷ − x‖ / ‖x‖` against the noiseless output `x`.
    pub e_x: f64,
}

pub fn error_metrics(
    theta_hat: &[f64],
    theta_true: &[f64],
    y_hat: &[f64],
    x_true: &[f64],
) -> Result<ErrorMetrics> {
    if theta_hat.len() != theta_true.len() || y_hat.len() != x_true.len() {
        return Err(Error::DimensionMismatch(
            "metric inputs differ in length".into(),
        ));
    }
    let theta_norm = norm2(theta_true);
    let x_norm = norm2(x_true);
    if theta_norm == 0.0 || x_norm == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let e_theta: Vec<f64> = theta_hat
        .iter()
        .zip(theta_true)
        .map(|(h, t)| (h - t) / theta_norm)
        .collect();
    let dx: Vec<f64> = y_hat.iter().zip(x_true).map(|(h, t)| h - t).collect();
    Ok(ErrorMetrics {
        e_norm_theta: norm2(&e_theta),
        e_theta,
        e_x: norm2(&dx) / x_norm,
    })
}
