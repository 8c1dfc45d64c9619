//! AR/VAR model representations, noisy simulation and delay embedding.
//!
//! Companion matrices follow the observer form: the autoregressive
//! coefficients fill the first column, ones sit on the super-diagonal and the
//! observation map reads the first state coordinate. Its output recursion is
//! `y_{t+1} = θ₁y_t + … + θᵣy_{t−r+1}`, identical to the delay-shift form.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix};

/// Ordered measurements, `N` steps by `p` channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: DenseMatrix,
    pub sample_rate_hz: Option<f64>,
    pub channel_names: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: DenseMatrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::DimensionMismatch(
                "time series needs at least one step and one channel".into(),
            ));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("time series"));
        }
        Ok(TimeSeries {
            values,
            sample_rate_hz: None,
            channel_names: None,
        })
    }

    /// Single-channel series.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(DenseMatrix::column_vector(values))
    }

    pub fn with_sample_rate(mut self, hz: f64) -> Self {
        self.sample_rate_hz = Some(hz);
        self
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} channels",
                names.len(),
                self.channels()
            )));
        }
        self.channel_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn channel(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Values of a single-channel series.
    pub fn scalar_values(&self) -> Result<&[f64]> {
        if self.channels() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected a single-channel series, got {} channels",
                self.channels()
            )));
        }
        Ok(self.values.as_slice())
    }

    /// Copy with the same metadata but new values of identical shape.
    pub(crate) fn with_values(&self, values: DenseMatrix) -> Result<Self> {
        debug_assert_eq!(values.shape(), self.values.shape());
        let mut out = Self::new(values)?;
        out.sample_rate_hz = self.sample_rate_hz;
        out.channel_names = self.channel_names.clone();
        Ok(out)
    }
}

/// Autoregressive coefficients `θ`, newest lag first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArParams {
    theta: Vec<f64>,
}

impl ArParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidConfig("AR order must be at least 1".into()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("autoregressive coefficients"));
        }
        Ok(ArParams { theta })
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Companion,
    General,
}

/// `x_{t+1} = A x_t + ν_t`, `y_t = C x_t + μ_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSsModel {
    a: DenseMatrix,
    c: DenseMatrix,
    structure: Structure,
}

impl LinearSsModel {
    /// General-structure model; `a` must be square and `c` must have as many
    /// columns as `a`.
    pub fn general(a: DenseMatrix, c: DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() || c.cols() != a.rows() || a.rows() == 0 || c.rows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "A is {:?} and C is {:?}",
                a.shape(),
                c.shape()
            )));
        }
        if !a.is_finite() || !c.is_finite() {
            return Err(Error::NonFinite("state-space matrices"));
        }
        Ok(LinearSsModel {
            a,
            c,
            structure: Structure::General,
        })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }
}

/// Gaussian noise levels for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub transition_std: f64,
    pub measurement_std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec {
            transition_std: 0.0,
            measurement_std: 0.0,
            seed: 0,
        }
    }
}

/// The seeded generator used for every stochastic draw in the crate.
pub fn rng_from_seed(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn build_companion(params: &ArParams) -> LinearSsModel {
    let r = params.order();
    let mut a = DenseMatrix::zeros(r, r);
    for (i, &t) in params.theta().iter().enumerate() {
        a[(i, 0)] = t;
        if i + 1 < r {
            a[(i, i + 1)] = 1.0;
        }
    }
    let mut c = DenseMatrix::zeros(1, r);
    c[(0, 0)] = 1.0;
    LinearSsModel {
        a,
        c,
        structure: Structure::Companion,
    }
}

/// Real AR coefficients whose companion polynomial has the given roots.
pub fn coefficients_from_roots(roots: &[Complex64]) -> Result<ArParams> {
    if roots.is_empty() {
        return Err(Error::InvalidConfig("no roots given".into()));
    }
    if roots.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("roots"));
    }
    check_conjugate_closed(roots)?;

    // ∏(z − rootᵢ), highest degree first
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &z in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * z;
        }
        poly = next;
    }
    let scale = poly.iter().fold(1.0_f64, |m, c| m.max(c.norm()));
    if poly.iter().any(|c| c.im.abs() > 1e-9 * scale) {
        return Err(Error::NotConjugateClosed);
    }
    ArParams::new(poly[1..].iter().map(|c| -c.re).collect())
}

fn check_conjugate_closed(roots: &[Complex64]) -> Result<()> {
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let z = roots[i];
        let tol = 1e-9 * z.norm().max(1.0);
        used[i] = true;
        if z.im.abs() <= tol {
            continue;
        }
        let partner = (0..roots.len()).find(|&j| !used[j] && (roots[j] - z.conj()).norm() <= tol);
        match partner {
            Some(j) => used[j] = true,
            None => return Err(Error::NotConjugateClosed),
        }
    }
    Ok(())
}

/// Noisy trajectory of a linear state-space model.
///
/// Row `t` of the returned state matrix is `x_{t+1}` (0-based) and row `t` of
/// the series is `C x_t + μ_t`. Per step all transition components are drawn
/// first, then all measurement components, so the stream layout does not
/// depend on which noise levels are zero. Companion models take a scalar
/// transition draw added to the first coordinate only.
pub fn simulate(
    model: &LinearSsModel,
    x1: &[f64],
    horizon: usize,
    noise: &NoiseSpec,
) -> Result<(DenseMatrix, TimeSeries)> {
    let n = model.state_dim();
    let p = model.output_dim();
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    if x1.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state of length {} for state dimension {n}",
            x1.len()
        )));
    }
    if !(noise.transition_std >= 0.0 && noise.measurement_std >= 0.0) {
        return Err(Error::InvalidConfig(
            "noise levels must be non-negative".into(),
        ));
    }
    let nu_dim = match model.structure {
        Structure::Companion => 1,
        Structure::General => n,
    };

    let mut rng = rng_from_seed(noise.seed);
    let mut states = DenseMatrix::zeros(horizon, n);
    let mut ys = DenseMatrix::zeros(horizon, p);
    let mut x = x1.to_vec();
    let mut nu = vec![0.0; nu_dim];
    for t in 0..horizon {
        states.row_mut(t).copy_from_slice(&x);
        for v in nu.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v = noise.transition_std * e;
        }
        for i in 0..p {
            let e: f64 = StandardNormal.sample(&mut rng);
            ys[(t, i)] = dot(model.c.row(i), &x) + noise.measurement_std * e;
        }
        let mut next = model.a.mul_vec(&x)?;
        for (xn, v) in next.iter_mut().zip(&nu) {
            *xn += v;
        }
        x = next;
    }
    Ok((states, TimeSeries::new(ys)?))
}

/// A seeded family of noisy scalar AR trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArSimulationSpec {
    pub theta: Vec<f64>,
    pub x1: Vec<f64>,
    pub horizon: usize,
    pub transition_std: f64,
    pub measurement_std: f64,
    /// Trial `i` uses seed `base_seed + i`.
    pub base_seed: u64,
}

impl ArSimulationSpec {
    /// Fifth-order system with unit-modulus poles at angles
    /// `3π/5, 4π/5, π, 6π/5, 7π/5`, `x₁ = e₁`, 200 steps, transition
    /// variance 0.01 and unit measurement variance.
    pub fn unit_circle_order5() -> Self {
        let roots: Vec<Complex64> = (0..5)
            .map(|i| Complex64::from_polar(1.0, std::f64::consts::PI * (3.0 + i as f64) / 5.0))
            .collect();
        let theta = coefficients_from_roots(&roots)
            .expect("pole set is conjugate-closed")
            .theta
            .clone();
        let mut x1 = vec![0.0; 5];
        x1[0] = 1.0;
        ArSimulationSpec {
            theta,
            x1,
            horizon: 200,
            transition_std: 0.1,
            measurement_std: 1.0,
            base_seed: 0,
        }
    }

    pub fn params(&self) -> Result<ArParams> {
        ArParams::new(self.theta.clone())
    }

    /// Noiseless output `C x_t` and noisy measurements of trial `trial`.
    pub fn generate(&self, trial: u64) -> Result<(Vec<f64>, TimeSeries)> {
        let model = build_companion(&self.params()?);
        let noise = NoiseSpec {
            transition_std: self.transition_std,
            measurement_std: self.measurement_std,
            seed: self.base_seed.wrapping_add(trial),
        };
        let (states, y) = simulate(&model, &self.x1, self.horizon, &noise)?;
        Ok((states.column(0), y))
    }
}

/// Delay-embedding design matrix and next-step targets.
///
/// Row `j` is `(y_t, y_{t−1}, …, y_{t−r+1})` for `t = r + j` (1-based) and the
/// matching target is `y_{t+1}`.
pub fn delay_embed(y: &TimeSeries, order: usize) -> Result<(DenseMatrix, Vec<f64>)> {
    delay_embed_values(y.scalar_values()?, order)
}

pub(crate) fn delay_embed_values(y: &[f64], order: usize) -> Result<(DenseMatrix, Vec<f64>)> {
    let n = y.len();
    if order == 0 {
        return Err(Error::InvalidConfig("order must be at least 1".into()));
    }
    if n <= order {
        return Err(Error::HorizonTooShort { len: n, order });
    }
    let rows = n - order;
    let mut gamma = DenseMatrix::zeros(rows, order);
    for j in 0..rows {
        let t = order - 1 + j;
        for (k, g) in gamma.row_mut(j).iter_mut().enumerate() {
            *g = y[t - k];
        }
    }
    Ok((gamma, y[order..].to_vec()))
}

/// `θᵀ · embedding` with the embedding newest-first.
pub fn predict_one_step(params: &ArParams, embedding: &[f64]) -> Result<f64> {
    if embedding.len() != params.order() {
        return Err(Error::DimensionMismatch(format!(
            "embedding of length {} for order {}",
            embedding.len(),
            params.order()
        )));
    }
    Ok(dot(params.theta(), embedding))
}
