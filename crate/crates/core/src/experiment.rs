//! Experiment recipes behind the command-line tool.
//!
//! A run is fully described by an [`ExperimentConfig`]. [`run_experiment`]
//! resolves per-command defaults, generates or loads data, fits, writes CSV
//! tables into the output directory and returns a [`RunReport`] that echoes
//! the resolved config, so rerunning the echo reproduces every number.
//!
//! Monte Carlo commands fan trials out on a rayon pool. The pool size comes
//! from `NOISY_AR_THREADS` when set; results are collected in trial order,
//! so the thread count never changes the output.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Cell, FittedModel, RunReport};
use crate::linear::{error_metrics, fit_ar, fit_var1, FitConfig, FitResult, LossBreakdown};
use crate::model::{
    predict_one_step, simulate, ArParams, ArSimulationSpec, LinearSsModel, NoiseSpec, TimeSeries,
};
use crate::nar::{fit_nar, nar_predict_one_step, one_step_mse, NarFitConfig, NarModel};
use crate::numerics::{companion_eigenvalues, DenseMatrix};
use crate::preprocess::{first_difference, inject_artefact};
use crate::selection::{lower_median, order_scan, ScanSource};
use crate::smoother::MeasurementRange;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "NOISY_AR_THREADS";

/// Offset between a trial's noise seed and its artefact seed, so the two
/// streams never coincide.
pub const ARTEFACT_SEED_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    FitAr,
    FitVar,
    FitNar,
    OrderScan,
    ConvergenceStudy,
    ArtefactStudy,
    Predict,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Simulate,
        Command::FitAr,
        Command::FitVar,
        Command::FitNar,
        Command::OrderScan,
        Command::ConvergenceStudy,
        Command::ArtefactStudy,
        Command::Predict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FitAr => "fit-ar",
            Command::FitVar => "fit-var",
            Command::FitNar => "fit-nar",
            Command::OrderScan => "order-scan",
            Command::ConvergenceStudy => "convergence-study",
            Command::ArtefactStudy => "artefact-study",
            Command::Predict => "predict",
        }
    }

    fn is_nar(self) -> bool {
        matches!(self, Command::FitNar | Command::ArtefactStudy)
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown command {s:?}")))
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Every knob of a run. Unset optional fields get per-command defaults in
/// [`ExperimentConfig::resolved`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub seed: u64,
    /// CSV input; synthetic data is generated when absent.
    pub input: Option<PathBuf>,
    pub has_header: bool,
    /// 1-based channel used by scalar commands.
    pub channel: usize,
    /// Replace the input by its first difference before fitting.
    pub difference: bool,
    pub sample_rate_hz: Option<f64>,
    pub order: Option<usize>,
    /// Order scans cover `1..=max_order`.
    pub max_order: usize,
    pub depth: usize,
    pub rho: f64,
    pub lambda: Option<f64>,
    pub iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub measurements: MeasurementRange,
    pub trials: usize,
    /// AR coefficients of the synthetic generator; the unit-circle AR(5)
    /// when absent.
    pub theta: Option<Vec<f64>>,
    pub horizon: Option<usize>,
    pub transition_std: f64,
    pub measurement_std: f64,
    /// Leading steps used for training by the signature commands; the rest
    /// is the one-step test set.
    pub train_len: usize,
    pub test_len: usize,
    pub artefact_start: usize,
    pub artefact_end: usize,
    /// White-noise level of the artefact; the clean training window's
    /// standard deviation when absent.
    pub artefact_std: Option<f64>,
    /// Report of an earlier fit, read by `predict`.
    pub model: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: None,
            seed: 0,
            input: None,
            has_header: false,
            channel: 1,
            difference: false,
            sample_rate_hz: None,
            order: None,
            max_order: 10,
            depth: 2,
            rho: 0.1,
            lambda: None,
            iterations: None,
            tolerance: None,
            measurements: MeasurementRange::AllSteps,
            trials: 100,
            theta: None,
            horizon: None,
            transition_std: 0.1,
            measurement_std: 1.0,
            train_len: 400,
            test_len: 400,
            artefact_start: 150,
            artefact_end: 250,
            artefact_std: None,
            model: None,
            out_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn for_command(command: Command) -> Self {
        ExperimentConfig {
            command: Some(command),
            ..Default::default()
        }
    }

    /// Parses a TOML config; syntax errors carry 1-based line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (row, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
            Error::Parse {
                row,
                column,
                message: e.message().to_owned(),
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn command(&self) -> Result<Command> {
        self.command
            .ok_or_else(|| Error::InvalidConfig("no command given".into()))
    }

    /// Copy with every per-command default filled in.
    pub fn resolved(&self) -> Result<Self> {
        let cmd = self.command()?;
        let mut c = self.clone();
        c.order.get_or_insert(match cmd {
            Command::FitVar => 1,
            Command::FitNar | Command::ArtefactStudy => 4,
            _ => c.theta.as_ref().map_or(5, Vec::len),
        });
        c.lambda
            .get_or_insert(if cmd.is_nar() { 1e-3 } else { 0.0 });
        c.iterations
            .get_or_insert(if cmd.is_nar() { 20 } else { 100 });
        c.tolerance
            .get_or_insert(if cmd.is_nar() { 1e-8 } else { 1e-10 });
        c.horizon.get_or_insert(if cmd.is_nar() {
            c.train_len + c.test_len
        } else {
            200
        });
        if c.input.is_some() && matches!(cmd, Command::OrderScan | Command::ArtefactStudy) {
            c.trials = 1;
        }
        c.validate(cmd)?;
        Ok(c)
    }

    fn validate(&self, cmd: Command) -> Result<()> {
        if self.channel == 0 {
            return Err(Error::InvalidConfig("channels are numbered from 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.max_order == 0 {
            return Err(Error::InvalidConfig("max_order must be at least 1".into()));
        }
        if !(self.transition_std >= 0.0 && self.measurement_std >= 0.0) {
            return Err(Error::InvalidConfig(
                "noise levels must be non-negative".into(),
            ));
        }
        if cmd == Command::ConvergenceStudy && self.input.is_some() {
            return Err(Error::InvalidConfig(
                "the convergence study needs synthetic data with a known truth".into(),
            ));
        }
        if cmd == Command::Predict && self.model.is_none() {
            return Err(Error::InvalidConfig("predict needs a model report".into()));
        }
        Ok(())
    }

    fn fit_config(&self) -> FitConfig {
        FitConfig::new(self.order.unwrap_or(1))
            .rho(self.rho)
            .lambda(self.lambda.unwrap_or(0.0))
            .max_iterations(self.iterations.unwrap_or(100))
            .convergence_tol(self.tolerance.unwrap_or(1e-10))
            .measurement_range(self.measurements)
    }

    fn nar_config(&self) -> NarFitConfig {
        NarFitConfig {
            order: self.order.unwrap_or(4),
            depth: self.depth,
            rho: self.rho,
            lambda: self.lambda.unwrap_or(1e-3),
            max_iterations: self.iterations.unwrap_or(20),
            convergence_tol: self.tolerance.unwrap_or(1e-8),
        }
    }

    fn ar_spec(&self) -> Result<ArSimulationSpec> {
        let base = ArSimulationSpec::unit_circle_order5();
        let theta = self.theta.clone().unwrap_or(base.theta);
        if theta.is_empty() {
            return Err(Error::InvalidConfig("theta must not be empty".into()));
        }
        let mut x1 = vec![0.0; theta.len()];
        x1[0] = 1.0;
        Ok(ArSimulationSpec {
            theta,
            x1,
            horizon: self.horizon.unwrap_or(base.horizon),
            transition_std: self.transition_std,
            measurement_std: self.measurement_std,
            base_seed: self.seed,
        })
    }

    fn artefact_spec(&self) -> Result<ArtefactStudySpec> {
        Ok(ArtefactStudySpec {
            generator: self.ar_spec()?,
            train_len: self.train_len,
            window: (self.artefact_start, self.artefact_end),
            artefact_std: self.artefact_std,
            fit: self.nar_config(),
        })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let row = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (row, column)
}

/// Four-channel stand-in for multichannel recordings: two damped rotations
/// with a one-way coupling from the first pair into the second.
pub fn var1_standin() -> LinearSsModel {
    let (a1, a2) = (std::f64::consts::PI / 5.0, 2.0 * std::f64::consts::PI / 5.0);
    let r = 0.95;
    let a = DenseMatrix::from_rows(&[
        [r * a1.cos(), -r * a1.sin(), 0.0, 0.0],
        [r * a1.sin(), r * a1.cos(), 0.0, 0.0],
        [0.3, 0.0, r * a2.cos(), -r * a2.sin()],
        [0.0, 0.0, r * a2.sin(), r * a2.cos()],
    ])
    .expect("square rows");
    LinearSsModel::general(a, DenseMatrix::identity(4)).expect("consistent shapes")
}

/// Synthetic artefact experiment: a clean AR trajectory whose first
/// `train_len` steps get a white-noise artefact and are used for fitting,
/// and whose remaining steps are the clean one-step test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtefactStudySpec {
    pub generator: ArSimulationSpec,
    pub train_len: usize,
    /// 1-based inclusive artefact window within the training part.
    pub window: (usize, usize),
    pub artefact_std: Option<f64>,
    pub fit: NarFitConfig,
}

impl ArtefactStudySpec {
    /// Unit-circle AR(5) generator over 800 steps, training on the first
    /// 400 with an artefact over steps 150 to 250, and a depth-2 order-4
    /// signature model fitted for 20 iterations.
    pub fn standard() -> Self {
        ArtefactStudySpec {
            generator: ArSimulationSpec {
                horizon: 800,
                ..ArSimulationSpec::unit_circle_order5()
            },
            train_len: 400,
            window: (150, 250),
            artefact_std: None,
            fit: NarFitConfig::new(4, 2),
        }
    }
}

/// Outcome of one artefact trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtefactTrial {
    pub seed: u64,
    pub artefact_std: f64,
    /// RMSE over the artefact window against the clean series.
    pub rmse_raw: f64,
    pub rmse_denoised: f64,
    /// One-step test MSE of the first and last iteration's model, or NaN
    /// without a test set.
    pub test_mse_first: f64,
    pub test_mse_final: f64,
}

impl ArtefactTrial {
    pub fn denoising_helps(&self) -> bool {
        self.rmse_denoised < self.rmse_raw
    }

    pub fn iterating_helps(&self) -> bool {
        self.test_mse_final < self.test_mse_first
    }
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Injects the artefact into the training part of `clean`, fits, and
/// scores the fit. `seed` drives the artefact noise.
pub fn artefact_trial(
    clean: &[f64],
    spec: &ArtefactStudySpec,
    seed: u64,
) -> Result<(ArtefactTrial, FitResult<NarModel>)> {
    let n_train = spec.train_len.min(clean.len());
    let (start, end) = spec.window;
    let train_clean = TimeSeries::scalar(&clean[..n_train])?;
    let std = spec
        .artefact_std
        .unwrap_or_else(|| population_std(&clean[..n_train]));
    let train = inject_artefact(&train_clean, 1, start, end, std, seed)?;
    let fit = fit_nar(&train, &spec.fit)?;

    let yh = fit.y_hat.scalar_values()?;
    let raw = train.scalar_values()?;
    let w = start - 1..end;
    let (first, last) = if clean.len() > n_train + spec.fit.order {
        let test = TimeSeries::scalar(&clean[n_train..])?;
        (
            one_step_mse(&fit.params_history[0], &test)?,
            one_step_mse(&fit.params, &test)?,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    let trial = ArtefactTrial {
        seed,
        artefact_std: std,
        rmse_raw: rmse(&raw[w.clone()], &clean[w.clone()]),
        rmse_denoised: rmse(&yh[w.clone()], &clean[w]),
        test_mse_first: first,
        test_mse_final: last,
    };
    Ok((trial, fit))
}

/// Runs `trials` seeded artefact trials; trial `i` simulates with seed
/// `base_seed + i` and draws its artefact from that plus
/// [`ARTEFACT_SEED_OFFSET`].
pub fn artefact_study(spec: &ArtefactStudySpec, trials: usize) -> Result<Vec<ArtefactTrial>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let (_, y) = spec.generator.generate(i)?;
            let seed = spec.generator.base_seed.wrapping_add(i);
            artefact_trial(
                y.scalar_values()?,
                spec,
                seed.wrapping_add(ARTEFACT_SEED_OFFSET),
            )
            .map(|(t, _)| t)
        })
        .collect()
}

/// Reconstruction quality of one synthetic AR fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrial {
    pub trial: u64,
    /// Relative coefficient error after each iteration.
    pub e_norm_theta_history: Vec<f64>,
    pub e_norm_theta: f64,
    pub e_x: f64,
    /// `e_x` of the raw measurements.
    pub e_x_raw: f64,
    pub converged: bool,
}

/// Fits trial `trial` of `spec` at its true order.
pub fn convergence_trial(
    spec: &ArSimulationSpec,
    config: &FitConfig,
    trial: u64,
) -> Result<ConvergenceTrial> {
    let (x, y) = spec.generate(trial)?;
    let cfg = FitConfig {
        order: spec.theta.len(),
        ..*config
    };
    let fit = fit_ar(&y, &cfg)?;
    let history = fit
        .params_history
        .iter()
        .map(|p| error_metrics(p.theta(), &spec.theta, &x, &x).map(|m| m.e_norm_theta))
        .collect::<Result<Vec<_>>>()?;
    let m = error_metrics(
        fit.params.theta(),
        &spec.theta,
        fit.y_hat.scalar_values()?,
        &x,
    )?;
    let raw = error_metrics(&spec.theta, &spec.theta, y.scalar_values()?, &x)?;
    Ok(ConvergenceTrial {
        trial,
        e_norm_theta_history: history,
        e_norm_theta: m.e_norm_theta,
        e_x: m.e_x,
        e_x_raw: raw.e_x,
        converged: fit.converged,
    })
}

pub fn convergence_study(
    spec: &ArSimulationSpec,
    config: &FitConfig,
    trials: usize,
) -> Result<Vec<ConvergenceTrial>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| convergence_trial(spec, config, i))
        .collect()
}

/// Worker pool sized by [`THREADS_ENV`] if set, else rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(Error::InvalidConfig(format!(
                "{THREADS_ENV} must be positive"
            )));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs the configured command, writes its tables and `report.json` into
/// `out_dir`, and returns the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let cfg = config.resolved()?;
    let cmd = cfg.command()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", cfg.out_dir.display())))?;
    let started = Instant::now();
    let pool = thread_pool()?;
    let mut report = RunReport::new(cmd.name(), cfg.clone());
    let mut out = Outputs {
        dir: &cfg.out_dir,
        written: Vec::new(),
    };
    pool.install(|| match cmd {
        Command::Simulate => run_simulate(&cfg, &mut report, &mut out),
        Command::FitAr => run_fit_ar(&cfg, &mut report, &mut out),
        Command::FitVar => run_fit_var(&cfg, &mut report, &mut out),
        Command::FitNar => run_fit_nar(&cfg, &mut report, &mut out),
        Command::OrderScan => run_order_scan(&cfg, &mut report, &mut out),
        Command::ConvergenceStudy => run_convergence(&cfg, &mut report, &mut out),
        Command::ArtefactStudy => run_artefact(&cfg, &mut report, &mut out),
        Command::Predict => run_predict(&cfg, &mut report, &mut out),
    })?;
    out.written.push("report.json".into());
    report.outputs = out.written;
    report
        .timings
        .insert("total_seconds".into(), started.elapsed().as_secs_f64());
    report.save(cfg.out_dir.join("report.json"))?;
    Ok(report)
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Outputs<'_> {
    fn series(&mut self, name: &str, y: &TimeSeries) -> Result<()> {
        io::write_series_file(self.dir.join(name), y)?;
        self.written.push(name.into());
        Ok(())
    }

    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell<'_>>]) -> Result<()> {
        io::write_table_file(self.dir.join(name), header, rows)?;
        self.written.push(name.into());
        Ok(())
    }

    fn loss_history(&mut self, history: &[LossBreakdown]) -> Result<()> {
        let rows: Vec<Vec<Cell>> = history
            .iter()
            .enumerate()
            .map(|(i, l)| {
                vec![
                    Cell::Int(i as u64 + 1),
                    Cell::Float(l.dynamics_term),
                    Cell::Float(l.measurement_term),
                    Cell::Float(l.ridge_term),
                    Cell::Float(l.total),
                    Cell::Float(l.normalized),
                ]
            })
            .collect();
        self.table(
            "loss_history.csv",
            &[
                "iteration",
                "dynamics",
                "measurement",
                "ridge",
                "total",
                "normalized",
            ],
            &rows,
        )
    }
}

/// Loads the configured input, applying metadata and differencing.
fn load_input(cfg: &ExperimentConfig) -> Result<Option<TimeSeries>> {
    let Some(path) = &cfg.input else {
        return Ok(None);
    };
    let mut y = io::load_csv(path, cfg.has_header)?;
    if let Some(hz) = cfg.sample_rate_hz {
        y = y.with_sample_rate(hz);
    }
    if cfg.difference {
        y = first_difference(&y)?;
    }
    Ok(Some(y))
}

fn select_channel(y: &TimeSeries, channel: usize) -> Result<TimeSeries> {
    if channel > y.channels() {
        return Err(Error::IndexOutOfRange(format!(
            "channel {channel} of a {}-channel series",
            y.channels()
        )));
    }
    let mut s = TimeSeries::scalar(&y.channel(channel - 1))?;
    s.sample_rate_hz = y.sample_rate_hz;
    if let Some(names) = &y.channel_names {
        s = s.with_channel_names(vec![names[channel - 1].clone()])?;
    }
    Ok(s)
}

fn scalar_input(cfg: &ExperimentConfig) -> Result<Option<TimeSeries>> {
    load_input(cfg)?
        .map(|y| select_channel(&y, cfg.channel))
        .transpose()
}

fn eigen_pairs(theta: &[f64]) -> Result<Vec<[f64; 2]>> {
    Ok(companion_eigenvalues(theta)?
        .into_iter()
        .map(|z| [z.re, z.im])
        .collect())
}

fn run_simulate(cfg: &ExperimentConfig, report: &mut RunReport, out: &mut Outputs) -> Result<()> {
    let spec = cfg.ar_spec()?;
    let (x, y) = spec.generate(0)?;
    out.series("measurements.csv", &y)?;
    let x = TimeSeries::scalar(&x)?.with_channel_names(vec!["x".into()])?;
    out.series("noiseless.csv", &x)?;
    report.model = Some(FittedModel::Ar {
        theta: spec.theta.clone(),
    });
    report.eigenvalues = eigen_pairs(&spec.theta)?;
    Ok(())
}

fn run_fit_ar(cfg: &ExperimentConfig, report: &mut RunReport, out: &mut Outputs) -> Result<()> {
    let (y, truth) = match scalar_input(cfg)? {
        Some(y) => (y, None),
        None => {
            let spec = cfg.ar_spec()?;
            let (x, y) = spec.generate(0)?;
            (y, Some((spec.theta, x)))
        }
    };
    let fit = fit_ar(&y, &cfg.fit_config())?;
    out.series("denoised.csv", &fit.y_hat)?;
    out.loss_history(&fit.loss_history)?;
    let rows: Vec<Vec<Cell>> = fit
        .params_history
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            p.theta().iter().enumerate().map(move |(k, &v)| {
                vec![
                    Cell::Int(i as u64 + 1),
                    Cell::Int(k as u64 + 1),
                    Cell::Float(v),
                ]
            })
        })
        .collect();
    out.table("coefficients.csv", &["iteration", "lag", "theta"], &rows)?;

    report.eigenvalues = eigen_pairs(fit.params.theta())?;
    if let Some(e) = fit.min_eig_magnitude {
        report.metrics.insert("min_eig_magnitude".into(), e);
    }
    report
        .metrics
        .insert("min_eig_magnitude_iter1".into(), fit.min_eig_after(1)?);
    if let Some((theta, x)) = truth {
        if theta.len() == fit.params.order() {
            let m = error_metrics(fit.params.theta(), &theta, fit.y_hat.scalar_values()?, &x)?;
            report.metrics.insert("e_norm_theta".into(), m.e_norm_theta);
            report.metrics.insert("e_x".into(), m.e_x);
        }
        let raw = error_metrics(&theta, &theta, y.scalar_values()?, &x)?;
        report.metrics.insert("e_x_raw".into(), raw.e_x);
    }
    fill_fit(report, &fit);
    report.model = Some(FittedModel::Ar {
        theta: fit.params.theta().to_vec(),
    });
    Ok(())
}

fn fill_fit<P>(report: &mut RunReport, fit: &FitResult<P>) {
    report.loss_history = fit.loss_history.clone();
    report.iterations_run = Some(fit.iterations_run);
    report.converged = Some(fit.converged);
}

fn run_fit_var(cfg: &ExperimentConfig, report: &mut RunReport, out: &mut Outputs) -> Result<()> {
    let (y, truth) = match load_input(cfg)? {
        Some(y) => (y, None),
        None => {
            let model = var1_standin();
            let noise = NoiseSpec {
                transition_std: cfg.transition_std,
                measurement_std: cfg.measurement_std,
                seed: cfg.seed,
            };
            let x1 = vec![1.0; model.state_dim()];
            let (states, y) = simulate(&model, &x1, cfg.horizon.unwrap_or(200), &noise)?;
            (y, Some((model, states)))
        }
    };
    let fit = fit_var1(&y, &cfg.fit_config())?;
    out.series("denoised.csv", &fit.y_hat)?;
    out.loss_history(&fit.loss_history)?;
    let p = y.channels();
    let a = &fit.params;
    let rows: Vec<Vec<Cell>> = (0..p)
        .flat_map(|i| {
            (0..p).map(move |j| {
                vec![
                    Cell::Int(j as u64 + 1),
                    Cell::Int(i as u64 + 1),
                    Cell::Float(a[(i, j)]),
                ]
            })
        })
        .collect();
    out.table("connectivity.csv", &["source", "target", "weight"], &rows)?;
    if let Some((model, states)) = truth {
        let rel = a.sub(model.a())?.frobenius_norm() / model.a().frobenius_norm();
        report.metrics.insert("e_a".into(), rel);
        let x = TimeSeries::new(states)?;
        let dx = fit.y_hat.values().sub(x.values())?.frobenius_norm();
        let dy = y.values().sub(x.values())?.frobenius_norm();
        let xn = x.values().frobenius_norm();
        report.metrics.insert("e_x".into(), dx / xn);
        report.metrics.insert("e_x_raw".into(), dy / xn);
    }
    fill_fit(report, &fit);
    report.model = Some(FittedModel::Var1 { a: a.clone() });
    Ok(())
}

fn run_fit_nar(cfg: &ExperimentConfig, report: &mut RunReport, out: &mut Outputs) -> Result<()> {
    let spec = cfg.artefact_spec()?;
    let (fit, train, test, trial) = match scalar_input(cfg)? {
        Some(y) => {
            let ys = y.scalar_values()?;
            let n_train = cfg.train_len.min(ys.len());
            let train = TimeSeries::scalar(&ys[..n_train])?;
            let test = (ys.len() > n_train + spec.fit.order)
                .then(|| TimeSeries::scalar(&ys[n_train..]))
                .transpose()?;
            (fit_nar(&train, &spec.fit)?, train, test, None)
        }
        None => {
            let (_, y) = spec.generator.generate(0)?;
            let clean = y.scalar_values()?;
            let (trial, fit) =
                artefact_trial(clean, &spec, cfg.seed.wrapping_add(ARTEFACT_SEED_OFFSET))?;
            let n_train = spec.train_len.min(clean.len());
            let train = inject_artefact(
                &TimeSeries::scalar(&clean[..n_train])?,
                1,
                spec.window.0,
                spec.window.1,
                trial.artefact_std,
                trial.seed,
            )?;
            let test = (clean.len() > n_train + spec.fit.order)
                .then(|| TimeSeries::scalar(&clean[n_train..]))
                .transpose()?;
            (fit, train, test, Some(trial))
        }
    };
    out.series("training.csv", &train)?;
    out.series("denoised.csv", &fit.y_hat)?;
    out.loss_history(&fit.loss_history)?;
    if let Some(test) = &test {
        let first = nar_predict_one_step(&fit.params_history[0], test)?;
        let last = nar_predict_one_step(&fit.params, test)?;
        let ys = test.scalar_values()?;
        let r = fit.params.order;
        let rows: Vec<Vec<Cell>> = (r..ys.len())
            .map(|t| {
                vec![
                    Cell::Int(t as u64 + 1),
                    Cell::Float(ys[t]),
                    Cell::Float(first[t - r]),
                    Cell::Float(last[t - r]),
                ]
            })
            .collect();
        out.table(
            "predictions.csv",
            &["step", "actual", "predicted_first", "predicted_final"],
            &rows,
        )?;
        report.metrics.insert(
            "test_mse_first".into(),
            one_step_mse(&fit.params_history[0], test)?,
        );
        report
            .metrics
            .insert("test_mse_final".into(), one_step_mse(&fit.params, test)?);
    }
    if let Some(t) = trial {
        report.metrics.insert("artefact_std".into(), t.artefact_std);
        report.metrics.insert("rmse_raw".into(), t.rmse_raw);
        report
            .metrics
            .insert("rmse_denoised".into(), t.rmse_denoised);
    }
    fill_fit(report, &fit);
    report.model = Some(FittedModel::Nar(fit.params));
    Ok(())
}

fn run_order_scan(cfg: &ExperimentConfig, report: &mut RunReport, out: &mut Outputs) -> Result<()> {
    let orders: Vec<usize> = (1..=cfg.max_order).collect();
    let fit_cfg = cfg.fit_config();
    let input = scalar_input(cfg)?;
    let spec = cfg.ar_spec()?;
    let source = match &input {
        Some(y) => ScanSource::Series(y),
        None => ScanSource::Synthetic(&spec),
    };
    let scan = order_scan(source, &orders, &fit_cfg, cfg.trials)?;

    let mut medians = Vec::new();
    let mut trials = Vec::new();
    for e in &scan.per_order {
        let o = Cell::Int(e.order as u64);
        for (name, v) in [
            ("normalized_loss", e.normalized_loss),
            ("min_eig_magnitude", e.min_eig_magnitude),
            ("min_eig_magnitude_iter1", e.min_eig_iter1),
        ] {
            medians.push(vec![o, Cell::Text(name), Cell::Float(v)]);
        }
        for i in 0..e.normalized_loss_trials.len() {
            trials.push(vec![
                o,
                Cell::Int(i as u64),
                Cell::Float(e.normalized_loss_trials[i]),
                Cell::Float(e.min_eig_trials[i]),
                Cell::Float(e.min_eig_iter1_trials[i]),
            ]);
        }
    }
    out.table(
        "order_scan.csv",
        &["order", "criterion", "median"],
        &medians,
    )?;
    out.table(
        "order_scan_trials.csv",
        &[
            "order",
            "trial",
            "normalized_loss",
            "min_eig_magnitude",
            "min_eig_magnitude_iter1",
        ],
        &trials,
    )?;
    report.order_scan = Some(scan);
    Ok(())
}

fn run_convergence(
    cfg: &ExperimentConfig,
    report: &mut RunReport,
    out: &mut Outputs,
) -> Result<()> {
    let spec = cfg.ar_spec()?;
    let results = convergence_study(&spec, &cfg.fit_config(), cfg.trials)?;
    let mut history = Vec::new();
    let mut summary = Vec::new();
    for t in &results {
        for (i, e) in t.e_norm_theta_history.iter().enumerate() {
            history.push(vec![
                Cell::Int(t.trial),
                Cell::Int(i as u64 + 1),
                Cell::Float(*e),
            ]);
        }
        summary.push(vec![
            Cell::Int(t.trial),
            Cell::Float(t.e_norm_theta),
            Cell::Float(t.e_x),
            Cell::Float(t.e_x_raw),
            Cell::Int(t.converged as u64),
        ]);
    }
    out.table(
        "convergence.csv",
        &["trial", "iteration", "e_norm_theta"],
        &history,
    )?;
    out.table(
        "convergence_trials.csv",
        &["trial", "e_norm_theta", "e_x", "e_x_raw", "converged"],
        &summary,
    )?;
    let e_theta: Vec<f64> = results.iter().map(|t| t.e_norm_theta).collect();
    let e_x: Vec<f64> = results.iter().map(|t| t.e_x).collect();
    let m = &mut report.metrics;
    m.insert("median_e_norm_theta".into(), lower_median(&e_theta));
    m.insert("median_e_x".into(), lower_median(&e_x));
    m.insert(
        "trials_e_norm_theta_below_0.05".into(),
        e_theta.iter().filter(|&&e| e < 0.05).count() as f64,
    );
    m.insert(
        "trials_denoised_better_than_raw".into(),
        results.iter().filter(|t| t.e_x < t.e_x_raw).count() as f64,
    );
    Ok(())
}

fn run_artefact(cfg: &ExperimentConfig, report: &mut RunReport, out: &mut Outputs) -> Result<()> {
    let spec = cfg.artefact_spec()?;
    let results = match scalar_input(cfg)? {
        Some(y) => vec![
            artefact_trial(
                y.scalar_values()?,
                &spec,
                cfg.seed.wrapping_add(ARTEFACT_SEED_OFFSET),
            )?
            .0,
        ],
        None => artefact_study(&spec, cfg.trials)?,
    };
    let rows: Vec<Vec<Cell>> = results
        .iter()
        .map(|t| {
            vec![
                Cell::Int(t.seed),
                Cell::Float(t.artefact_std),
                Cell::Float(t.rmse_raw),
                Cell::Float(t.rmse_denoised),
                Cell::Float(t.test_mse_first),
                Cell::Float(t.test_mse_final),
            ]
        })
        .collect();
    out.table(
        "artefact_trials.csv",
        &[
            "artefact_seed",
            "artefact_std",
            "rmse_raw",
            "rmse_denoised",
            "test_mse_first",
            "test_mse_final",
        ],
        &rows,
    )?;
    let m = &mut report.metrics;
    let count = |f: fn(&ArtefactTrial) -> bool| results.iter().filter(|t| f(t)).count() as f64;
    m.insert(
        "trials_denoising_helps".into(),
        count(ArtefactTrial::denoising_helps),
    );
    m.insert(
        "trials_iterating_helps".into(),
        count(ArtefactTrial::iterating_helps),
    );
    m.insert(
        "trials_both".into(),
        count(|t| t.denoising_helps() && t.iterating_helps()),
    );
    Ok(())
}

fn run_predict(cfg: &ExperimentConfig, report: &mut RunReport, out: &mut Outputs) -> Result<()> {
    let source = RunReport::load(cfg.model.as_ref().expect("validated"))?;
    let model = source
        .model
        .ok_or_else(|| Error::InvalidConfig("model report holds no fitted model".into()))?;
    let series = match load_input(cfg)? {
        Some(y) => y,
        None => cfg.ar_spec()?.generate(0)?.1,
    };
    // (step of the target, actual, predicted), steps 1-based
    let mut preds: Vec<(usize, f64, f64)> = Vec::new();
    let mut channel_of = Vec::new();
    match &model {
        FittedModel::Ar { theta } => {
            let y = select_channel(&series, cfg.channel)?;
            let ys = y.scalar_values()?;
            let p = ArParams::new(theta.clone())?;
            let r = p.order();
            if ys.len() <= r {
                return Err(Error::HorizonTooShort {
                    len: ys.len(),
                    order: r,
                });
            }
            let mut window = vec![0.0; r];
            for t in r..ys.len() {
                for (k, w) in window.iter_mut().enumerate() {
                    *w = ys[t - 1 - k];
                }
                preds.push((t + 1, ys[t], predict_one_step(&p, &window)?));
                channel_of.push(cfg.channel);
            }
        }
        FittedModel::Var1 { a } => {
            if a.rows() != series.channels() {
                return Err(Error::DimensionMismatch(format!(
                    "model has {} channels, input {}",
                    a.rows(),
                    series.channels()
                )));
            }
            for t in 1..series.len() {
                let next = a.mul_vec(series.row(t - 1))?;
                for (j, v) in next.into_iter().enumerate() {
                    preds.push((t + 1, series.row(t)[j], v));
                    channel_of.push(j + 1);
                }
            }
        }
        FittedModel::Nar(m) => {
            let y = select_channel(&series, cfg.channel)?;
            let ys = y.scalar_values()?;
            if ys.len() <= m.order {
                return Err(Error::HorizonTooShort {
                    len: ys.len(),
                    order: m.order,
                });
            }
            let p = nar_predict_one_step(m, &y)?;
            for t in m.order..ys.len() {
                preds.push((t + 1, ys[t], p[t - m.order]));
                channel_of.push(cfg.channel);
            }
        }
    }
    let rows: Vec<Vec<Cell>> = preds
        .iter()
        .zip(&channel_of)
        .map(|(&(t, a, p), &c)| {
            vec![
                Cell::Int(t as u64),
                Cell::Int(c as u64),
                Cell::Float(a),
                Cell::Float(p),
            ]
        })
        .collect();
    out.table(
        "predictions.csv",
        &["step", "channel", "actual", "predicted"],
        &rows,
    )?;
    let mse = preds.iter().map(|(_, a, p)| (a - p).powi(2)).sum::<f64>() / preds.len() as f64;
    report.metrics.insert("one_step_mse".into(), mse);
    report.model = Some(model);
    Ok(())
}
