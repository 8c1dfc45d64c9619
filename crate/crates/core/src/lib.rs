//! Identification of autoregressive models from noisy measurements.
//!
//! Ordinary least squares on delay embeddings is biased when the
//! measurements themselves are noisy, because the regressors carry the same
//! noise as the targets. This crate fits the coefficients and a denoised
//! trajectory jointly by alternating two exact minimizations of one
//! quadratic loss:
//!
//! - [`linear::param_step`]: ridge least squares on the delay embedding of the
//!   current denoised series;
//! - [`linear::state_step`]: the denoised series for fixed coefficients, a
//!   banded positive definite solve.
//!
//! Neither step can raise the loss, so the loss sequence is monotone.
//! The same scheme covers VAR(1) models ([`linear::fit_var1`]) and nonlinear
//! models that are linear in path-signature features ([`nar::fit_nar`]).
//!
//! ```
//! use noisy_ar::linear::{fit_ar, FitConfig};
//! use noisy_ar::model::ArSimulationSpec;
//!
//! let spec = ArSimulationSpec::unit_circle_order5();
//! let (_, y) = spec.generate(0).unwrap();
//! let fit = fit_ar(&y, &FitConfig::new(5)).unwrap();
//! let losses: Vec<f64> = fit.loss_history.iter().map(|l| l.total).collect();
//! assert!(losses.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
//! ```

mod error;
pub mod experiment;
pub mod io;
pub mod linear;
pub mod model;
pub mod nar;
pub mod numerics;
pub mod preprocess;
pub mod selection;
pub mod signature;
pub mod smoother;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/smoothing.md")]
    mod smoothing {}
    #[doc = include_str!("../../../book/src/order-selection.md")]
    mod order_selection {}
    #[doc = include_str!("../../../book/src/signatures.md")]
    mod signatures {}
    #[doc = include_str!("../../../book/src/nonlinear.md")]
    mod nonlinear {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
