//! Model-order diagnostics.
//!
//! For each candidate order the fit is run to completion and two criteria are
//! reported: the normalized final loss, which stops improving once the order
//! reaches the true state dimension, and the smallest companion eigenvalue
//! magnitude, which for marginally stable data peaks near the true order.
//! Picking the order from these curves is left to the caller.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{fit_ar, min_eig_magnitude, FitConfig};
use crate::model::{ArSimulationSpec, TimeSeries};

/// Data the scan runs on.
#[derive(Debug, Clone)]
pub enum ScanSource<'a> {
    /// A single measured series.
    Series(&'a TimeSeries),
    /// A seeded generator; trial `i` uses seed `base_seed + i`.
    Synthetic(&'a ArSimulationSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScanEntry {
    pub order: usize,
    /// Median normalized loss after the final iteration.
    pub normalized_loss: f64,
    /// Median smallest eigenvalue magnitude after the final iteration.
    pub min_eig_magnitude: f64,
    /// Median smallest eigenvalue magnitude after the first iteration.
    pub min_eig_iter1: f64,
    pub normalized_loss_trials: Vec<f64>,
    pub min_eig_trials: Vec<f64>,
    pub min_eig_iter1_trials: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScanReport {
    /// Sorted by order, one entry per scanned order.
    pub per_order: Vec<OrderScanEntry>,
    pub num_trials: usize,
    pub aggregation: String,
}

impl OrderScanReport {
    pub fn entry(&self, order: usize) -> Option<&OrderScanEntry> {
        self.per_order.iter().find(|e| e.order == order)
    }
}

/// Lower median: element `(n − 1) / 2` of the sorted values.
pub fn lower_median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

struct TrialOutcome {
    normalized_loss: f64,
    min_eig: f64,
    min_eig_iter1: f64,
}

pub fn order_scan(
    source: ScanSource<'_>,
    orders: &[usize],
    config: &FitConfig,
    num_trials: usize,
) -> Result<OrderScanReport> {
    if orders.is_empty() {
        return Err(Error::InvalidConfig("no orders to scan".into()));
    }
    if num_trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    if matches!(source, ScanSource::Series(_)) && num_trials != 1 {
        return Err(Error::InvalidConfig(
            "multiple trials need a synthetic generator".into(),
        ));
    }
    let mut orders = orders.to_vec();
    orders.sort_unstable();
    orders.dedup();

    let series: Vec<TimeSeries> = match &source {
        ScanSource::Series(y) => vec![(*y).clone()],
        ScanSource::Synthetic(spec) => (0..num_trials as u64)
            .map(|i| spec.generate(i).map(|(_, y)| y))
            .collect::<Result<_>>()?,
    };

    let jobs: Vec<(usize, usize)> = orders
        .iter()
        .flat_map(|&r| (0..num_trials).map(move |i| (r, i)))
        .collect();
    // indexed collect keeps (order, trial) ordering regardless of scheduling
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(r, i)| {
            let cfg = FitConfig {
                order: r,
                ..*config
            };
            let fit = fit_ar(&series[i], &cfg)?;
            Ok(TrialOutcome {
                normalized_loss: fit.loss_history.last().expect("non-empty").normalized,
                min_eig: fit.min_eig_magnitude.expect("companion fit"),
                min_eig_iter1: min_eig_magnitude(&fit.params_history[0])?,
            })
        })
        .collect::<Result<_>>()?;

    let per_order = orders
        .iter()
        .zip(outcomes.chunks(num_trials))
        .map(|(&order, chunk)| {
            let loss: Vec<f64> = chunk.iter().map(|o| o.normalized_loss).collect();
            let eig: Vec<f64> = chunk.iter().map(|o| o.min_eig).collect();
            let eig1: Vec<f64> = chunk.iter().map(|o| o.min_eig_iter1).collect();
            OrderScanEntry {
                order,
                normalized_loss: lower_median(&loss),
                min_eig_magnitude: lower_median(&eig),
                min_eig_iter1: lower_median(&eig1),
                normalized_loss_trials: loss,
                min_eig_trials: eig,
                min_eig_iter1_trials: eig1,
            }
        })
        .collect();

    Ok(OrderScanReport {
        per_order,
        num_trials,
        aggregation: "lower_median".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_conventions() {
        assert_eq!(lower_median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert!(lower_median(&[]).is_nan());
    }

    #[test]
    fn rejects_multi_trial_series() {
        let y = TimeSeries::scalar(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(order_scan(ScanSource::Series(&y), &[1], &FitConfig::new(1), 3).is_err());
        assert!(order_scan(ScanSource::Series(&y), &[], &FitConfig::new(1), 1).is_err());
    }

    #[test]
    fn entries_sorted_and_deduplicated() {
        let spec = ArSimulationSpec {
            horizon: 60,
            ..ArSimulationSpec::unit_circle_order5()
        };
        let cfg = FitConfig::new(1).max_iterations(3);
        let rep = order_scan(ScanSource::Synthetic(&spec), &[3, 1, 3, 2], &cfg, 2).unwrap();
        let orders: Vec<usize> = rep.per_order.iter().map(|e| e.order).collect();
        assert_eq!(orders, vec![1, 2, 3]);
        assert_eq!(rep.per_order[0].min_eig_trials.len(), 2);
    }
}
